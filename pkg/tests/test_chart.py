import numpy as np
import pytest

from cytorules.chart import (
    DEFAULT_RATIO_EPSILON,
    DensityChart,
    RATIO_PAIRS,
    charts_to_csv,
    density_chart,
    distort,
    feature_vector,
    fit_distortion,
    polar_to_cartesian,
    sector_of,
    variable_index,
    variable_name,
)
from cytorules.errors import NoPoints


class TestFitDistortion:
    def test_colinear_points(self):
        params = fit_distortion(np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]))
        assert np.allclose(params.origin, [2.0, 0.0])
        assert params.bin_max_radius[0] == 2.0  # bin containing angle 0
        assert params.bin_max_radius[180] == 2.0  # bin containing angle pi

    def test_single_point_fallback(self):
        params = fit_distortion(np.array([[3.0, -1.0]]))
        assert np.allclose(params.origin, [3.0, -1.0])
        assert np.all(params.bin_max_radius == 1.0)

    def test_uniform_disk_monte_carlo(self):
        # ~17 points per bin at 60 bins; P(bin max < 4) = exp(-6) per bin
        rng = np.random.default_rng(42)
        center = np.array([2.0, -3.0])
        r = 5.0 * np.sqrt(rng.random(1000))
        theta = 2 * np.pi * rng.random(1000)
        points = center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        params = fit_distortion(points, n_angle_bins=60)
        origin_err = np.linalg.norm(params.origin - center)
        assert origin_err < 0.3
        # radii are measured from the fitted centroid, so the rim can sit up
        # to origin_err beyond the disk radius
        in_range = (params.bin_max_radius >= 4.0) & (params.bin_max_radius <= 5.0 + origin_err)
        assert in_range.mean() >= 0.95

    def test_no_points(self):
        with pytest.raises(NoPoints):
            fit_distortion(np.zeros((0, 2)))


class TestDistort:
    def test_bin_max_attainer_hits_radius_one(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(200, 2)) * 3
        params = fit_distortion(points)
        polar = distort(params, points)
        assert polar[:, 0].max() == 1.0

    def test_origin_maps_to_zero(self):
        params = fit_distortion(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        polar = distort(params, params.origin[None, :])
        assert polar[0, 0] == 0.0 and polar[0, 1] == 0.0

    def test_outside_point_clips_with_angle_preserved(self):
        params = fit_distortion(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
        far = np.array([[10.0, 10.0]])
        polar = distort(params, far)
        assert polar[0, 0] == 1.0
        assert np.isclose(polar[0, 1], np.pi / 4)


class TestDensityChart:
    def test_one_point_per_sector_is_uniform(self):
        mid_angles = (np.arange(12) + 0.5) * (np.pi / 6)
        polar = np.column_stack([np.full(12, 0.5), mid_angles])
        chart = density_chart(polar, "s")
        assert np.allclose(chart.densities, 1 / 12)

    def test_all_points_at_angle_zero(self):
        polar = np.column_stack([np.linspace(0.1, 1.0, 7), np.zeros(7)])
        chart = density_chart(polar, "s")
        assert chart.densities[0] == 1.0
        assert chart.densities[1:].sum() == 0.0

    def test_boundary_angle_goes_to_next_sector(self):
        polar = np.array([[0.5, np.pi / 6]])
        chart = density_chart(polar, "s")
        assert chart.densities[1] == 1.0

    def test_empty_slide_rejected(self):
        with pytest.raises(NoPoints):
            density_chart(np.zeros((0, 2)), "s")


class TestFeatureVector:
    def test_uniform_chart(self):
        chart = DensityChart(densities=np.full(12, 1 / 12), cell_count=12, slide_id="s")
        vec = feature_vector(chart)
        assert vec.shape == (78,)
        assert np.allclose(vec[:12], 1 / 12)
        assert np.allclose(vec[12:], 1.0)

    def test_named_ratio_arithmetic(self):
        densities = np.full(12, 0.6 / 10)
        densities[5] = 0.3  # D6
        densities[10] = 0.1  # D11
        chart = DensityChart(densities=densities, cell_count=100, slide_id="s")
        vec = feature_vector(chart)
        assert np.isclose(vec[variable_index("D6/D11")], 3.0)

    def test_zero_denominator_guard(self):
        densities = np.zeros(12)
        densities[0] = 1.0
        vec = feature_vector(DensityChart(densities=densities, cell_count=5, slide_id="s"))
        assert np.all(np.isfinite(vec))
        assert np.isclose(vec[variable_index("D1/D2")], 1.0 / DEFAULT_RATIO_EPSILON)


class TestGeometryProperties:
    def test_densities_sum_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = rng.integers(1, 80)
            polar = np.column_stack([rng.random(n), rng.uniform(0, 2 * np.pi, n)])
            chart = density_chart(polar, "s")
            assert abs(chart.densities.sum() - 1.0) < 1e-9

    def test_reference_points_stay_in_unit_disc(self):
        rng = np.random.default_rng(2)
        for trial in range(50):
            points = rng.normal(size=(rng.integers(1, 200), 2)) * rng.uniform(0.1, 10)
            params = fit_distortion(points)
            assert distort(params, points)[:, 0].max() <= 1.0

    def test_sector_is_radial_scale_invariant(self):
        rng = np.random.default_rng(3)
        theta = rng.uniform(0, 2 * np.pi, 1000)
        for scale in (0.01, 0.5, 3.0):
            assert np.array_equal(sector_of(theta), sector_of(theta))  # angle-only function
            r1 = np.column_stack([np.full(1000, 0.2), theta])
            r2 = np.column_stack([np.full(1000, 0.2 * scale), theta])
            c1 = density_chart(r1, "a").densities
            c2 = density_chart(r2, "a").densities
            assert np.array_equal(c1, c2)

    def test_ratio_layout_matches_independent_derivation(self):
        expected = []
        for i in range(1, 13):
            for j in range(1, 13):
                if i < j:
                    expected.append((i, j))
        assert RATIO_PAIRS == expected
        for pos, (i, j) in enumerate(expected):
            assert variable_name(12 + pos) == f"D{i}/D{j}"
            assert variable_index(f"D{i}/D{j}") == 12 + pos

    def test_distortion_preserves_angles_of_reference(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(300, 2)) * 2
        params = fit_distortion(points)
        delta = points - params.origin
        theta_before = np.arctan2(delta[:, 1], delta[:, 0]) % (2 * np.pi)
        polar = distort(params, points)
        assert np.allclose(polar[:, 1], theta_before)


def test_polar_cartesian_round_trip():
    rng = np.random.default_rng(5)
    polar = np.column_stack([rng.random(100), rng.uniform(0, 2 * np.pi, 100)])
    xy = polar_to_cartesian(polar)
    r = np.hypot(xy[:, 0], xy[:, 1])
    assert np.allclose(r, polar[:, 0])


def test_charts_csv_layout():
    chart = DensityChart(densities=np.full(12, 1 / 12), cell_count=12, slide_id="slide-1")
    text = charts_to_csv([chart])
    lines = text.strip().split("\n")
    assert lines[0].startswith("slide_id,D1,")
    assert lines[0].endswith(",count")
    assert lines[1].split(",")[0] == "slide-1"
    assert lines[1].split(",")[-1] == "12"
