"""Circular distortion of the 2D embedding and sector density features.

The embedding cloud is recentered at its centroid and rescaled so that the
maximum radius within every 1-degree angular bin becomes 1, mapping all
reference points into the unit disc. The disc is then cut into 12 equal
sectors; a slide is summarized by its 12 sector densities plus all 66
pairwise density ratios, a 78-variable feature vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NoPoints

N_SECTORS = 12
N_FEATURES = 12 + 66

# (i, j) pairs with 1 <= i < j <= 12 in lexicographic order; ratio block of
# the feature vector follows this layout exactly.
RATIO_PAIRS = [(i, j) for i in range(1, N_SECTORS + 1) for j in range(i + 1, N_SECTORS + 1)]

DEFAULT_RATIO_EPSILON = 1e-6


@dataclass(frozen=True)
class DistortionParams:
    origin: np.ndarray  # (2,)
    bin_max_radius: np.ndarray  # (n_angle_bins,)

    @property
    def n_angle_bins(self) -> int:
        return self.bin_max_radius.shape[0]

    def to_json(self) -> dict:
        return {
            "origin": self.origin.tolist(),
            "bin_max_radius": self.bin_max_radius.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DistortionParams":
        return cls(
            origin=np.asarray(doc["origin"], dtype=np.float64),
            bin_max_radius=np.asarray(doc["bin_max_radius"], dtype=np.float64),
        )


@dataclass
class DensityChart:
    densities: np.ndarray  # (12,), sums to 1
    cell_count: int
    slide_id: str

    def to_json(self) -> dict:
        return {
            "slide_id": self.slide_id,
            "densities": self.densities.tolist(),
            "cell_count": self.cell_count,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DensityChart":
        return cls(
            densities=np.asarray(doc["densities"], dtype=np.float64),
            cell_count=int(doc["cell_count"]),
            slide_id=doc["slide_id"],
        )


def _angles_and_radii(points: np.ndarray, origin: np.ndarray):
    delta = np.asarray(points, dtype=np.float64) - origin
    radii = np.hypot(delta[:, 0], delta[:, 1])
    theta = np.arctan2(delta[:, 1], delta[:, 0])
    theta = np.where(theta < 0, theta + 2 * np.pi, theta)
    # atan2(0, 0) already yields 0; points at the origin get angle 0
    return theta, radii


def fit_distortion(reference_points: np.ndarray, n_angle_bins: int = 360) -> DistortionParams:
    """Fit the distortion origin and per-angle-bin max radii.

    Points exactly at the centroid carry no direction and do not occupy a
    bin; if no point has positive radius every bin falls back to 1.0. Empty
    bins inherit the nearest non-empty bin's radius (circular search, ties
    toward the lower bin index).
    """
    points = np.asarray(reference_points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise NoPoints("reference points must be an Nx2 array")
    if points.shape[0] == 0:
        raise NoPoints("cannot fit distortion with no points")
    origin = points.mean(axis=0)
    theta, radii = _angles_and_radii(points, origin)

    bin_width = 2 * np.pi / n_angle_bins
    max_radius = np.full(n_angle_bins, -1.0)
    positive = radii > 0
    bins = np.minimum((theta[positive] // bin_width).astype(int), n_angle_bins - 1)
    np.maximum.at(max_radius, bins, radii[positive])

    if not np.any(max_radius > 0):
        return DistortionParams(origin=origin, bin_max_radius=np.ones(n_angle_bins))

    filled = max_radius[_nearest_occupied(max_radius >= 0)]
    return DistortionParams(origin=origin, bin_max_radius=filled)


def _nearest_occupied(occupied: np.ndarray) -> np.ndarray:
    """Index of the circularly nearest occupied bin, ties to the lower index."""
    n = occupied.shape[0]
    idx = np.arange(n)
    last = np.maximum.accumulate(np.where(occupied, idx, -1))
    last_overall = int(np.nonzero(occupied)[0][-1])
    prev_idx = np.where(last >= 0, last, last_overall - n)
    nxt = np.where(occupied, idx, 2 * n)
    nxt = np.minimum.accumulate(nxt[::-1])[::-1]
    first_overall = int(np.argmax(occupied))
    next_idx = np.where(nxt < 2 * n, nxt, first_overall + n)
    dprev = idx - prev_idx
    dnext = next_idx - idx
    prev_bin = prev_idx % n
    next_bin = next_idx % n
    chosen = np.where(dprev < dnext, prev_bin, next_bin)
    return np.where(dprev == dnext, np.minimum(prev_bin, next_bin), chosen)


def distort(params: DistortionParams, points: np.ndarray) -> np.ndarray:
    """Map points to polar (r, theta) in the unit disc.

    Radii are divided by their angular bin's max radius and clipped to 1
    with the angle preserved, which realizes nearest-region projection for
    points landing outside the fitted cloud.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if points.shape[0] == 0:
        return np.zeros((0, 2))
    theta, radii = _angles_and_radii(points, params.origin)
    n = params.n_angle_bins
    bin_width = 2 * np.pi / n
    bins = np.minimum((theta // bin_width).astype(int), n - 1)
    denom = params.bin_max_radius[bins]
    r = radii / np.where(denom > 0, denom, 1.0)
    # degenerate zero-radius bin: anything off-origin goes to the rim
    r = np.where((denom <= 0) & (radii > 0), 1.0, r)
    r = np.minimum(r, 1.0)
    return np.column_stack([r, theta])


def polar_to_cartesian(polar: np.ndarray) -> np.ndarray:
    polar = np.asarray(polar, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([polar[:, 0] * np.cos(polar[:, 1]), polar[:, 0] * np.sin(polar[:, 1])])


def sector_of(theta) -> np.ndarray:
    """Sector indices 0..11; sector k spans [k*pi/6, (k+1)*pi/6)."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.minimum((theta // (2 * np.pi / N_SECTORS)).astype(int), N_SECTORS - 1)


def density_chart(polar_points: np.ndarray, slide_id: str) -> DensityChart:
    """Fraction of a slide's cells in each of the 12 sectors."""
    polar = np.asarray(polar_points, dtype=np.float64).reshape(-1, 2)
    if polar.shape[0] == 0:
        raise NoPoints(f"slide {slide_id}: no points to chart")
    counts = np.bincount(sector_of(polar[:, 1]), minlength=N_SECTORS).astype(np.float64)
    return DensityChart(
        densities=counts / counts.sum(), cell_count=polar.shape[0], slide_id=slide_id
    )


def feature_vector(chart: DensityChart, epsilon: float = DEFAULT_RATIO_EPSILON) -> np.ndarray:
    """78-variable vector: D_1..D_12 then D_i / max(D_j, epsilon) per pair."""
    d = np.asarray(chart.densities, dtype=np.float64)
    ratios = [d[i - 1] / max(d[j - 1], epsilon) for i, j in RATIO_PAIRS]
    return np.concatenate([d, np.asarray(ratios)])


def variable_name(index: int) -> str:
    """Human-readable name of a feature-vector position: D3 or D6/D11."""
    if not 0 <= index < N_FEATURES:
        raise IndexError(index)
    if index < N_SECTORS:
        return f"D{index + 1}"
    i, j = RATIO_PAIRS[index - N_SECTORS]
    return f"D{i}/D{j}"


def variable_index(name: str) -> int:
    """Inverse of variable_name."""
    names = [variable_name(i) for i in range(N_FEATURES)]
    return names.index(name)


def charts_to_csv(charts: list[DensityChart]) -> str:
    """Render charts as CSV: slide_id,D1..D12,count."""
    header = "slide_id," + ",".join(f"D{i}" for i in range(1, N_SECTORS + 1)) + ",count"
    lines = [header]
    for chart in charts:
        values = ",".join(repr(float(v)) for v in chart.densities)
        lines.append(f"{chart.slide_id},{values},{chart.cell_count}")
    return "\n".join(lines) + "\n"


def charts_to_json(charts: list[DensityChart]) -> str:
    return json.dumps({"charts": [c.to_json() for c in charts]}, indent=2)
