"""Circular distortion and 12-sector density charts.

Distorts a fitted embedding into the unit disc, shows that reference cells
never leave it, and prints the per-sector densities plus a few of the 66
pairwise ratios that make up the 78-variable classifier input.
"""

import numpy as np

from cytorules.chart import (
    density_chart,
    distort,
    feature_vector,
    fit_distortion,
    variable_index,
)

rng = np.random.default_rng(2)
# an uneven cloud: dense lobe to the right, sparse tail up-left
cloud = np.vstack([
    rng.normal(loc=[3.0, 0.0], scale=0.8, size=(300, 2)),
    rng.normal(loc=[-2.0, 2.0], scale=1.5, size=(80, 2)),
])

params = fit_distortion(cloud)
polar = distort(params, cloud)
print(f"origin {np.round(params.origin, 2)}; max distorted radius {polar[:, 0].max():.3f}")

chart = density_chart(polar, "demo-slide")
for i, d in enumerate(chart.densities, start=1):
    bar = "#" * int(round(d * 60))
    print(f"  D{i:<2} {d:.3f} {bar}")

vec = feature_vector(chart)
print(f"\nfeature vector length: {len(vec)}")
for name in ("D6/D11", "D1/D7", "D3/D9"):
    print(f"  {name} = {vec[variable_index(name)]:.2f}")

# a far-away point is projected to the rim, angle preserved
outside = params.origin + np.array([[40.0, 40.0]])
r, theta = distort(params, outside)[0]
print(f"\nfar point -> r={r:.1f} at theta={theta:.2f} rad (nearest-region projection)")
