"""Fit the 2D cell embedding and place held-out cells into it.

Two Gaussian blobs stand in for two cell appearance families; the fitted
layout keeps them apart, and the frozen transform drops new cells near
their own family. Writes embedding.png when matplotlib is available.
"""

import numpy as np

from cytorules.embed import EmbeddingConfig, fit_embedding_matrix, transform_points

rng = np.random.default_rng(1)
blob_a = rng.normal(size=(150, 8))
blob_b = rng.normal(size=(150, 8))
blob_b[:, 0] += 9.0

model = fit_embedding_matrix(np.vstack([blob_a, blob_b]), EmbeddingConfig(seed=1))
coords = model.train_coords
center_a, center_b = coords[:150].mean(axis=0), coords[150:].mean(axis=0)
print(f"fitted {coords.shape[0]} cells; blob centers {np.round(center_a, 2)} vs {np.round(center_b, 2)}")
print(f"inter-center distance: {np.linalg.norm(center_a - center_b):.2f}")

held_out = rng.normal(size=(40, 8))  # drawn from blob A's distribution
placed = transform_points(model, held_out)
nearer_a = np.mean(
    np.linalg.norm(placed - center_a, axis=1) < np.linalg.norm(placed - center_b, axis=1)
)
print(f"held-out cells placed nearer their own blob: {nearer_a:.0%}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(coords[:150, 0], coords[:150, 1], s=8, label="family A")
    ax.scatter(coords[150:, 0], coords[150:, 1], s=8, label="family B")
    ax.scatter(placed[:, 0], placed[:, 1], s=24, marker="x", label="held-out")
    ax.legend()
    ax.set_title("cell embedding with out-of-sample transform")
    fig.savefig("embedding.png", dpi=120)
    print("wrote embedding.png")
except ImportError:
    pass
