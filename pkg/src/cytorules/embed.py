"""2D neighbor embedding of cell features with out-of-sample transform.

The embedding is fit on cells from reference slides of one class: a kNN
graph with locally adaptive exponential weights is symmetrized into a fuzzy
neighborhood graph, initialized by spectral layout, and optimized by
stochastic gradient descent with negative sampling on the usual attractive/
repulsive cross-entropy objective. New cells are placed at the kernel-
weighted average of their nearest training cells' coordinates, so the
fitted space is frozen and transforms are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components

from .chart import DistortionParams
from .dataset import ClassLabel, Dataset
from .errors import DimensionMismatch, NotEnoughReferenceSlides, NotFitted, TooFewPoints

SMOOTH_TOLERANCE = 1e-8
GRAD_CLIP = 4.0
REPULSION_EPS = 1e-3


@dataclass
class EmbeddingConfig:
    n_neighbors: int = 15
    n_epochs: int = 200
    min_dist: float = 0.1
    learning_rate: float = 1.0
    seed: int = 0
    reference_class: ClassLabel = ClassLabel.CLASS1
    reference_slide_count: int | None = None  # None = all reference-class slides
    negative_sample_rate: int = 5

    def to_json(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "n_epochs": self.n_epochs,
            "min_dist": self.min_dist,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "reference_class": self.reference_class.value,
            "reference_slide_count": self.reference_slide_count,
            "negative_sample_rate": self.negative_sample_rate,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EmbeddingConfig":
        doc = dict(doc)
        doc["reference_class"] = ClassLabel(doc["reference_class"])
        return cls(**doc)


@dataclass
class EmbeddingModel:
    train_features: np.ndarray  # N x D
    train_coords: np.ndarray  # N x 2
    graph: sp.csr_matrix  # symmetric weights in [0, 1], no self-edges
    config: EmbeddingConfig
    rho: np.ndarray  # per-point nearest-neighbor distance
    sigma: np.ndarray  # per-point kernel bandwidth
    fitted: bool = True


def pairwise_sq_dists(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances via the GEMM expansion, clipped at 0."""
    q2 = (queries * queries).sum(axis=1)[:, None]
    t2 = (targets * targets).sum(axis=1)[None, :]
    d2 = q2 + t2 - 2.0 * (queries @ targets.T)
    return np.maximum(d2, 0.0)


def _knn_search(queries, targets, k, exclude_self=False, chunk=512):
    """k nearest targets per query, sorted by (distance, index)."""
    n_q = queries.shape[0]
    indices = np.empty((n_q, k), dtype=np.int64)
    dists = np.empty((n_q, k), dtype=np.float64)
    for start in range(0, n_q, chunk):
        stop = min(start + chunk, n_q)
        d2 = pairwise_sq_dists(queries[start:stop], targets)
        if exclude_self:
            rows = np.arange(start, stop)
            d2[np.arange(stop - start), rows] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        part_d = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, part_d), axis=1)
        indices[start:stop] = np.take_along_axis(part, order, axis=1)
        dists[start:stop] = np.sqrt(np.take_along_axis(part_d, order, axis=1))
    return indices, dists


def smooth_neighbor_weights(dists: np.ndarray, k: int, n_iter: int = 64):
    """Per-point kernel calibration.

    rho is the nearest-neighbor distance; sigma is bisected so that the
    row-sum of exp(-max(0, d - rho) / sigma) equals log2(k). The bisection
    runs vectorized over all points.
    """
    n = dists.shape[0]
    rho = dists[:, 0].copy()
    target = np.log2(k)
    gaps = np.maximum(dists - rho[:, None], 0.0)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    for _ in range(n_iter):
        psum = np.exp(-gaps / np.maximum(mid[:, None], 1e-300)).sum(axis=1)
        done = np.abs(psum - target) < SMOOTH_TOLERANCE
        too_big = (psum > target) & ~done
        too_small = ~(too_big | done)
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_small, mid, lo)
        mid_new = np.where(np.isinf(hi), mid * 2.0, (lo + hi) / 2.0)
        mid = np.where(done, mid, mid_new)
    sigma = np.maximum(mid, 1e-12)
    weights = np.exp(-gaps / sigma[:, None])
    return rho, sigma, weights


def knn_graph(features: np.ndarray, k: int) -> sp.csr_matrix:
    """Symmetric fuzzy kNN graph with weights in [0, 1] and no self-edges."""
    graph, _, _ = _knn_graph_full(features, k)
    return graph


def _knn_graph_full(features, k):
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n <= k:
        raise TooFewPoints(f"need more than k={k} points, have {n}")
    indices, dists = _knn_search(features, features, k, exclude_self=True)
    rho, sigma, weights = smooth_neighbor_weights(dists, k)
    rows = np.repeat(np.arange(n), k)
    w = sp.coo_matrix((weights.ravel(), (rows, indices.ravel())), shape=(n, n)).tocsr()
    w.setdiag(0.0)
    w.eliminate_zeros()
    sym = w + w.T - w.multiply(w.T)
    sym = sym.tocsr()
    sym.setdiag(0.0)
    sym.eliminate_zeros()
    return sym, rho, sigma


@lru_cache(maxsize=8)
def curve_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Fit (a, b) of the low-dimensional kernel 1/(1 + a d^(2b)) so it
    matches an exponential falloff starting at min_dist."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xs = np.linspace(0, spread * 3, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xs, ys)
    return float(a), float(b)


def _spectral_init(graph: sp.csr_matrix, rng: np.random.Generator) -> np.ndarray | None:
    n = graph.shape[0]
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        return None
    deg = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-12))
    lap = sp.identity(n) - sp.diags(inv_sqrt) @ graph @ sp.diags(inv_sqrt)
    try:
        vals, vecs = sp.linalg.eigsh(
            lap.tocsc(), k=3, which="SM", v0=np.ones(n), maxiter=n * 5, tol=1e-4
        )
    except Exception:
        return None
    order = np.argsort(vals)
    coords = vecs[:, order[1:3]]
    scale = np.abs(coords).max()
    if not np.isfinite(scale) or scale == 0:
        return None
    coords = coords / scale * 10.0
    return coords + rng.normal(0.0, 1e-4, size=coords.shape)


def _sgd_layout(coords, graph, cfg: EmbeddingConfig, rng, frozen_mask=None):
    """Epoch-synchronous SGD on the attractive/repulsive layout objective.

    Edges are revisited with frequency proportional to their weight, each
    attraction followed by negative_sample_rate uniform repulsions of the
    edge head. Updates within an epoch are accumulated and applied at once,
    which keeps the procedure deterministic for a fixed seed.
    """
    a, b = curve_params(cfg.min_dist)
    coo = sp.triu(graph, k=1).tocoo()
    heads = np.concatenate([coo.row, coo.col])
    tails = np.concatenate([coo.col, coo.row])
    w = np.concatenate([coo.data, coo.data])
    if w.size == 0:
        return coords
    n = coords.shape[0]
    epochs_per_sample = w.max() / w
    next_sample = epochs_per_sample.copy()
    movable = np.ones(n) if frozen_mask is None else (~frozen_mask).astype(np.float64)

    for epoch in range(cfg.n_epochs):
        alpha = cfg.learning_rate * (1.0 - epoch / cfg.n_epochs)
        active = next_sample <= epoch + 1.0
        if not active.any():
            continue
        next_sample[active] += epochs_per_sample[active]
        h, t = heads[active], tails[active]

        diff = coords[h] - coords[t]
        u = np.einsum("ij,ij->i", diff, diff)
        powu = u**b
        with np.errstate(divide="ignore", invalid="ignore"):
            att = (-2.0 * a * b) * powu / (u * (1.0 + a * powu))
        att = np.where(u > 0, att, 0.0)
        disp = np.clip(att[:, None] * diff, -GRAD_CLIP, GRAD_CLIP) * alpha
        delta = np.zeros_like(coords)
        for dim in range(2):
            delta[:, dim] += np.bincount(h, weights=disp[:, dim], minlength=n)
            delta[:, dim] -= np.bincount(t, weights=disp[:, dim], minlength=n)

        n_neg = cfg.negative_sample_rate
        hn = np.repeat(h, n_neg)
        tn = rng.integers(0, n, size=hn.size)
        keep = hn != tn
        hn, tn = hn[keep], tn[keep]
        diff = coords[hn] - coords[tn]
        u = np.einsum("ij,ij->i", diff, diff)
        rep = (2.0 * b) / ((REPULSION_EPS + u) * (1.0 + a * u**b))
        disp = np.clip(rep[:, None] * diff, -GRAD_CLIP, GRAD_CLIP) * alpha
        disp[u == 0] = 0.0
        for dim in range(2):
            delta[:, dim] += np.bincount(hn, weights=disp[:, dim], minlength=n)

        coords = coords + delta * movable[:, None]
    return coords


def fit_embedding_matrix(features: np.ndarray, cfg: EmbeddingConfig) -> EmbeddingModel:
    """Fit the 2D embedding on a raw feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n <= cfg.n_neighbors:
        raise TooFewPoints(
            f"n_neighbors={cfg.n_neighbors} requires more than that many cells, have {n}"
        )
    rng = np.random.default_rng(cfg.seed)
    graph, rho, sigma = _knn_graph_full(features, cfg.n_neighbors)

    coords = None
    if n >= 2 * cfg.n_neighbors:
        coords = _spectral_init(graph, rng)
    if coords is None:
        coords = rng.uniform(-10.0, 10.0, size=(n, 2))
    coords = _sgd_layout(np.asarray(coords, dtype=np.float64), graph, cfg, rng)
    if not np.all(np.isfinite(coords)):
        raise FloatingPointError("layout produced non-finite coordinates")
    return EmbeddingModel(
        train_features=features,
        train_coords=coords,
        graph=graph,
        config=cfg,
        rho=rho,
        sigma=sigma,
    )


def fit_embedding(dataset: Dataset, cfg: EmbeddingConfig) -> EmbeddingModel:
    """Fit the embedding on cells from reference-class slides."""
    reference = dataset.slides_of_class(cfg.reference_class)
    if cfg.reference_slide_count is not None:
        reference = reference[: cfg.reference_slide_count]
    if not reference:
        raise NotEnoughReferenceSlides(f"no slides of {cfg.reference_class}")
    features = np.vstack([s.feature_matrix() for s in reference])
    return fit_embedding_matrix(features, cfg)


def transform_points(
    model: EmbeddingModel, features: np.ndarray, refine_epochs: int = 0
) -> np.ndarray:
    """Place new points at the kernel-weighted average of their nearest
    training cells' coordinates; optional refinement epochs follow."""
    if not model.fitted:
        raise NotFitted("embedding model is not fitted")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.train_features.shape[1]:
        raise DimensionMismatch(
            f"expected M x {model.train_features.shape[1]} features, got {features.shape}"
        )
    if features.shape[0] == 0:
        return np.zeros((0, 2))
    k = model.config.n_neighbors
    indices, dists = _knn_search(features, model.train_features, k)
    gaps = np.maximum(dists - model.rho[indices], 0.0)
    weights = np.exp(-gaps / model.sigma[indices])
    weights /= weights.sum(axis=1, keepdims=True)
    coords = np.einsum("mk,mkd->md", weights, model.train_coords[indices])

    if refine_epochs > 0:
        n_train = model.train_coords.shape[0]
        m = features.shape[0]
        rows = np.repeat(np.arange(m), k) + n_train
        cols = indices.ravel()
        graph = sp.coo_matrix(
            (weights.ravel(), (rows, cols)), shape=(n_train + m, n_train + m)
        ).tocsr()
        graph = graph + graph.T
        all_coords = np.vstack([model.train_coords, coords])
        frozen = np.zeros(n_train + m, dtype=bool)
        frozen[:n_train] = True
        cfg = replace(model.config, n_epochs=refine_epochs)
        rng = np.random.default_rng(model.config.seed + 1)
        coords = _sgd_layout(all_coords, graph, cfg, rng, frozen_mask=frozen)[n_train:]
    return coords


def layout_objective(coords, graph, negative_pairs, min_dist=0.1):
    """Attractive + repulsive cross-entropy objective on explicit pairs."""
    a, b = curve_params(min_dist)
    coords = np.asarray(coords, dtype=np.float64)
    coo = sp.triu(graph, k=1).tocoo()
    diff = coords[coo.row] - coords[coo.col]
    u = (diff * diff).sum(axis=1)
    total = float((coo.data * np.log1p(a * u**b)).sum())
    for i, j in negative_pairs:
        u = float(((coords[i] - coords[j]) ** 2).sum())
        v = u + REPULSION_EPS
        total += float(np.log1p(v ** (-b) / a))
    return total


def layout_gradient(coords, graph, negative_pairs, min_dist=0.1):
    """Analytic per-point gradient of layout_objective."""
    a, b = curve_params(min_dist)
    coords = np.asarray(coords, dtype=np.float64)
    grad = np.zeros_like(coords)
    coo = sp.triu(graph, k=1).tocoo()
    diff = coords[coo.row] - coords[coo.col]
    u = (diff * diff).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dattr = coo.data * (a * b * u ** (b - 1.0)) / (1.0 + a * u**b)
    dattr = np.where(u > 0, dattr, 0.0)
    contrib = 2.0 * dattr[:, None] * diff
    for dim in range(2):
        grad[:, dim] += np.bincount(coo.row, weights=contrib[:, dim], minlength=coords.shape[0])
        grad[:, dim] -= np.bincount(coo.col, weights=contrib[:, dim], minlength=coords.shape[0])
    for i, j in negative_pairs:
        d = coords[i] - coords[j]
        v = float((d * d).sum()) + REPULSION_EPS
        drep = -b / (v * (1.0 + a * v**b))
        grad[i] += 2.0 * drep * d
        grad[j] -= 2.0 * drep * d
    return grad


# ---------------------------------------------------------------------------
# Serialization: one JSON document, optionally carrying distortion params
# ---------------------------------------------------------------------------


def model_to_json(model: EmbeddingModel, distortion: DistortionParams | None = None) -> dict:
    coo = model.graph.tocoo()
    doc = {
        "config": model.config.to_json(),
        "train_features": model.train_features.tolist(),
        "train_coords": model.train_coords.tolist(),
        "rho": model.rho.tolist(),
        "sigma": model.sigma.tolist(),
        "graph": {
            "shape": list(model.graph.shape),
            "row": coo.row.tolist(),
            "col": coo.col.tolist(),
            "data": coo.data.tolist(),
        },
    }
    if distortion is not None:
        doc["distortion"] = distortion.to_json()
    return doc


def model_from_json(doc: dict) -> tuple[EmbeddingModel, DistortionParams | None]:
    g = doc["graph"]
    graph = sp.coo_matrix(
        (np.asarray(g["data"]), (np.asarray(g["row"]), np.asarray(g["col"]))),
        shape=tuple(g["shape"]),
    ).tocsr()
    model = EmbeddingModel(
        train_features=np.asarray(doc["train_features"], dtype=np.float64),
        train_coords=np.asarray(doc["train_coords"], dtype=np.float64),
        graph=graph,
        config=EmbeddingConfig.from_json(doc["config"]),
        rho=np.asarray(doc["rho"], dtype=np.float64),
        sigma=np.asarray(doc["sigma"], dtype=np.float64),
    )
    distortion = None
    if "distortion" in doc:
        distortion = DistortionParams.from_json(doc["distortion"])
    return model, distortion


def save_model(model: EmbeddingModel, path: str | Path, distortion=None) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_json(model, distortion), fh)
        fh.write("\n")
    return path


def load_model(path: str | Path) -> tuple[EmbeddingModel, DistortionParams | None]:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
