"""Data model and generators for slide-level cell collections.

A slide is a bag of cells, each cell a D-dimensional appearance feature
vector. Slides are grouped into datasets that can be loaded from a JSON
manifest plus per-slide CSV files, synthesized as composition-preserving
ensembles of existing slides, or generated from a planted Gaussian-mixture
spec whose two classes differ only in mixture weights.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSlideId,
    EmptyMask,
    InsufficientSlides,
    InvalidSpec,
    ParseError,
)


class ClassLabel(Enum):
    CLASS1 = 1
    CLASS2 = 2

    def other(self) -> "ClassLabel":
        return ClassLabel.CLASS2 if self is ClassLabel.CLASS1 else ClassLabel.CLASS1


def round_half_up(x: float) -> int:
    """Round with halves going up (0.5 -> 1), unlike banker's rounding."""
    return int(math.floor(x + 0.5))


@dataclass(eq=False)
class CellRecord:
    cell_id: str
    features: np.ndarray
    thumbnail_ref: str | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 1:
            raise DimensionMismatch(f"cell {self.cell_id}: features must be 1-D")
        if not np.all(np.isfinite(self.features)):
            raise ParseError(f"cell {self.cell_id}: non-finite feature value")

    def __eq__(self, other):
        if not isinstance(other, CellRecord):
            return NotImplemented
        return (
            self.cell_id == other.cell_id
            and self.thumbnail_ref == other.thumbnail_ref
            and np.array_equal(self.features, other.features)
        )


@dataclass(eq=False)
class Slide:
    slide_id: str
    patient_id: str
    label: ClassLabel | None
    cells: list[CellRecord]
    synthetic: bool = False

    def feature_matrix(self) -> np.ndarray:
        return np.stack([c.features for c in self.cells])

    def __len__(self):
        return len(self.cells)

    def __eq__(self, other):
        if not isinstance(other, Slide):
            return NotImplemented
        return (
            self.slide_id == other.slide_id
            and self.patient_id == other.patient_id
            and self.label == other.label
            and self.synthetic == other.synthetic
            and self.cells == other.cells
        )


@dataclass(eq=False)
class Dataset:
    slides: list[Slide]
    feature_dim: int

    def validate(self) -> "Dataset":
        seen = set()
        labels_present = set()
        for slide in self.slides:
            if slide.slide_id in seen:
                raise DuplicateSlideId(slide.slide_id)
            seen.add(slide.slide_id)
            if not slide.cells:
                raise ParseError(f"slide {slide.slide_id} has no cells")
            for cell in slide.cells:
                if cell.features.shape[0] != self.feature_dim:
                    raise DimensionMismatch(
                        f"slide {slide.slide_id} cell {cell.cell_id}: "
                        f"dim {cell.features.shape[0]} != {self.feature_dim}"
                    )
            if slide.label is not None:
                labels_present.add(slide.label)
        if labels_present and len(labels_present) < 2:
            raise ParseError("labeled dataset must contain both classes")
        return self

    def get_slide(self, slide_id: str) -> Slide:
        for slide in self.slides:
            if slide.slide_id == slide_id:
                return slide
        raise KeyError(slide_id)

    def slides_of_class(self, label: ClassLabel, synthetic_ok: bool = False) -> list[Slide]:
        return [
            s
            for s in self.slides
            if s.label == label and (synthetic_ok or not s.synthetic)
        ]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.feature_dim == other.feature_dim and self.slides == other.slides


@dataclass
class FeatureMap:
    values: np.ndarray  # H x W x D
    mask: np.ndarray  # H x W boolean


def masked_average_pool(fmap: FeatureMap) -> np.ndarray:
    """Per-channel mean of the feature map over the instance mask."""
    values = np.asarray(fmap.values, dtype=np.float64)
    mask = np.asarray(fmap.mask, dtype=bool)
    if values.ndim != 3 or mask.shape != values.shape[:2]:
        raise DimensionMismatch("feature map must be HxWxD with an HxW mask")
    if not mask.any():
        raise EmptyMask("mask selects no positions")
    if not np.all(np.isfinite(values)):
        raise ParseError("feature map contains non-finite values")
    return values[mask].mean(axis=0)


# ---------------------------------------------------------------------------
# Manifest + cells-file IO
#
# Manifest: {"slides": [{"slide_id", "patient_id", "label": 1|2|null,
# "cells_file"}]}. Cells file: CSV with header cell_id,f0,...,f{D-1}
# [,thumbnail], UTF-8, LF endings.
# ---------------------------------------------------------------------------


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Load a dataset from its JSON manifest, validating all invariants."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict) or "slides" not in manifest:
        raise ParseError("manifest must be an object with a 'slides' list")

    slides = []
    feature_dim = None
    for entry in manifest["slides"]:
        try:
            slide_id = entry["slide_id"]
            patient_id = entry["patient_id"]
            raw_label = entry["label"]
            cells_file = entry["cells_file"]
        except (TypeError, KeyError) as exc:
            raise ParseError(f"malformed manifest entry: {entry!r}") from exc
        if raw_label is None:
            label = None
        elif raw_label in (1, 2):
            label = ClassLabel(raw_label)
        else:
            raise ParseError(f"slide {slide_id}: label must be 1, 2 or null")
        cells, dim = _read_cells_file(manifest_path.parent / cells_file)
        if feature_dim is None:
            feature_dim = dim
        elif dim != feature_dim:
            raise DimensionMismatch(
                f"slide {slide_id}: dim {dim} != dataset dim {feature_dim}"
            )
        slides.append(
            Slide(
                slide_id=slide_id,
                patient_id=patient_id,
                label=label,
                cells=cells,
                synthetic=bool(entry.get("synthetic", False)),
            )
        )
    if feature_dim is None:
        raise ParseError("manifest lists no slides")
    return Dataset(slides=slides, feature_dim=feature_dim).validate()


def _read_cells_file(path: Path) -> tuple[list[CellRecord], int]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read cells file {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty cells file")
    header = rows[0]
    has_thumb = header and header[-1] == "thumbnail"
    ncols = len(header) - (1 if has_thumb else 0)
    dim = ncols - 1
    expected = ["cell_id"] + [f"f{i}" for i in range(dim)]
    if dim < 1 or header[:ncols] != expected:
        raise ParseError(f"{path}: bad header {header!r}")
    cells = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: row width {len(row)} != header {len(header)}")
        try:
            feats = np.array([float(v) for v in row[1 : dim + 1]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{path}: bad feature value in row {row!r}") from exc
        if not np.all(np.isfinite(feats)):
            raise ParseError(f"{path}: non-finite feature in row {row!r}")
        thumb = row[dim + 1] if has_thumb and row[dim + 1] else None
        cells.append(CellRecord(cell_id=row[0], features=feats, thumbnail_ref=thumb))
    if not cells:
        raise ParseError(f"{path}: no cell rows")
    return cells, dim


def _safe_name(slide_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", slide_id)


def save_dataset(dataset: Dataset, manifest_path: str | Path, cells_dir: str = "cells") -> Path:
    """Write manifest + per-slide CSVs; deterministic given the dataset."""
    manifest_path = Path(manifest_path)
    out_dir = manifest_path.parent / cells_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for slide in dataset.slides:
        rel = f"{cells_dir}/{_safe_name(slide.slide_id)}.csv"
        _write_cells_file(manifest_path.parent / rel, slide, dataset.feature_dim)
        entries.append(
            {
                "slide_id": slide.slide_id,
                "patient_id": slide.patient_id,
                "label": slide.label.value if slide.label is not None else None,
                "cells_file": rel,
                "synthetic": slide.synthetic,
            }
        )
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"slides": entries}, fh, indent=2)
        fh.write("\n")
    return manifest_path


def _write_cells_file(path: Path, slide: Slide, dim: int) -> None:
    has_thumb = any(c.thumbnail_ref for c in slide.cells)
    header = ["cell_id"] + [f"f{i}" for i in range(dim)]
    if has_thumb:
        header.append("thumbnail")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for cell in slide.cells:
            row = [cell.cell_id] + [repr(float(v)) for v in cell.features]
            if has_thumb:
                row.append(cell.thumbnail_ref or "")
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Ensemble slide synthesis
# ---------------------------------------------------------------------------


@dataclass
class SynthesisConfig:
    primary_fraction: float = 0.30
    other_fraction: float = 0.01
    count_per_class: int = 100
    seed: int = 0

    def validate(self):
        if not 0.0 < self.primary_fraction <= 1.0:
            raise InvalidSpec("primary_fraction must be in (0, 1]")
        if not 0.0 <= self.other_fraction < 1.0:
            raise InvalidSpec("other_fraction must be in [0, 1)")
        if self.count_per_class < 1:
            raise InvalidSpec("count_per_class must be positive")
        return self


def synthesize_ensemble(
    dataset: Dataset, label: ClassLabel, cfg: SynthesisConfig | None = None
) -> list[Slide]:
    """Build synthetic slides that keep one slide's main composition.

    Each synthetic slide takes round(primary_fraction * |base|) cells (at
    least 1) from a uniformly chosen base slide and round(other_fraction *
    |S|) cells from every other slide S of the same class, all sampled
    without replacement within their source slide.
    """
    cfg = (cfg or SynthesisConfig()).validate()
    sources = dataset.slides_of_class(label)
    if len(sources) < 2:
        raise InsufficientSlides(
            f"need >=2 real slides of {label} for ensemble synthesis, have {len(sources)}"
        )
    rng = np.random.default_rng(cfg.seed)
    out = []
    for i in range(cfg.count_per_class):
        base = sources[int(rng.integers(len(sources)))]
        n_base = max(1, round_half_up(cfg.primary_fraction * len(base)))
        idx = rng.choice(len(base), size=min(n_base, len(base)), replace=False)
        cells = [base.cells[int(j)] for j in idx]
        for other in sources:
            if other.slide_id == base.slide_id:
                continue
            n_other = round_half_up(cfg.other_fraction * len(other))
            if n_other == 0:
                continue
            idx = rng.choice(len(other), size=min(n_other, len(other)), replace=False)
            cells.extend(other.cells[int(j)] for j in idx)
        out.append(
            Slide(
                slide_id=f"{base.slide_id}-syn{i:03d}",
                patient_id=base.patient_id,
                label=label,
                cells=cells,
                synthetic=True,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Planted-composition generator (desk-scale oracle)
# ---------------------------------------------------------------------------


@dataclass
class PlantedSpec:
    """Gaussian-mixture data where classes differ only in mixture weights.

    Optionally injects round(noise_rate * cells_per_slide) extra background
    cells per slide (broad Gaussian around the component-mean centroid),
    emulating false-positive cell detections.
    """

    feature_dim: int
    component_means: list[np.ndarray]
    component_covs: list[np.ndarray]
    class_weights: dict[ClassLabel, np.ndarray]
    slides_per_class: int = 25
    cells_per_slide: int = 400
    noise_rate: float = 0.0
    noise_scale: float = 2.5

    def validate(self) -> "PlantedSpec":
        if self.feature_dim < 1:
            raise InvalidSpec("feature_dim must be positive")
        if self.slides_per_class < 1 or self.cells_per_slide < 1:
            raise InvalidSpec("slides_per_class and cells_per_slide must be positive")
        if not 0.0 <= self.noise_rate < 1.0:
            raise InvalidSpec("noise_rate must be in [0, 1)")
        k = len(self.component_means)
        if k == 0 or len(self.component_covs) != k:
            raise InvalidSpec("need matching component means and covariances")
        for mean, cov in zip(self.component_means, self.component_covs):
            mean = np.asarray(mean, dtype=np.float64)
            cov = np.asarray(cov, dtype=np.float64)
            if mean.shape != (self.feature_dim,):
                raise InvalidSpec("component mean has wrong dimension")
            if cov.shape != (self.feature_dim, self.feature_dim):
                raise InvalidSpec("component covariance has wrong shape")
            if not np.allclose(cov, cov.T):
                raise InvalidSpec("component covariance not symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-10:
                raise InvalidSpec("component covariance not PSD")
        for label in (ClassLabel.CLASS1, ClassLabel.CLASS2):
            if label not in self.class_weights:
                raise InvalidSpec(f"missing weights for {label}")
            w = np.asarray(self.class_weights[label], dtype=np.float64)
            if w.shape != (k,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise InvalidSpec(f"weights for {label} must be a length-{k} distribution")
        return self

    @classmethod
    def two_component(
        cls,
        feature_dim: int = 8,
        separation: float = 6.0,
        weights_class1=(0.8, 0.2),
        weights_class2=(0.2, 0.8),
        slides_per_class: int = 25,
        cells_per_slide: int = 400,
        noise_rate: float = 0.0,
    ) -> "PlantedSpec":
        """Two well-separated unit-covariance components along axis 0."""
        m0 = np.zeros(feature_dim)
        m1 = np.zeros(feature_dim)
        m1[0] = separation
        eye = np.eye(feature_dim)
        return cls(
            feature_dim=feature_dim,
            component_means=[m0, m1],
            component_covs=[eye, eye.copy()],
            class_weights={
                ClassLabel.CLASS1: np.asarray(weights_class1, dtype=np.float64),
                ClassLabel.CLASS2: np.asarray(weights_class2, dtype=np.float64),
            },
            slides_per_class=slides_per_class,
            cells_per_slide=cells_per_slide,
            noise_rate=noise_rate,
        ).validate()

    def to_json(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "component_means": [np.asarray(m).tolist() for m in self.component_means],
            "component_covs": [np.asarray(c).tolist() for c in self.component_covs],
            "class_weights": {
                str(label.value): np.asarray(w).tolist()
                for label, w in sorted(self.class_weights.items(), key=lambda kv: kv[0].value)
            },
            "slides_per_class": self.slides_per_class,
            "cells_per_slide": self.cells_per_slide,
            "noise_rate": self.noise_rate,
            "noise_scale": self.noise_scale,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PlantedSpec":
        try:
            return cls(
                feature_dim=int(doc["feature_dim"]),
                component_means=[np.asarray(m, dtype=np.float64) for m in doc["component_means"]],
                component_covs=[np.asarray(c, dtype=np.float64) for c in doc["component_covs"]],
                class_weights={
                    ClassLabel(int(k)): np.asarray(w, dtype=np.float64)
                    for k, w in doc["class_weights"].items()
                },
                slides_per_class=int(doc.get("slides_per_class", 25)),
                cells_per_slide=int(doc.get("cells_per_slide", 400)),
                noise_rate=float(doc.get("noise_rate", 0.0)),
                noise_scale=float(doc.get("noise_scale", 2.5)),
            ).validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed planted spec: {exc}") from exc


def generate_planted_dataset(spec: PlantedSpec, seed: int) -> Dataset:
    """Sample a labeled two-class dataset from a planted mixture spec."""
    spec.validate()
    rng = np.random.default_rng(seed)
    means = np.stack([np.asarray(m, dtype=np.float64) for m in spec.component_means])
    factors = []
    for cov in spec.component_covs:
        vals, vecs = np.linalg.eigh(np.asarray(cov, dtype=np.float64))
        factors.append(vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))))
    factors = np.stack(factors)
    noise_mean = means.mean(axis=0)
    avg_var = float(np.mean([np.trace(c) / spec.feature_dim for c in spec.component_covs]))
    noise_std = spec.noise_scale * math.sqrt(max(avg_var, 1e-12))
    n_noise = round_half_up(spec.noise_rate * spec.cells_per_slide)

    slides = []
    for label in (ClassLabel.CLASS1, ClassLabel.CLASS2):
        weights = np.asarray(spec.class_weights[label], dtype=np.float64)
        for i in range(spec.slides_per_class):
            slide_id = f"s{label.value}-{i:03d}"
            comp = rng.choice(len(means), size=spec.cells_per_slide, p=weights)
            z = rng.standard_normal((spec.cells_per_slide, spec.feature_dim))
            feats = means[comp] + np.einsum("ndk,nk->nd", factors[comp], z)
            if n_noise:
                extra = noise_mean + noise_std * rng.standard_normal(
                    (n_noise, spec.feature_dim)
                )
                feats = np.vstack([feats, extra])
            cells = [
                CellRecord(cell_id=f"{slide_id}-c{j:04d}", features=feats[j])
                for j in range(feats.shape[0])
            ]
            slides.append(
                Slide(
                    slide_id=slide_id,
                    patient_id=f"p{label.value}-{i:03d}",
                    label=label,
                    cells=cells,
                )
            )
    return Dataset(slides=slides, feature_dim=spec.feature_dim).validate()
