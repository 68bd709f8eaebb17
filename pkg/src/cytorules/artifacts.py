"""Fit a deployable pipeline on a whole dataset and serialize it.

Unlike the split harness, this is the deployment path: the embedding is fit
on all reference-class slides, every slide (reference included) is then
placed through the frozen transform, and the rule set is learned on all
labeled slides. The resulting directory is what the HTTP facade serves.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import brs, chart, embed
from .dataset import ClassLabel, Dataset, save_dataset
from .errors import DegenerateLabels


def slide_feature_table(dataset: Dataset, model, distortion):
    """Per-slide density charts and 78-vectors under the frozen transform."""
    charts, vectors = {}, {}
    for slide in dataset.slides:
        placed = embed.transform_points(model, slide.feature_matrix())
        polar = chart.distort(distortion, placed)
        charts[slide.slide_id] = chart.density_chart(polar, slide.slide_id)
        vectors[slide.slide_id] = chart.feature_vector(charts[slide.slide_id])
    return charts, vectors


def build_artifacts(
    dataset: Dataset,
    out_dir: str | Path,
    embedding_cfg: embed.EmbeddingConfig | None = None,
    prior: brs.BrsPrior | None = None,
    schedule: brs.SaSchedule | None = None,
    positive_class: ClassLabel = ClassLabel.CLASS2,
) -> Path:
    """Fit embedding + distortion + rule set and write the artifacts dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    embedding_cfg = embedding_cfg or embed.EmbeddingConfig()

    model = embed.fit_embedding(dataset, embedding_cfg)
    distortion = chart.fit_distortion(model.train_coords)
    charts, vectors = slide_feature_table(dataset, model, distortion)

    labeled = [s for s in dataset.slides if s.label is not None]
    if not labeled:
        raise DegenerateLabels("cannot learn a rule set without labels")
    x = np.vstack([vectors[s.slide_id] for s in labeled])
    y = np.array([1.0 if s.label == positive_class else 0.0 for s in labeled])
    ruleset = brs.learn(x, y, prior=prior, schedule=schedule, positive_class=positive_class)

    save_dataset(dataset, out_dir / "manifest.json")
    embed.save_model(model, out_dir / "embedding.json", distortion)
    with open(out_dir / "ruleset.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(ruleset.to_json(), fh, indent=2)
        fh.write("\n")
    with open(out_dir / "charts.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(chart.charts_to_csv([charts[s.slide_id] for s in dataset.slides]))
    return out_dir
