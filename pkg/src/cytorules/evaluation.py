"""Experiment harness: patient-level splits and repeated evaluations.

Every split refits the embedding, the distortion, the threshold candidates
and the baseline standardizers on training slides only, so no test-slide
cell ever enters a fitted statistic. An optional audit trail records which
slides fed each fitted stage, which the leakage tests assert on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, brs, chart, embed
from .dataset import ClassLabel, Dataset, Slide, round_half_up, synthesize_ensemble, SynthesisConfig
from .errors import NotEnoughReferenceSlides, TooFewPatients

METHODS = ("rule_set", "lr", "svm", "mlp")


@dataclass
class SplitConfig:
    train_fraction: float = 0.8
    repeats: int = 100
    seed: int = 0
    use_ensemble: bool = True
    embedding_reference_class: ClassLabel = ClassLabel.CLASS1


@dataclass
class PipelineConfig:
    embedding: embed.EmbeddingConfig = field(default_factory=embed.EmbeddingConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    prior: brs.BrsPrior = field(default_factory=brs.BrsPrior)
    schedule: brs.SaSchedule = field(default_factory=brs.SaSchedule)
    baseline: baselines.BaselineConfig = field(default_factory=baselines.BaselineConfig)
    use_ensemble: bool = True
    positive_class: ClassLabel = ClassLabel.CLASS2
    max_rule_len: int = 2
    ratio_epsilon: float = chart.DEFAULT_RATIO_EPSILON


class AuditTrail:
    """Records the slide ids feeding every fitted statistic."""

    def __init__(self):
        self.events: list[tuple[str, tuple[str, ...]]] = []

    def record(self, stage: str, slide_ids) -> None:
        self.events.append((stage, tuple(slide_ids)))

    def slides_used(self) -> set[str]:
        used = set()
        for _, ids in self.events:
            used.update(ids)
        return used


@dataclass
class SplitResult:
    accuracies: dict[str, float]
    rule_count: int
    ruleset: brs.RuleSet
    n_train: int
    n_test: int

    def to_json(self) -> dict:
        return {
            "accuracies": self.accuracies,
            "rule_count": self.rule_count,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def patient_level_split(dataset: Dataset, fraction: float, seed: int):
    """Partition slide ids with all of a patient's slides on one side.

    Patients are stratified by the label of their first slide and split per
    stratum to approximate the fraction. Synthetic slides follow their
    patient into the training side and never enter the test side.
    """
    real = [s for s in dataset.slides if not s.synthetic and s.label is not None]
    if not real:
        raise TooFewPatients("no labeled real slides to split")
    patient_slides: dict[str, list[Slide]] = {}
    patient_order: list[str] = []
    for slide in real:
        if slide.patient_id not in patient_slides:
            patient_slides[slide.patient_id] = []
            patient_order.append(slide.patient_id)
        patient_slides[slide.patient_id].append(slide)

    rng = np.random.default_rng(seed)
    train_patients, test_patients = set(), set()
    for label in (ClassLabel.CLASS1, ClassLabel.CLASS2):
        stratum = [p for p in patient_order if patient_slides[p][0].label == label]
        if len(stratum) < 2:
            raise TooFewPatients(f"stratum {label} has {len(stratum)} patients, need >=2")
        n_train = min(max(round_half_up(fraction * len(stratum)), 1), len(stratum) - 1)
        order = rng.permutation(len(stratum))
        for pos in order[:n_train]:
            train_patients.add(stratum[pos])
        for pos in order[n_train:]:
            test_patients.add(stratum[pos])

    train_ids, test_ids = [], []
    for slide in dataset.slides:
        owner = slide.patient_id
        if slide.synthetic:
            if owner in train_patients:
                train_ids.append(slide.slide_id)
            continue  # synthetic slides never reach the test side
        if owner in train_patients:
            train_ids.append(slide.slide_id)
        elif owner in test_patients:
            test_ids.append(slide.slide_id)
    return train_ids, test_ids


def _labels_to_binary(slides, positive_class) -> np.ndarray:
    return np.array([1.0 if s.label == positive_class else 0.0 for s in slides])


def run_pipeline_once(
    dataset: Dataset,
    split: tuple[list[str], list[str]],
    config: PipelineConfig | None = None,
    audit: AuditTrail | None = None,
) -> SplitResult:
    """Fit embedding/distortion/classifiers on the train side, score test."""
    config = config or PipelineConfig()
    train_ids, test_ids = split
    train_slides = [dataset.get_slide(i) for i in train_ids]
    test_slides = [dataset.get_slide(i) for i in test_ids]

    ref_class = config.embedding.reference_class
    reference = [s for s in train_slides if s.label == ref_class and not s.synthetic]
    if config.embedding.reference_slide_count is not None:
        reference = reference[: config.embedding.reference_slide_count]
    if not reference:
        raise NotEnoughReferenceSlides(f"no training slides of {ref_class}")
    ref_ids = [s.slide_id for s in reference]
    ref_features = np.vstack([s.feature_matrix() for s in reference])
    model = embed.fit_embedding_matrix(ref_features, config.embedding)
    if audit is not None:
        audit.record("embedding_fit", ref_ids)

    params = chart.fit_distortion(model.train_coords)
    if audit is not None:
        audit.record("distortion_fit", ref_ids)

    synthetic: list[Slide] = []
    if config.use_ensemble:
        train_dataset = Dataset(slides=list(train_slides), feature_dim=dataset.feature_dim)
        for label in (ClassLabel.CLASS1, ClassLabel.CLASS2):
            cfg = replace(config.synthesis, seed=config.synthesis.seed + label.value)
            synthetic.extend(synthesize_ensemble(train_dataset, label, cfg))
            if audit is not None:
                audit.record(
                    "ensemble_sources",
                    [s.slide_id for s in train_slides if s.label == label and not s.synthetic],
                )

    # Embed each real slide's cells once; reference slides keep their fitted
    # coordinates, all others are transformed into the frozen space.
    coords_by_cell: dict[int, np.ndarray] = {}
    offset = 0
    for slide in reference:
        for cell in slide.cells:
            coords_by_cell[id(cell)] = model.train_coords[offset]
            offset += 1
    ref_id_set = set(ref_ids)
    others = [s for s in train_slides + test_slides if s.slide_id not in ref_id_set]
    if others:
        stacked = np.vstack([s.feature_matrix() for s in others])
        transformed = embed.transform_points(model, stacked)
        offset = 0
        for slide in others:
            for cell in slide.cells:
                coords_by_cell[id(cell)] = transformed[offset]
                offset += 1

    def slide_vector(slide: Slide) -> np.ndarray:
        points = np.vstack([coords_by_cell[id(c)] for c in slide.cells])
        polar = chart.distort(params, points)
        return chart.feature_vector(
            chart.density_chart(polar, slide.slide_id), config.ratio_epsilon
        )

    fit_slides = train_slides + synthetic
    x_train = np.vstack([slide_vector(s) for s in fit_slides])
    y_train = _labels_to_binary(fit_slides, config.positive_class)
    x_test = np.vstack([slide_vector(s) for s in test_slides])
    y_test = _labels_to_binary(test_slides, config.positive_class)
    train_source_ids = [s.slide_id for s in fit_slides]
    if audit is not None:
        audit.record("threshold_candidates", train_source_ids)
        audit.record("standardizer_fit", train_source_ids)

    ruleset = brs.learn(
        x_train,
        y_train,
        prior=config.prior,
        schedule=config.schedule,
        max_len=config.max_rule_len,
        positive_class=config.positive_class,
    )
    covered = np.zeros(x_test.shape[0], dtype=bool)
    for rule in ruleset.rules:
        covered |= rule.holds(x_test)
    accuracies = {"rule_set": float(np.mean(covered.astype(float) == y_test))}

    lr = baselines.train_logistic(x_train, y_train, config.baseline)
    svm = baselines.train_linear_svm(x_train, y_train, config.baseline)
    mlp = baselines.train_mlp(x_train, y_train, config.baseline)
    for name, mdl in (("lr", lr), ("svm", svm), ("mlp", mlp)):
        pred = baselines.predict_baseline(mdl, x_test)
        accuracies[name] = float(np.mean(pred == y_test))

    return SplitResult(
        accuracies=accuracies,
        rule_count=len(ruleset.rules),
        ruleset=ruleset,
        n_train=len(fit_slides),
        n_test=len(test_slides),
    )


@dataclass
class Report:
    methods: dict[str, dict]
    per_split: list[dict]
    repeats: int
    seed: int

    def to_json(self) -> dict:
        return {
            "methods": self.methods,
            "per_split": self.per_split,
            "repeats": self.repeats,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Report":
        return cls(
            methods=doc["methods"],
            per_split=doc["per_split"],
            repeats=int(doc["repeats"]),
            seed=int(doc["seed"]),
        )

    def render_table(self) -> str:
        lines = [f"{'method':<10} {'accuracy':>20} {'# of rules':>16}"]
        for name in METHODS:
            stats = self.methods[name]
            acc = f"{100 * stats['mean_accuracy']:.2f} +/- {100 * stats['std']:.2f}%"
            nrules = (
                f"{stats['mean_rule_count']:.2f}" if stats.get("mean_rule_count") is not None else "N/A"
            )
            lines.append(f"{name:<10} {acc:>20} {nrules:>16}")
        return "\n".join(lines)


def run_experiment(
    dataset: Dataset,
    split_config: SplitConfig | None = None,
    pipeline_config: PipelineConfig | None = None,
) -> Report:
    """Repeat patient-level splits and aggregate per-method statistics.

    The 95% interval uses the normal approximation mean +/- 1.96 * sd; one
    repeat yields a degenerate interval at its single accuracy.
    """
    split_config = split_config or SplitConfig()
    base_pipeline = pipeline_config or PipelineConfig()
    if split_config.repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = np.random.SeedSequence(split_config.seed).generate_state(split_config.repeats)

    per_split = []
    for i, split_seed in enumerate(seeds):
        split_seed = int(split_seed)
        split = patient_level_split(dataset, split_config.train_fraction, split_seed)
        cfg = replace(
            base_pipeline,
            embedding=replace(
                base_pipeline.embedding,
                seed=split_seed + 1,
                reference_class=split_config.embedding_reference_class,
            ),
            synthesis=replace(base_pipeline.synthesis, seed=split_seed + 2),
            schedule=replace(base_pipeline.schedule, seed=split_seed + 3),
            baseline=replace(base_pipeline.baseline, seed=split_seed + 4),
            use_ensemble=split_config.use_ensemble,
        )
        result = run_pipeline_once(dataset, split, cfg)
        per_split.append(
            {"split": i, "accuracies": result.accuracies, "rule_count": result.rule_count}
        )

    methods = {}
    for name in METHODS:
        accs = np.array([rec["accuracies"][name] for rec in per_split])
        mean = float(np.mean(accs))
        std = float(np.std(accs, ddof=1)) if accs.size > 1 else 0.0
        entry = {
            "mean_accuracy": mean,
            "std": std,
            "ci95": [mean - 1.96 * std, mean + 1.96 * std],
        }
        if name == "rule_set":
            entry["mean_rule_count"] = float(np.mean([rec["rule_count"] for rec in per_split]))
        else:
            entry["mean_rule_count"] = None
        methods[name] = entry
    return Report(
        methods=methods,
        per_split=per_split,
        repeats=split_config.repeats,
        seed=split_config.seed,
    )


def save_report(report: Report, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")


def load_report(path) -> Report:
    with open(path, encoding="utf-8") as fh:
        return Report.from_json(json.load(fh))
