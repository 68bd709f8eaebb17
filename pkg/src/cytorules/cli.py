"""Command-line entry points for the pipeline stages."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import artifacts, baselines, brs, embed, evaluation, service
from .chart import fit_distortion
from .dataset import (
    ClassLabel,
    PlantedSpec,
    generate_planted_dataset,
    load_dataset,
    save_dataset,
)


def _write_features_csv(path, slide_ids, matrix):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slide_id"] + [f"x{i}" for i in range(matrix.shape[1])])
        for sid, row in zip(slide_ids, matrix):
            writer.writerow([sid] + [repr(float(v)) for v in row])


def _read_features_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    slide_ids = [r[0] for r in rows[1:]]
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return slide_ids, matrix


def _write_labels_csv(path, slide_ids, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slide_id", "label"])
        for sid, lab in zip(slide_ids, labels):
            writer.writerow([sid, lab])


def _read_labels_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return {r[0]: int(r[1]) for r in rows[1:]}


def cmd_make_planted(args):
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = PlantedSpec.from_json(json.load(fh))
    else:
        spec = PlantedSpec.two_component(
            slides_per_class=args.slides_per_class,
            cells_per_slide=args.cells_per_slide,
            noise_rate=args.noise_rate,
        )
    dataset = generate_planted_dataset(spec, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out / "manifest.json")
    print(f"wrote {len(dataset.slides)} slides to {out / 'manifest.json'}")


def cmd_fit_embed(args):
    dataset = load_dataset(args.manifest)
    cfg = embed.EmbeddingConfig(
        n_neighbors=args.n_neighbors,
        n_epochs=args.epochs,
        seed=args.seed,
        reference_class=ClassLabel(args.ref_class),
    )
    model = embed.fit_embedding(dataset, cfg)
    distortion = fit_distortion(model.train_coords)
    embed.save_model(model, args.out, distortion)
    print(f"fit embedding on {model.train_coords.shape[0]} cells -> {args.out}")


def cmd_export_features(args):
    dataset = load_dataset(args.manifest)
    model, distortion = embed.load_model(args.model)
    if distortion is None:
        sys.exit("model document carries no distortion params; refit with fit-embed")
    _, vectors = artifacts.slide_feature_table(dataset, model, distortion)
    labeled = [s for s in dataset.slides if s.label is not None]
    matrix = np.vstack([vectors[s.slide_id] for s in labeled])
    _write_features_csv(args.out_features, [s.slide_id for s in labeled], matrix)
    _write_labels_csv(args.out_labels, [s.slide_id for s in labeled], [s.label.value for s in labeled])
    print(f"wrote {matrix.shape[0]} feature rows")


def cmd_learn_rules(args):
    slide_ids, x = _read_features_csv(args.features)
    labels = _read_labels_csv(args.labels)
    positive = ClassLabel(args.positive_class)
    y = np.array([1.0 if ClassLabel(labels[s]) == positive else 0.0 for s in slide_ids])
    schedule = brs.SaSchedule(iterations=args.iterations, seed=args.seed)
    ruleset = brs.learn(x, y, schedule=schedule, positive_class=positive)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(ruleset.to_json(), fh, indent=2)
        fh.write("\n")
    print(ruleset.render())


def cmd_train_baseline(args):
    slide_ids, x = _read_features_csv(args.features)
    labels = _read_labels_csv(args.labels)
    positive = ClassLabel(args.positive_class)
    y = np.array([1.0 if ClassLabel(labels[s]) == positive else 0.0 for s in slide_ids])
    cfg = baselines.BaselineConfig(seed=args.seed)
    trainer = {
        "lr": baselines.train_logistic,
        "svm": baselines.train_linear_svm,
        "mlp": baselines.train_mlp,
    }[args.kind]
    model = trainer(x, y, cfg)
    baselines.save_baseline(model, args.out)
    acc = float(np.mean(baselines.predict_baseline(model, x) == y))
    print(f"{args.kind}: training accuracy {acc:.3f} -> {args.out}")


def cmd_run_experiment(args):
    dataset = load_dataset(args.manifest)
    split_cfg = evaluation.SplitConfig(
        train_fraction=args.train_fraction,
        repeats=args.repeats,
        seed=args.seed,
        use_ensemble=not args.no_ensemble,
        embedding_reference_class=ClassLabel(args.ref_class),
    )
    report = evaluation.run_experiment(dataset, split_cfg)
    evaluation.save_report(report, args.report)
    print(report.render_table())


def cmd_build_artifacts(args):
    dataset = load_dataset(args.manifest)
    cfg = embed.EmbeddingConfig(seed=args.seed, reference_class=ClassLabel(args.ref_class))
    schedule = brs.SaSchedule(iterations=args.iterations, seed=args.seed)
    out = artifacts.build_artifacts(dataset, args.out, embedding_cfg=cfg, schedule=schedule)
    print(f"artifacts written to {out}")


def cmd_serve(args):
    state = service.load_session(args.artifacts)
    server = service.serve(state, args.bind)
    host, port = server.server_address[:2]
    print(f"serving {len(state.dataset.slides)} slides on http://{host}:{port}", flush=True)
    try:
        server.thread.join()
    except KeyboardInterrupt:
        server.shutdown()


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cytorules")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-planted", help="generate a planted-composition dataset")
    p.add_argument("--spec", help="planted spec JSON (default: built-in two-component spec)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slides-per-class", type=int, default=25)
    p.add_argument("--cells-per-slide", type=int, default=400)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_make_planted)

    p = sub.add_parser("fit-embed", help="fit the 2D embedding + distortion")
    p.add_argument("--manifest", required=True)
    p.add_argument("--class", dest="ref_class", type=int, default=1, choices=(1, 2))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-neighbors", type=int, default=15)
    p.add_argument("--epochs", type=int, default=200)
    p.set_defaults(func=cmd_fit_embed)

    p = sub.add_parser("export-features", help="density feature vectors for labeled slides")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_export_features)

    p = sub.add_parser("learn-rules", help="learn a rule set from feature/label CSVs")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--positive-class", type=int, default=2, choices=(1, 2))
    p.set_defaults(func=cmd_learn_rules)

    p = sub.add_parser("train-baseline", help="train a reference classifier")
    p.add_argument("--kind", required=True, choices=("lr", "svm", "mlp"))
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-class", type=int, default=2, choices=(1, 2))
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("run-experiment", help="repeated patient-level split evaluation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--no-ensemble", action="store_true")
    p.add_argument("--ref-class", type=int, default=1, choices=(1, 2))
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("build-artifacts", help="fit and serialize a servable pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class", dest="ref_class", type=int, default=1, choices=(1, 2))
    p.add_argument("--iterations", type=int, default=5000)
    p.set_defaults(func=cmd_build_artifacts)

    p = sub.add_parser("serve", help="serve fitted artifacts over HTTP")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--bind", default="127.0.0.1:8750")
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
