"""Command-line interface.

Subcommands mirror the pipeline stages so any stage can be re-run from its
persisted inputs: simulate, preprocess, train-mlp, attack, train-detector,
evaluate, pipeline, report.

Exit codes: 0 success, 2 bad input (missing/malformed files, bad
parameters), 1 unexpected internal failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluation, jsma, mlp, pipeline, plantsim, trees
from .errors import IcsAdvError, ParseError


def _load_json(path):
    try:
        with open(path, "r") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError("%s: invalid JSON: %s" % (path, exc)) from exc


def _load_schema(path) -> ds.Schema:
    return ds.Schema.from_json(_load_json(path))


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def cmd_simulate(args) -> int:
    if args.scenario is None:
        scenario = plantsim.bundled_scenario()
    else:
        scenario = plantsim.load_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with pipeline.DirectoryLock(out):
        manifest = pipeline.simulate_to_dir(scenario, out)
    print(
        "simulate: %d normal rows, %d attacked rows (%d labeled attack) -> %s"
        % (
            manifest["normal_rows"],
            manifest["attacked_rows"],
            manifest["attack_rows_labeled"],
            out,
        )
    )
    return 0


def cmd_preprocess(args) -> int:
    schema = _load_schema(args.schema)
    data = ds.load_csv(args.input, schema)
    if args.params:
        params = ds.NormalizationParams.from_json(_load_json(args.params))
    else:
        params = ds.fit_minmax(data)
        if args.fit_params_out:
            pipeline.write_json(params.to_json(), Path(args.fit_params_out))
    scaled = ds.apply_minmax(data, params)
    pipeline.write_csv(scaled, Path(args.out))
    print("preprocess: %d rows -> %s" % (scaled.n_rows, args.out))
    return 0


def cmd_train_mlp(args) -> int:
    schema = _load_schema(args.schema)
    data = ds.load_csv(args.train, schema)
    if args.train_fraction < 1.0:
        data, _ = ds.split(data, args.train_fraction, args.split_seed)
    layer_sizes = [schema.n_features] + _int_list(args.hidden) + [2]
    model = mlp.init(layer_sizes, args.seed)
    model, history = mlp.train(
        model,
        data.X,
        data.y,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        l2_penalty=args.l2_penalty,
        seed=args.seed,
    )
    mlp.save_model(model, args.out)
    print(
        "train-mlp: %d rows, %d epochs, final loss %.6f -> %s"
        % (data.n_rows, args.epochs, history[-1], args.out)
    )
    return 0


def cmd_attack(args) -> int:
    schema = _load_schema(args.schema)
    model = mlp.load_model(args.model)
    data = ds.load_csv(args.data, schema)
    attack_rows = ds.Dataset(schema, data.X[data.y == 1], data.y[data.y == 1])
    cfg = jsma.JsmaConfig(
        epsilon=args.epsilons[0],
        theta_max_features=args.theta,
        max_iterations=args.max_iterations,
        direction=args.direction,
    )
    adv, report = jsma.generate_set(
        model, attack_rows, cfg, args.epsilons, args.variants, target=args.target
    )
    pipeline.write_csv(adv, Path(args.out))
    if args.report:
        pipeline.write_json(report, Path(args.report))
    print(
        "attack: %d rows x %d variants -> %d adversarial samples -> %s"
        % (attack_rows.n_rows, args.variants, report["emitted"], args.out)
    )
    return 0


def cmd_train_detector(args) -> int:
    schema = _load_schema(args.schema)
    data = ds.load_csv(args.train, schema)
    # per-kind depth defaults: 12 for the CART family, 3 for boosting stages
    depth = args.max_depth
    if args.kind == trees.CART:
        params = trees.CartParams(
            max_depth=12 if depth is None else depth,
            min_samples_split=args.min_samples_split,
            min_impurity_decrease=args.min_impurity_decrease,
        )
        model = trees.train_cart(data.X, data.y, params)
    elif args.kind == trees.FOREST:
        params = trees.ForestParams(
            n_trees=args.n_trees,
            features_per_split=args.features_per_split,
            bootstrap=not args.no_bootstrap,
            max_depth=12 if depth is None else depth,
            min_samples_split=args.min_samples_split,
            min_impurity_decrease=args.min_impurity_decrease,
        )
        model = trees.train_forest(data.X, data.y, params, seed=args.seed)
    else:
        params = trees.GbcParams(
            n_stages=args.n_stages,
            learning_rate=args.learning_rate,
            max_depth=3 if depth is None else depth,
        )
        model = trees.train_gbc(data.X, data.y, params)
    trees.save_model(model, args.out)
    print("train-detector: %s on %d rows -> %s" % (args.kind, data.n_rows, args.out))
    return 0


def cmd_evaluate(args) -> int:
    schema = _load_schema(args.schema)
    model = trees.load_model(args.model)
    data = ds.load_csv(args.data, schema)
    doc = pipeline.evaluate_model(model, data)
    pipeline.write_json(doc, Path(args.out))
    row = doc["metrics"]
    print(
        "evaluate: accuracy %.4f, recall %.4f, fpr %.4f, f1 %.4f -> %s"
        % (row["accuracy"], row["recall"], row["fpr"], row["f1"], args.out)
    )
    if doc["predicts_no_attacks"]:
        print("warning: detector never predicts the attack class", file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    if args.config is None:
        config = pipeline.default_config()
    else:
        config = _load_json(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with pipeline.DirectoryLock(out):
        manifest = pipeline.run_pipeline(config, out)
    print("pipeline: wrote %d artifacts -> %s" % (len(manifest["artifacts"]), out))
    return 0


def cmd_report(args) -> int:
    report = _load_json(args.input)
    text = evaluation.render_text(report)
    if args.out:
        pipeline.write_text(text, Path(args.out))
        print("report: -> %s" % args.out)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icsadv",
        description="Adversarially trained anomaly detectors for water "
        "treatment telemetry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario into normal/attacked CSVs")
    p.add_argument("--scenario", help="scenario JSON (default: bundled scenario)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="min-max scale a dataset to [0, 1]")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", help="apply existing parameters instead of fitting")
    p.add_argument("--fit-params-out", help="where to save fitted parameters")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-mlp", help="train the MLP oracle")
    p.add_argument("--train", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", default="64,64", help="hidden sizes, e.g. 64,64")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--l2-penalty", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=1.0,
                   help="train on a seeded fraction of the file")
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mlp)

    p = sub.add_parser("attack", help="generate adversarial samples")
    p.add_argument("--model", required=True, help="mlp model JSON")
    p.add_argument("--data", required=True,
                   help="normalized CSV; only label-1 rows are used")
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True, help="adversarial CSV")
    p.add_argument("--report", help="generation report JSON")
    p.add_argument("--epsilons", type=_float_list, default=[0.1])
    p.add_argument("--variants", type=int, default=1)
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--direction", choices=[jsma.INCREASE, jsma.SIGNED],
                   default=jsma.INCREASE)
    p.add_argument("--target", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train-detector", help="train cart, rf or gbc")
    p.add_argument("--kind", required=True,
                   choices=[trees.CART, trees.FOREST, trees.GBC])
    p.add_argument("--train", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-depth", type=int, default=None,
                   help="default 12 for cart/rf, 3 for gbc")
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--min-impurity-decrease", type=float, default=0.0)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--features-per-split", type=int, default=None)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--n-stages", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("evaluate", help="score a detector on a labeled CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--config", help="pipeline config JSON (default: bundled)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", help="render a report JSON as text tables")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IcsAdvError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
