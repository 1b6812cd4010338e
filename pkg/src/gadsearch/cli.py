"""Command-line pipeline: every stage reads and writes plain CSV/JSON, so the
black-box boundary becomes a process boundary.

Subcommands: train, predict, extract, attack, score, search, bench, serve.
stdout carries data when a stage runs in a pipe; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .attack import AttackConfig, attack_all, default_epsilon, read_attacks_csv, write_attacks_csv
from .bench import ExperimentConfig, run_experiment, write_report
from .classifiers import (
    load_classifier,
    predict_pool,
    read_predictions_csv,
    train_logistic,
    train_mlp,
    write_predictions_csv,
)
from .data import feature_ranges, load_csv
from .errors import GadSearchError
from .extraction import DEFAULT_HIDDEN, fit_pseudo, lhs_design, load_pseudo
from .scoring import gad_scores, read_gad_csv, write_gad_csv
from .search import (
    GroundTruthOracle,
    gad_search,
    least_confidence_search,
    metamodel_search,
    random_search,
)


def _parse_hidden(text: str) -> list[int]:
    text = text.strip()
    return [int(t) for t in text.split(",") if t.strip()] if text else []


def _read_truth_csv(path: str) -> list[int]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "label":
        raise GadSearchError(f"{path}: truth file must have a single 'label' header")
    return [int(l.strip()) for l in lines[1:] if l.strip()]


def _out_stream(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _cmd_train(args) -> int:
    data = load_csv(args.data, label_column=args.label_column)
    if args.model == "logistic":
        model = train_logistic(data, epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    else:
        model = train_mlp(data, _parse_hidden(args.hidden), epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    Path(args.out).write_text(model.to_json() + "\n", encoding="utf-8")
    print(f"trained {args.model} on {len(data)} rows -> {args.out}", file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    model = load_classifier(args.model)
    pool = load_csv(args.pool, label_column=args.label_column)
    predictions = predict_pool(model, pool.features)
    stream, own = _out_stream(args.out)
    try:
        write_predictions_csv(predictions, stream)
    finally:
        if own:
            stream.close()
    return 0


def _cmd_extract(args) -> int:
    model = load_classifier(args.model)
    pool = load_csv(args.pool, label_column=args.label_column)
    if args.design == "dataset":
        design = pool.features
    else:
        design = lhs_design(feature_ranges(pool), args.n_design, seed=args.seed)
    net, report = fit_pseudo(
        model,
        design,
        args.class_of_interest,
        hidden_widths=_parse_hidden(args.hidden),
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    Path(args.out).write_text(net.to_json() + "\n", encoding="utf-8")
    report_doc = {
        "r_squared": report.r_squared,
        "train_mse": report.train_mse,
        "n_design": report.n_design,
        "epochs": report.epochs,
    }
    if args.report:
        Path(args.report).write_text(json.dumps(report_doc, sort_keys=True) + "\n", encoding="utf-8")
    print(f"extraction R^2 {report.r_squared:.4f} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_attack(args) -> int:
    model = load_classifier(args.model)
    net = load_pseudo(args.pseudo)
    pool = load_csv(args.pool, label_column=args.label_column)
    ranges = feature_ranges(pool)
    cfg = AttackConfig(
        epsilon=args.epsilon if args.epsilon is not None else default_epsilon(ranges),
        max_iters=args.max_iters,
        clip_to_ranges=None if args.no_clip else ranges,
    )
    results = attack_all(model, net, pool, cfg)
    stream, own = _out_stream(args.out)
    try:
        write_attacks_csv(results, pool.feature_names, stream)
    finally:
        if own:
            stream.close()
    flipped = sum(r.flipped for r in results)
    print(f"flipped {flipped}/{len(results)} instances", file=sys.stderr)
    return 0


def _cmd_score(args) -> int:
    pool = load_csv(args.pool, label_column=args.label_column)
    predictions = read_predictions_csv(args.preds)
    attacks = read_attacks_csv(args.attacks)
    records = gad_scores(pool, predictions, attacks, span=args.span, scale=args.scale)
    stream, own = _out_stream(args.out)
    try:
        write_gad_csv(records, stream)
    finally:
        if own:
            stream.close()
    return 0


def _cmd_search(args) -> int:
    pool = load_csv(args.pool, label_column=args.label_column)
    predictions = read_predictions_csv(args.preds)
    truths = _read_truth_csv(args.oracle_labels)
    if len(truths) != len(pool):
        raise GadSearchError("oracle labels must align with the pool rows")
    oracle = GroundTruthOracle(truths)
    coi = args.class_of_interest
    if args.method == "gad":
        src = sys.stdin if args.gad in (None, "-") else args.gad
        records = read_gad_csv(src)
        trace = gad_search(pool, records, predictions, oracle, args.budget, coi)
    elif args.method == "random":
        trace = random_search(pool, predictions, oracle, args.budget, args.seed, coi)
    elif args.method == "least_confidence":
        trace = least_confidence_search(pool, predictions, oracle, args.budget, coi)
    else:
        trace = metamodel_search(pool, predictions, oracle, args.budget, args.seed, coi)
    stream, own = _out_stream(args.out)
    try:
        stream.write(trace.to_jsonl())
    finally:
        if own:
            stream.close()
    return 0


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json_file(args.config)
    report = run_experiment(cfg, workers=args.workers)
    write_report(report, args.out, figures=not args.no_figures)
    print(
        f"bench complete: {report.replications_run} replications "
        f"({report.replications_skipped} skipped) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gadsearch", description=__doc__)
    parser.add_argument("--json-errors", action="store_true", help="emit errors as JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a built-in classifier from a labeled CSV")
    p.add_argument("--data", required=True, help="training CSV with a header row")
    p.add_argument("--label-column", default="label", help="name of the label column")
    p.add_argument("--model", choices=["logistic", "mlp"], default="logistic")
    p.add_argument("--hidden", default="16", help="comma-separated hidden widths (mlp only)")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.5, help="learning rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output classifier JSON")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="write index,label,confidence for every pool row")
    p.add_argument("--model", required=True, help="classifier JSON")
    p.add_argument("--pool", required=True, help="evaluation CSV")
    p.add_argument("--label-column", default=None, help="label column to ignore, if present")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("extract", help="fit a pseudo model to the classifier's confidences")
    p.add_argument("--model", required=True, help="classifier JSON")
    p.add_argument("--pool", required=True, help="CSV defining the feature domain")
    p.add_argument("--label-column", default=None, help="label column to ignore, if present")
    p.add_argument("--class-of-interest", type=int, required=True)
    p.add_argument("--design", choices=["lhs", "dataset"], default="lhs", help="design source")
    p.add_argument("--n-design", type=int, default=20000, help="design size (lhs only)")
    p.add_argument("--hidden", default=",".join(str(w) for w in DEFAULT_HIDDEN))
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.05, help="learning rate")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output pseudo-model JSON")
    p.add_argument("--report", default=None, help="optional extraction report JSON")
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("attack", help="perturb every pool row until the classifier flips")
    p.add_argument("--model", required=True, help="classifier JSON")
    p.add_argument("--pseudo", required=True, help="pseudo-model JSON")
    p.add_argument("--pool", required=True, help="evaluation CSV")
    p.add_argument("--label-column", default=None, help="label column to ignore, if present")
    p.add_argument("--epsilon", type=float, default=None, help="step size (default: 1%% of mean range)")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--no-clip", action="store_true", help="do not clip steps to the pool ranges")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("score", help="fit the expected-cost curve and score every instance")
    p.add_argument("--pool", required=True, help="evaluation CSV")
    p.add_argument("--label-column", default=None, help="label column to ignore, if present")
    p.add_argument("--preds", required=True, help="predictions CSV from 'predict'")
    p.add_argument("--attacks", required=True, help="attacks CSV from 'attack'")
    p.add_argument("--scale", choices=["raw", "log"], default="log", help="response scale")
    p.add_argument("--span", type=float, default=0.75, help="smoother span in (0, 1]")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("search", help="run an oracle-in-the-loop search with simulated labels")
    p.add_argument("--method", choices=["gad", "random", "least_confidence", "metamodel"], required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--pool", required=True, help="evaluation CSV")
    p.add_argument("--label-column", default=None, help="label column to ignore, if present")
    p.add_argument("--preds", required=True, help="predictions CSV from 'predict'")
    p.add_argument("--gad", default=None, help="gad CSV from 'score' ('-' or omit for stdin; gad method only)")
    p.add_argument("--oracle-labels", required=True, help="CSV with one 'label' column, row-aligned")
    p.add_argument("--class-of-interest", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output JSON-lines trace (default: stdout)")
    p.set_defaults(fn=_cmd_search)

    p = sub.add_parser("bench", help="run a replicated search comparison from a config file")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=os.environ.get("GADSEARCH_OUT_DIR", "results"), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel replication workers")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("serve", help="start the labeling session service")
    p.add_argument("--data-dir", default=os.environ.get("GADSEARCH_DATA_DIR", "data"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("GADSEARCH_PORT", "8000")))
    p.add_argument("--ui-dir", default=os.environ.get("GADSEARCH_UI_DIR"))
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except GadSearchError as e:
        if args.json_errors:
            print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        if args.json_errors:
            print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
