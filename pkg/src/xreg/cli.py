"""``xreg`` command line: train, predict, evaluate, selftest.

Exit codes: 0 ok, 1 runtime or data error, 2 usage error, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import labelwise, metrics, pointwise, rerank, selftest, solver
from .io import LABELWISE, POINTWISE, ParseError, read_dataset, read_predictions, write_predictions
from .trainer import Hyperparams, ModelFormatError, TrainingError, load_model, save_model, train

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_SELFTEST = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}

log = logging.getLogger("xreg")


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _unit_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("every k must be >= 1")
    return vals


def _threads_default():
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xreg", description="Extreme regression over large label spaces.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value file supplying any flag; command line wins")
        sp.add_argument("--threads", type=_positive_int, default=_threads_default(),
                        help="worker threads (default: all cores; 1 for single-core timing)")

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True, help="training dataset file")
    t.add_argument("--model", required=True, help="output model path")
    t.add_argument("--trees", type=_positive_int, default=3, help="number of trees T (default 3)")
    t.add_argument("--max-leaf", type=_positive_int, default=100,
                   help="maximum labels per leaf M (default 100)")
    t.add_argument("-C", "--cost", type=_positive_float, default=solver.DEFAULT_C,
                   help="logistic loss weight C (default 10)")
    t.add_argument("--tol", type=_positive_float, default=solver.DEFAULT_TOL,
                   help="solver stopping tolerance (default 0.1)")
    t.add_argument("--max-iter", type=_positive_int, default=solver.DEFAULT_MAX_ITER,
                   help="solver epoch cap (default 100)")
    t.add_argument("--prune", type=float, default=solver.DEFAULT_PRUNE,
                   help="drop weights below this magnitude (default 0.05)")
    t.add_argument("--loss-scale", choices=solver.LOSS_SCALES, default=solver.DEFAULT_LOSS_SCALE,
                   help="per-node loss as a sum (default) or a mean over member points")
    t.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    t.add_argument("--no-tail", action="store_true", help="omit tail-scorer centroids from the model")
    common(t)

    q = sub.add_parser("predict", help="predict with a trained model")
    q.add_argument("--model", required=True, help="trained model file")
    q.add_argument("--data", required=True, help="test dataset file (labels are ignored)")
    q.add_argument("--out", required=True, help="prediction file to write")
    q.add_argument("--mode", choices=(POINTWISE, LABELWISE), default=POINTWISE,
                   help="rank labels per point or points per label (default pointwise)")
    q.add_argument("--beam", type=_positive_int, default=pointwise.DEFAULT_BEAM,
                   help="pointwise beam width P (default 10)")
    q.add_argument("--topk", type=_positive_int, default=pointwise.DEFAULT_TOPK,
                   help="pointwise labels per point k (default 5)")
    q.add_argument("--factor", type=_positive_float, default=labelwise.DEFAULT_FACTOR,
                   help="labelwise capacity factor F (default 4)")
    q.add_argument("--per-label", type=_positive_int, default=labelwise.DEFAULT_PER_LABEL,
                   help="labelwise points per label N (default 10)")
    q.add_argument("--tail-alpha", type=_unit_float, default=None,
                   help="blend weight alpha for tail re-ranking (off by default; 0.8 is typical)")
    common(q)

    e = sub.add_parser("evaluate", help="score a prediction file")
    e.add_argument("--truth", required=True, help="ground-truth dataset file")
    e.add_argument("--pred", required=True, help="prediction file")
    e.add_argument("--train", help="training dataset, needed for PSP propensities")
    e.add_argument("--metrics", default="psp,xmad,xrmse,wp,ndcg,tau",
                   help=f"comma list from {','.join(metrics.METRICS)} (default psp,xmad,xrmse,wp,ndcg,tau)")
    e.add_argument("--k", type=_int_list, default=[1, 3, 5], help="cutoffs (default 1,3,5)")
    e.add_argument("--orientation", choices=("auto", POINTWISE, LABELWISE), default="auto",
                   help="prediction orientation (default: inferred from the file header)")
    e.add_argument("--format", choices=("table", "csv"), default="table",
                   help="report layout (default table)")
    e.add_argument("--propensity-a", type=float, default=metrics.PROPENSITY_A,
                   help="propensity parameter A (default 0.55)")
    e.add_argument("--propensity-b", type=float, default=metrics.PROPENSITY_B,
                   help="propensity parameter B (default 1.5)")
    e.add_argument("--check-lemma1", action="store_true",
                   help="count rows violating 0 <= WP-regret@k <= 2 XMAD@2k")
    common(e)

    s = sub.add_parser("selftest", help="run randomised property suites")
    s.add_argument("--iterations", type=_positive_int, default=10_000,
                   help="trials for the metric suites; others scale along (default 10000)")
    s.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    s.add_argument("--inject-fault", choices=selftest.FAULTS, help=argparse.SUPPRESS)
    common(s)
    return p


def read_config(path) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{n}: expected key=value")
                out[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return out


def _apply_config(parser, argv):
    """Parse ``argv`` with config-file values as defaults; the command line wins."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subs = parser._subparsers._group_actions[0].choices
    if not known.config or command not in subs:
        return parser.parse_args(argv)
    conf = read_config(known.config)
    sub = subs[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in conf.items():
        key = {"c": "cost"}.get(key, key)
        act = actions.get(key)
        if act is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for '{command}'")
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            try:
                defaults[key] = act.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config {key}: {exc}") from None
        else:
            if act.choices and raw not in act.choices:
                raise UsageError(f"config {key}: {raw!r} not in {list(act.choices)}")
            defaults[key] = raw
    sub.set_defaults(**defaults)
    # required flags supplied by the config file are no longer required
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


def cmd_train(args) -> int:
    hp = Hyperparams(trees=args.trees, max_leaf=args.max_leaf, C=args.cost, tol=args.tol,
                     max_iter=args.max_iter, prune=args.prune, loss_scale=args.loss_scale,
                     seed=args.seed, threads=args.threads, tail=not args.no_tail)
    try:
        hp.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = read_dataset(args.data)
    t0 = time.perf_counter()
    model = train(ds, hp)
    dt = time.perf_counter() - t0
    save_model(model, args.model)
    nodes = sum(t.topology.n_nodes for t in model.trees)
    print(f"trained trees={len(model.trees)} nodes={nodes} time={dt:.3f}s")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = read_dataset(args.data)
    t0 = time.perf_counter()
    if args.mode == POINTWISE:
        P = pointwise.predict_pointwise(model, ds.X, args.beam, args.topk, args.threads)
    else:
        P = labelwise.predict_labelwise(model, ds.X, args.factor, args.per_label, args.threads)
    if args.tail_alpha is not None:
        tail = rerank.TailClassifier.from_model(model)
        P = rerank.rerank_file(P, ds.X, tail, args.tail_alpha, model.y_max)
    dt = time.perf_counter() - t0
    write_predictions(P, args.out)
    per = dt / max(ds.n_points, 1) * 1e3
    print(f"predicted mode={args.mode} rows={P.n_rows} time={dt:.3f}s per_point_ms={per:.3f}")
    return EXIT_OK


def infer_orientation(n_points, n_labels, R, C, requested="auto"):
    fits_p = (R, C) == (n_points, n_labels)
    fits_l = (R, C) == (n_labels, n_points)
    if requested == POINTWISE and fits_p or requested == LABELWISE and fits_l:
        return requested
    if requested != "auto":
        raise ValueError(f"prediction file is {R}x{C}, which does not fit {requested} "
                         f"orientation for N={n_points}, L={n_labels}")
    if fits_p and fits_l:
        raise UsageError(f"N == L == {n_points}: orientation is ambiguous, pass --orientation")
    if fits_p:
        return POINTWISE
    if fits_l:
        return LABELWISE
    raise ValueError(f"prediction file is {R}x{C} but the truth has N={n_points} points and "
                     f"L={n_labels} labels")


def cmd_evaluate(args) -> int:
    truth = read_dataset(args.truth)
    P = read_predictions(args.pred)
    P.orientation = infer_orientation(truth.n_points, truth.n_labels, P.n_rows, P.n_cols,
                                      args.orientation)
    wanted = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    bad = [m for m in wanted if m not in metrics.METRICS]
    if bad:
        raise UsageError(f"unknown metric(s) {', '.join(bad)}; choose from {', '.join(metrics.METRICS)}")
    prop = None
    if "psp" in wanted:
        if not args.train:
            raise ValueError("PSP needs propensities, which come from training label counts; "
                             "pass --train")
        tr = read_dataset(args.train)
        if tr.n_labels != truth.n_labels:
            raise ValueError(f"train file has L={tr.n_labels}, truth has L={truth.n_labels}")
        prop = metrics.propensities(metrics.label_counts(tr.Y), tr.n_points,
                                    args.propensity_a, args.propensity_b)
    rep = metrics.evaluate(truth.Y, P, wanted, args.k, prop)
    print(rep.to_csv() if args.format == "csv" else rep.to_table(), end="\n" if args.format == "table" else "")
    if args.check_lemma1:
        for k in args.k:
            v = metrics.lemma1_violations(truth.Y, P, k)
            print(f"lemma1 k={k} violations={v}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = selftest.run_all(args.iterations, args.seed, fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SELFTEST
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "selftest": cmd_selftest}


def _setup_logging():
    level = os.environ.get("XREG_LOG", "warning").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"XREG_LOG must be one of {', '.join(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _setup_logging()
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"xreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ModelFormatError, TrainingError, ValueError, OSError) as exc:
        print(f"xreg: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
