"""``pointscore`` command line: fit, eval, simulate, experiment, complexity, bench.

Exit codes: 0 success, 2 malformed input or arguments, 3 degenerate data,
4 weight/column name mismatch, 5 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import MODES, BaselineConfig, baseline_fit
from .complexity import esc_closed_form, esc_monte_carlo
from .core import (
    ActionSet,
    BudgetExceededError,
    DataFormatError,
    Dataset,
    DegenerateDataError,
    SchemaMismatchError,
)
from .harness import (
    DEFAULT_SEED,
    METHODS,
    TIMING_METHODS,
    ExperimentSpec,
    figure2_matrix,
    run_experiment,
    run_timing,
    score_curve,
    write_score_curve,
)
from .search import POLICIES, SearchConfig, evaluate, fit, fit_cv_stopped
from .simgen import SETTINGS, SimConfig, generate

log = logging.getLogger("pointscore")

THREADS_ENV = "POINTSCORE_THREADS"
EXIT_CODES = (
    (SchemaMismatchError, 4),
    (DegenerateDataError, 3),
    (DataFormatError, 2),
    (BudgetExceededError, 5),
)


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"base seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker processes (default from ${THREADS_ENV}, else 1)")
    common.add_argument("--output", "-o", help="output file or directory (default: stdout where meaningful)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--verbose", "-v", action="store_true")
    return common


def _search_flags(parser):
    parser.add_argument("--L", type=int, default=1, help="largest admissible weight")
    parser.add_argument("--depth", type=int, default=1, help="look-ahead depth")
    parser.add_argument("--top-k", type=int, default=None)
    parser.add_argument("--truncation", type=int, default=None)
    parser.add_argument("--max-iterations", type=int, default=None)
    parser.add_argument("--no-cache", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="pointscore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a score on a CSV")
    p.add_argument("data")
    p.add_argument("--outcome", default="y")
    p.add_argument("--method", choices=POLICIES + ("logistic_rounding",), default="greedy")
    _search_flags(p)
    p.add_argument("--cv-folds", type=int, default=None, help="cross-validated early stopping")
    p.add_argument("--rounding-mode", choices=MODES, default="constrained_grid")
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--lam", type=float, default=1.0)

    p = sub.add_parser("eval", parents=[common], help="tied AUC of given integer weights")
    p.add_argument("data")
    p.add_argument("--outcome", default="y")
    p.add_argument("--weights", required=True,
                   help="JSON file (name -> weight, or a FitResult), or inline 'a=1,b=2' / '1,0,2'")
    p.add_argument("--score-curve", help="also write observed event rate by score to this CSV")

    p = sub.add_parser("simulate", parents=[common], help="write a simulated dataset as CSV")
    p.add_argument("--setting", choices=SETTINGS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--outcome", default="y")
    p.add_argument("--diagnostics", action="store_true",
                   help="append __contaminated / __branch columns where the design has them")

    p = sub.add_parser("experiment", parents=[common], help="replicated simulation study")
    p.add_argument("--setting", choices=SETTINGS[:3], required=True)
    p.add_argument("--methods", default=",".join(METHODS[:6]))
    p.add_argument("--n", type=_int_list, default=[100, 200, 400])
    p.add_argument("--B", type=int, default=100)
    p.add_argument("--test-n", type=int, default=5000)
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--fixed-weights", type=_int_list, default=None)

    p = sub.add_parser("complexity", parents=[common], help="search-complexity estimates")
    p.add_argument("--p", type=_int_list, required=True)
    p.add_argument("--L", type=_int_list, default=[1])
    p.add_argument("--n", type=int, default=None)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--closed-form", action="store_true", help="closed form only (default)")
    mode.add_argument("--monte-carlo", action="store_true", help="exhaustive Monte Carlo on null data")
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--table", action="store_true", help="emit CSV instead of JSON lines")

    p = sub.add_parser("bench", parents=[common], help="timing grid on Setting 1")
    p.add_argument("--L-values", type=_int_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--p-values", type=_int_list, default=[5, 10, 15, 20, 25])
    p.add_argument("--n-values", type=_int_list, default=[100, 200, 300, 400, 500])
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--methods", default=",".join(TIMING_METHODS))
    return parser


def _emit(text: str, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _manifest(args, target: Path, artifacts: list):
    doc = {
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "threads": args.threads,
        "config": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "artifacts": artifacts,
    }
    target.write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _rows_to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data, args.outcome)
    data.require_both_classes()
    if args.method == "logistic_rounding":
        cfg = BaselineConfig(grid_size=args.grid_size, lam=args.lam, max_level=args.L, mode=args.rounding_mode)
        result = baseline_fit(data, cfg)
    else:
        cfg = SearchConfig(
            action_set=ActionSet(args.L),
            policy=args.method,
            look_ahead_depth=args.depth,
            top_k=args.top_k,
            truncation=args.truncation,
            max_iterations=args.max_iterations,
            cache_enabled=not args.no_cache,
        )
        if args.cv_folds:
            result = fit_cv_stopped(data, cfg, folds=args.cv_folds, seed=args.seed)
        else:
            result = fit(data, cfg)
    if args.format == "csv":
        rows = [{"predictor": k, "weight": v} for k, v in result.weight_map().items()]
        _emit(_rows_to_csv(rows, ["predictor", "weight"]), args.output)
    else:
        _emit(result.to_json(indent=2) + "\n", args.output)
    return 0


def parse_weights(spec: str, names: tuple) -> np.ndarray:
    """Weights from a JSON file or an inline list, checked against ``names``.

    A JSON file may hold a name-to-weight mapping, a list, or a fit result with
    a ``weights`` mapping. Inline forms are ``a=1,b=0`` or ``1,0``.
    """
    path = Path(spec)
    if path.suffix == ".json" or path.is_file():
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"cannot read weights from {spec}: {exc}") from None
        if isinstance(doc, dict) and isinstance(doc.get("weights"), (dict, list)):
            doc = doc["weights"]
    elif "=" in spec:
        doc = {}
        for part in spec.split(","):
            key, _, value = part.partition("=")
            doc[key.strip()] = value.strip()
    else:
        doc = [v.strip() for v in spec.split(",") if v.strip()]

    try:
        if isinstance(doc, dict):
            missing = [n for n in names if n not in doc]
            extra = [k for k in doc if k not in names]
            if missing or extra:
                raise SchemaMismatchError(f"weight names do not match columns; missing {missing}, unknown {extra}")
            values = [int(doc[n]) for n in names]
        elif isinstance(doc, list):
            if len(doc) != len(names):
                raise SchemaMismatchError(f"{len(doc)} weights for {len(names)} predictor columns")
            values = [int(v) for v in doc]
        else:
            raise DataFormatError("weights must be a mapping or a list")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (SchemaMismatchError, DataFormatError)):
            raise
        raise DataFormatError(f"weights must be integers: {exc}") from None
    return np.array(values, dtype=np.int64)


def cmd_eval(args) -> int:
    data = Dataset.from_csv(args.data, args.outcome)
    weights = parse_weights(args.weights, data.predictor_names)
    data.require_both_classes()
    value = evaluate(data, weights)
    report = {"auc": value, "n": data.n, "n1": data.n1, "n0": data.n0,
              "weights": dict(zip(data.predictor_names, weights.tolist()))}
    if args.score_curve:
        write_score_curve(args.score_curve, score_curve(data, weights))
    if args.format == "csv":
        _emit(_rows_to_csv([report], ["auc", "n", "n1", "n0"]), args.output)
    else:
        _emit(json.dumps(report, indent=2) + "\n", args.output)
    return 0


def cmd_simulate(args) -> int:
    if not args.output:
        raise DataFormatError("simulate needs --output")
    sample = generate(SimConfig(args.setting, args.n, seed=args.seed, p=args.p))
    extra = {}
    if args.diagnostics:
        if "contaminated" in sample.diagnostics:
            extra["__contaminated"] = sample.diagnostics["contaminated"].astype(int)
        if "branch" in sample.diagnostics:
            extra["__branch"] = sample.diagnostics["branch"]
    out = Path(args.output)
    sample.data.to_csv(out, outcome=args.outcome, extra_columns=extra)
    _manifest(args, out.with_name(out.name + ".manifest.json"), [out.name])
    return 0


def cmd_experiment(args) -> int:
    spec = ExperimentSpec(
        setting=args.setting,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        n_values=tuple(args.n),
        replicates=args.B,
        test_n=args.test_n,
        seed=args.seed,
        max_level=args.L,
        search_options={} if args.top_k is None else {"top_k": args.top_k},
        baseline=BaselineConfig(max_level=args.L),
        fixed_weights=args.fixed_weights,
        workers=args.threads,
    )
    table = run_experiment(spec)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    table.write_long_csv(out / "results_long.csv")
    table.write_summary_csv(out / "summary.csv")
    failed = sum(1 for r in table.records.values() if not r.ok)
    if failed:
        log.warning("%d fits failed and were excluded", failed)
    _manifest(args, out / "manifest.json", ["results_long.csv", "summary.csv"])
    return 0


COMPLEXITY_COLUMNS = ["p", "L", "n", "source", "esc", "opt0", "sigma2", "m_eff", "rbar", "mc_replicates", "mc_se"]


def cmd_complexity(args) -> int:
    if args.monte_carlo and args.n is None:
        raise DataFormatError("--monte-carlo needs --n")
    records = []
    for L in args.L:
        for p in args.p:
            if args.monte_carlo:
                est = esc_monte_carlo(p, L, args.n, replicates=args.replicates, seed=args.seed)
            else:
                est = esc_closed_form(p, L, args.n)
            records.append(est.to_dict())
    if args.table or args.format == "csv":
        _emit(_rows_to_csv(records, COMPLEXITY_COLUMNS), args.output)
    else:
        _emit("".join(json.dumps(r) + "\n" for r in records), args.output)
    return 0


def cmd_bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    unknown = set(methods) - set(TIMING_METHODS)
    if unknown:
        raise DataFormatError(f"unknown timing methods {sorted(unknown)}")
    table = run_timing(args.L_values, args.p_values, args.n_values, replicates=args.replicates,
                       methods=methods, repeats=args.repeats, seed=args.seed)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    table.write_timing_csv(out / "timing.csv")
    (out / "figure2.csv").write_text(_rows_to_csv(figure2_matrix(table), ["vary", "value", "method", "mean_seconds"]))
    _manifest(args, out / "manifest.json", ["timing.csv", "figure2.csv"])
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "complexity": cmd_complexity,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except tuple(cls for cls, _ in EXIT_CODES) as exc:
        code = next(c for cls, c in EXIT_CODES if isinstance(exc, cls))
        print(f"error: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
