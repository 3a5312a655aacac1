#!/usr/bin/env python3
"""
═══════════════════════════════════════════════════════════════════════════════
rectMaxvol CLI
Seed-set selection and cold-start evaluation from the command line
═══════════════════════════════════════════════════════════════════════════════

Usage:
    rectmaxvol select ratings.csv -f 5 -L 15        Pick a seed set
    rectmaxvol select ratings.csv -f 20 -L auto     Grow until every ||c_i|| <= 1
    rectmaxvol evaluate ratings.csv -f 10 -L 20     Fold-based Precision@k / Recall@k
    rectmaxvol sweep ratings.csv --seed-sizes 5:100:5 --ranks 5,10,20
    rectmaxvol verify                               Oracle conformance checks

Exit codes: 0 on success, 1 on any library error or failed check, 2 on an
internal error.
"""

from __future__ import annotations
from typing import Any, Dict, List, Optional, Sequence, Tuple
import argparse
import logging
import sys

import numpy as np

from .config import (
    MaxvolConfig, RunConfig, SCHEMA_VERSION, SELECTORS, VARIANTS, MODES, SOLVERS, INITS,
    cache_dir, parse_seed_size,
)
from .data import RatingMatrix, RatingsFormat, load_ratings, split_folds, transpose
from .elicitation import Predictor, coefficients_via_factors, coefficients_via_ratings, select_seed
from .errors import ArgumentError, RectMaxvolError
from .evaluation import evaluate_cold_start, sweep
from .factorization import FactorCache
from .ledger import Ledger, RunLog, stable_json, write_atomic
from .maxvol import log_rectangular_volume, max_offseed_norm, theorem_bound
from .verify import VerifyConfig, format_results, run_verify

_log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _int_list(value: str) -> Tuple[int, ...]:
    """`5,10,20` or an inclusive range `start:stop:step` (e.g. `5:100:5`)."""
    out: List[int] = []
    try:
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                bits = [int(b) for b in part.split(":")]
                start, stop = bits[0], bits[1]
                step = bits[2] if len(bits) > 2 else 1
                if step < 1:
                    raise ValueError(f"step must be positive in '{part}'")
                out.extend(range(start, stop + 1, step))
            else:
                out.append(int(part))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected integers like 5,10 or 5:100:5 ({e})")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got '{value}'")
    return tuple(out)


def _seed_size(value: str) -> Optional[int]:
    try:
        return parse_seed_size(value)
    except ArgumentError as e:
        raise argparse.ArgumentTypeError(e.message)


def _load(config: RunConfig, log: RunLog, ledger: Ledger) -> Tuple[RatingMatrix, RatingMatrix]:
    """(R as read, R oriented so rows are the cold axis)."""
    if not config.dataset:
        raise ArgumentError("a ratings file is required")
    default_format = config.delimiter == "," and config.header is None
    fmt = None if default_format else RatingsFormat(config.delimiter, config.header)
    with log.timed("load") as t:
        R = load_ratings(config.dataset, fmt)
        t.meta.update({"n": R.n, "m": R.m, "nnz": R.nnz, "dataset_hash": R.digest()})
    ledger.append("load", {"dataset": config.dataset}, {"hash": R.digest(), "shape": R.shape})
    return R, transpose(R) if config.mode == "item" else R


def _timings(log: RunLog) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for trace in log.traces:
        if trace.meta and "elapsed_ms" in trace.meta:
            out[trace.step] = round(out.get(trace.step, 0.0) + trace.meta["elapsed_ms"], 3)
    return out


def _emit(path: Optional[str], text: str) -> None:
    if path:
        write_atomic(path, text)
        _log.info("wrote %s", path)
    else:
        sys.stdout.write(text)


def _cache(config: RunConfig) -> FactorCache:
    return FactorCache(cache_dir(config.cache_dir))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_select(config: RunConfig) -> Dict[str, Any]:
    """Factorize, select a seed set and write the seed-set report."""
    log, ledger = RunLog(), Ledger()
    _, data = _load(config, log, ledger)
    cache = _cache(config)

    with log.timed("svd") as t:
        F = cache.factorize(data, config.f, config.svd())
        t.meta.update(F.meta())
    with log.timed("select") as t:
        seed, state = select_seed(F.Q, config.L0, config.selector, config.maxvol)
        t.meta.update({"L": seed.size, "swaps": state.swaps})

    k = list(seed.indices)
    report: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "command": "select",
        "selector": config.selector,
        "mode": config.mode,
        "f": config.f,
        "L0": "auto" if config.L0 is None else config.L0,
        "k": k,
        "external_ids": data.item_ids[k].tolist(),
        "w": state.w,
        "max_offseed_norm": max_offseed_norm(state),
        "theorem_bound": theorem_bound(config.f, seed.size),
        "log_volume": log_rectangular_volume(seed.S),
        "swaps": state.swaps,
        "dataset_hash": data.digest(),
        "svd": F.meta(),
        "timings_ms": _timings(log),
        "config": config.to_dict(),
    }
    if config.selector == "square":
        report["dominance_tol"] = config.maxvol.tol
        report["max_abs_coefficient"] = float(np.max(np.abs(state.C)))

    if config.predictor_output:
        with log.timed("coefficients"):
            if config.variant == "ratings":
                C = coefficients_via_ratings(data, k)
            else:
                C = coefficients_via_factors(F, k)
        predictor = Predictor(tuple(k), C, config.variant, config.f, data.digest(), config.selector,
                              {"swaps": state.swaps, "max_offseed_norm": max_offseed_norm(state)})
        report["predictor"] = str(predictor.save(config.predictor_output))

    ledger.append("select", config.to_dict(), {"k": k})
    report["ledger_head"] = ledger.head()
    report["ok"] = log.ok
    _emit(config.output, stable_json(report, indent=2) + "\n")
    return report


def cmd_evaluate(config: RunConfig) -> Dict[str, Any]:
    """Run the fold protocol once and write the JSON report plus per-cell CSV."""
    log, ledger = RunLog(), Ledger()
    R, data = _load(config, log, ledger)
    folds = split_folds(data.n, config.fold_count, config.seed)
    report = evaluate_cold_start(
        R, folds, config.selector, config.f, config.L0, config.variant,
        config.k_list, config.mode, threshold=config.threshold, workers=config.workers,
        svd=config.svd(), maxvol=config.maxvol, cache=_cache(config), log=log,
    )
    ledger.append("evaluate", config.to_dict(), report.aggregate)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "evaluate",
        "report": report.to_dict(),
        "timings_ms": _timings(log),
        "ledger_head": ledger.head(),
        "ok": log.ok,
    }
    _emit(config.output, stable_json(payload, indent=2) + "\n")
    if config.csv_output:
        write_atomic(config.csv_output, report.csv_text())
    return payload


def cmd_sweep(config: RunConfig) -> Dict[str, Any]:
    """Evaluate the (L0, f) grid and write the table, its CSV and the optimal-rank CSV."""
    if not config.seed_sizes:
        raise ArgumentError("sweep needs --seed-sizes")
    log, ledger = RunLog(), Ledger()
    R, data = _load(config, log, ledger)
    folds = split_folds(data.n, config.fold_count, config.seed)
    ranks = config.rank_grid or ((config.f,) if config.selector == "rectangular" else ())
    table = sweep(
        R, folds, config.seed_sizes, ranks, config.selector, config.variant, config.mode,
        config=config.evaluation(), svd=config.svd(), maxvol=config.maxvol,
        cache=_cache(config), log=log,
    )
    ledger.append("sweep", config.to_dict(), [c.report.aggregate for c in table.cells])
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "table": table.to_dict(),
        "timings_ms": _timings(log),
        "ledger_head": ledger.head(),
        "ok": log.ok,
    }
    _emit(config.output, stable_json(payload, indent=2) + "\n")
    if config.csv_output:
        write_atomic(config.csv_output, table.csv_text())
    if config.optimal_output:
        write_atomic(config.optimal_output, table.optimal_rank_text())
    return payload


def cmd_verify(config: VerifyConfig, verbose: bool = False, timings: bool = False) -> bool:
    """Run the capped oracle suite and print the summary; True when every check passed."""
    suite = run_verify(config)
    print(format_results(suite, verbose=verbose, timings=timings))
    return suite.ok


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("dataset", help="ratings file: user,item,rating[,timestamp]")
    p.add_argument("--mode", default="user", help=f"cold-start axis ({'|'.join(MODES)})")
    p.add_argument("--selector", default="rectangular", help=f"seed selector ({'|'.join(SELECTORS)})")
    p.add_argument("-f", "--rank", dest="f", type=int, default=10, help="PureSVD rank f")
    p.add_argument("-L", "--seed-size", dest="L0", type=_seed_size, default=10,
                   help="seed size L0 (integer or 'auto')")
    p.add_argument("--variant", default="ratings", help=f"coefficient variant ({'|'.join(VARIANTS)})")
    p.add_argument("--solver", default="auto", help=f"SVD solver ({'|'.join(SOLVERS)})")
    p.add_argument("--init", default="lu", choices=INITS, help="initial square seed")
    p.add_argument("--tol", type=float, default=1e-2, help="Square Maxvol dominance tolerance")
    p.add_argument("--max-iters", type=int, default=None, help="Square Maxvol swap budget (default 2f)")
    p.add_argument("--stop-norm", type=float, default=1.0, help="L0=auto stops once every ||c_i|| <= this")
    p.add_argument("--delimiter", default=",", help="field delimiter (use '\\t' for tabs)")
    header = p.add_mutually_exclusive_group()
    header.add_argument("--header", dest="header", action="store_true", default=None,
                        help="first line is a header")
    header.add_argument("--no-header", dest="header", action="store_false", help="no header line")
    p.add_argument("--cache-dir", default=None, help="factor cache directory (env RECTMAXVOL_CACHE_DIR)")
    p.add_argument("-o", "--output", default=None, help="JSON report path (default stdout)")


def _evaluation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", dest="fold_count", type=int, default=5, help="number of folds")
    p.add_argument("-k", "--k-list", dest="k_list", type=_int_list, default=(5, 10, 20),
                   help="cutoffs, e.g. 5,10,20")
    p.add_argument("--threshold", type=float, default=4.0, help="relevance threshold")
    p.add_argument("--workers", type=int, default=1, help="folds evaluated concurrently")
    p.add_argument("--csv", dest="csv_output", default=None, help="plot-ready CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rectmaxvol",
        description="rectMaxvol - maximal-volume seed sets for cold-start rating elicitation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  rectmaxvol select ml.csv -f 5 -L 15 -o seed.json
  rectmaxvol evaluate ml.csv --selector square -f 10 -L 10 --csv square.csv
  rectmaxvol sweep ml.csv --seed-sizes 5:100:5 --ranks 5,10,20 --csv grid.csv
  rectmaxvol verify --full
        """,
    )
    parser.add_argument("--seed", type=int, default=0, help="the single source of randomness")
    parser.add_argument("-v", "--verbose", action="store_true", help="INFO logging")
    parser.add_argument("--debug", action="store_true", help="DEBUG logging (includes drift checks)")
    sub = parser.add_subparsers(dest="command", help="Commands")

    select_parser = sub.add_parser("select", help="select a seed set")
    _common(select_parser)
    select_parser.add_argument("--save-predictor", dest="predictor_output", default=None,
                               help="write PATH.json + PATH.npy with the coefficient matrix")

    evaluate_parser = sub.add_parser("evaluate", help="fold-based cold-start evaluation")
    _common(evaluate_parser)
    _evaluation(evaluate_parser)

    sweep_parser = sub.add_parser("sweep", help="evaluate a (seed size, rank) grid")
    _common(sweep_parser)
    _evaluation(sweep_parser)
    sweep_parser.add_argument("--seed-sizes", type=_int_list, default=(), help="e.g. 5:100:5")
    sweep_parser.add_argument("--ranks", dest="rank_grid", type=_int_list, default=(), help="e.g. 5,10,20")
    sweep_parser.add_argument("--optimal-csv", dest="optimal_output", default=None,
                              help="per seed size, the rank chosen on validation")

    verify_parser = sub.add_parser("verify", help="run the oracle conformance suite")
    verify_parser.add_argument("--full", action="store_true", help="acceptance-sized case counts")
    verify_parser.add_argument("--filter", dest="pattern", default=None, help="only checks matching name")
    verify_parser.add_argument("--category", choices=["core", "theory", "pipeline"], default=None)
    verify_parser.add_argument("--timings", action="store_true", help="show per-check wall time")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    fields: Dict[str, Any] = {
        "command": args.command, "dataset": args.dataset, "mode": args.mode,
        "selector": args.selector, "f": args.f, "L0": args.L0, "variant": args.variant,
        "solver": args.solver, "seed": args.seed, "output": args.output,
        "cache_dir": args.cache_dir, "header": args.header,
        "delimiter": "\t" if args.delimiter in ("\\t", "tab") else args.delimiter,
        "maxvol": MaxvolConfig(init=args.init, tol=args.tol, max_iters=args.max_iters,
                               stop_norm=args.stop_norm),
    }
    for name in ("fold_count", "k_list", "threshold", "workers", "csv_output",
                 "seed_sizes", "rank_grid", "optimal_output", "predictor_output"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    return RunConfig.build(**fields)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if args.command is None:
        parser.print_help()
        return 1

    try:
        if args.command == "verify":
            config = VerifyConfig(seed=args.seed, full=args.full, pattern=args.pattern,
                                  category=args.category)
            return 0 if cmd_verify(config, verbose=args.verbose, timings=args.timings) else 1

        config = _run_config(args)
        commands = {"select": cmd_select, "evaluate": cmd_evaluate, "sweep": cmd_sweep}
        result = commands[args.command](config)
        return 0 if result.get("ok", True) else 1
    except RectMaxvolError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        _log.debug("internal error", exc_info=True)
        print(f"Internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
