"""Command-line entry point: ``pmbr {decode,simulate,spectrum,tune,complete}``.

Exit status is 0 on success, 1 for input errors and 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import STANDARD_SPACE, GridSearchSpace, singular_spectrum, tune_grid_search
from .completion import AlsParams, als_complete
from .decoding import CandidateSource, MatrixSource, Method, decode
from .errors import InputError, NumericalError, UtilityError
from .harness import TUNED, TrialConfig, draw_subsample, emit_results, run_trials
from .io import load_candidates, load_matrices, write_matrices
from .matrix import Budget, build_full_matrix, restrict_rows_cols
from .seeds import derive_seed
from .utility import denormalize, get_utility, normalize

log = logging.getLogger("pmbr")


def parse_int_list(text: str) -> list[int]:
    """``"5..8,10"`` -> ``[5, 6, 7, 8, 10]``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_budget(text: str) -> Budget:
    try:
        return Budget.parse(text)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_budgets(text: str) -> list[Budget]:
    return [parse_budget(x) for x in text.split(",") if x.strip()]


def parse_methods(text: str) -> list[Method]:
    try:
        return [Method.parse(x.strip()) for x in text.split(",") if x.strip()]
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_input(p: argparse.ArgumentParser, candidates: bool = True) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--matrices", type=Path, help="JSONL file of precomputed full score matrices")
    if candidates:
        group.add_argument("--candidates", type=Path, help="JSONL file of candidate lists")
        p.add_argument("--utility", default="chrf", help="utility for --candidates (default: %(default)s)")


def _add_als(p: argparse.ArgumentParser) -> None:
    p.add_argument("--als-lambda", type=float, default=0.1)
    p.add_argument("--als-rank", type=int, default=10)
    p.add_argument("--als-sweeps", type=int, default=30)
    p.add_argument("--als-tolerance", type=float, default=1e-6)
    p.add_argument("--als-from", type=Path, help="JSON written by `tune`; overrides the --als-* values")


def _als_params(args) -> AlsParams:
    if getattr(args, "als_from", None):
        return load_tuned(args.als_from)
    return AlsParams(args.als_lambda, args.als_rank, args.als_sweeps, args.als_tolerance)


def load_tuned(path: Path) -> AlsParams:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return AlsParams(
            lam=float(data["lambda"]), rank=int(data["rank"]), sweeps=int(data["sweeps"]),
            tolerance=float(data.get("tolerance", 1e-6)),
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read ALS parameters from {path}: {exc}") from exc


def _segment_matrices(args) -> dict:
    if args.matrices is not None:
        return dict(load_matrices(args.matrices))
    utility = get_utility(args.utility)
    return {seg.segment_id: build_full_matrix(seg, utility) for seg in load_candidates(args.candidates)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmbr", description="MBR selection with ALS-completed utility matrices.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="select one candidate per segment")
    _add_input(p)
    p.add_argument("--method", type=Method.parse, default=Method.PMBR, choices=list(Method))
    p.add_argument("--budget", type=parse_budget, default=Budget.parse("1/16"))
    _add_als(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo comparison of methods and budgets")
    _add_input(p)
    p.add_argument("--subsample-n", type=int)
    p.add_argument("--methods", type=parse_methods, default=list(Method))
    p.add_argument("--budgets", type=parse_budgets, default=parse_budgets("1/32,1/16,1/8,1/4,1/2,1/1"))
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_als(p)
    p.add_argument("--tuned", action="store_true",
                   help="tune ALS per budget on the first --tune-heldout segments, evaluate on the rest")
    p.add_argument("--tune-heldout", type=int, default=10)
    p.add_argument("--lambdas", type=parse_float_list, default=list(STANDARD_SPACE.lambdas))
    p.add_argument("--ranks", type=parse_int_list, default=list(STANDARD_SPACE.ranks))
    p.add_argument("--sweeps", type=parse_int_list, default=list(STANDARD_SPACE.sweep_counts))
    p.add_argument("--trials-per-point", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("spectrum", help="top singular values per segment")
    _add_input(p)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("tune", help="grid-search ALS hyperparameters")
    _add_input(p, candidates=False)
    p.add_argument("--budget", type=parse_budget, default=Budget.parse("1/16"))
    p.add_argument("--lambdas", type=parse_float_list, default=list(STANDARD_SPACE.lambdas))
    p.add_argument("--ranks", type=parse_int_list, default=list(STANDARD_SPACE.ranks))
    p.add_argument("--sweeps", type=parse_int_list, default=list(STANDARD_SPACE.sweep_counts))
    p.add_argument("--trials-per-point", type=int, default=8)
    p.add_argument("--heldout", type=int, default=10, help="use the first N segments (default: %(default)s)")
    p.add_argument("--subsample-n", type=int, help="tune on an N-candidate subsample of each segment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--leaderboard", type=int, default=20, help="entries to keep in the output")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("complete", help="run ALS on partially observed matrices")
    p.add_argument("--matrix-in", type=Path, required=True)
    _add_als(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-retain", action="store_true", help="replace observed cells with the factorisation")
    p.add_argument("--out", type=Path, required=True)
    return parser


def cmd_decode(args) -> None:
    als = _als_params(args)
    if args.matrices is not None:
        segments = [(seg_id, MatrixSource(m), None) for seg_id, m in load_matrices(args.matrices).items()]
    else:
        utility = get_utility(args.utility)
        segments = [(seg.segment_id, CandidateSource(seg, utility), seg) for seg in load_candidates(args.candidates)]
    frac = args.budget.fraction
    with args.out.open("w", encoding="utf-8") as handle:
        for seg_id, source, seg in segments:
            seed = derive_seed(args.seed, seg_id, args.method.value, frac.numerator, frac.denominator)
            result = decode(args.method, source, args.budget, als.with_seed(seed), seed)
            record = {"segment_id": seg_id, "method": args.method.value, "chosen_index": result.chosen_index}
            if seg is not None:
                record["chosen_text"] = seg.texts[result.chosen_index]
            record["utility_calls"] = result.utility_calls
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def cmd_simulate(args) -> None:
    if args.matrices is not None:
        source, utility = load_matrices(args.matrices), None
    else:
        source, utility = load_candidates(args.candidates), get_utility(args.utility)
    space = GridSearchSpace(args.lambdas, args.ranks, args.sweeps) if args.tuned else None
    config = TrialConfig(
        methods=args.methods,
        budgets=args.budgets,
        n_trials=args.trials,
        base_seed=args.seed,
        subsample_n=args.subsample_n,
        als=TUNED if args.tuned else _als_params(args),
        tune_space=space,
        tune_heldout=args.tune_heldout,
        tune_trials_per_point=args.trials_per_point,
        workers=args.workers,
    )
    summaries, regrets = run_trials(source, config, utility)
    emit_results(summaries, args.out, args.format)
    for r in regrets:
        log.info("%s %s: regret %.6g agreement %.3f", r.method.value, r.budget, r.mean_regret, r.agreement_rate)


def cmd_spectrum(args) -> None:
    matrices = _segment_matrices(args)
    reports = [singular_spectrum(m, args.top, seg_id) for seg_id, m in matrices.items()]
    header = ["segment_id"] + [f"sigma{i + 1}" for i in range(args.top)] + ["ratio_2_1"]
    with args.out.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for r in reports:
            writer.writerow([r.segment_id] + [repr(s) for s in r.singular_values] + [repr(r.ratio_2_1)])
        if reports:
            table = np.array([r.singular_values + [r.ratio_2_1] for r in reports])
            writer.writerow(["mean"] + [repr(float(x)) for x in table.mean(axis=0)])


def cmd_tune(args) -> None:
    store = load_matrices(args.matrices)
    ids = list(store)[: args.heldout]
    heldout = []
    for seg_id in ids:
        full = store[seg_id]
        if args.subsample_n is not None:
            idx = draw_subsample(full.n_rows, args.subsample_n, derive_seed(args.seed, seg_id, "tune-subsample"))
            full = restrict_rows_cols(full, idx, idx)
        heldout.append(full)
    space = GridSearchSpace(args.lambdas, args.ranks, args.sweeps)
    result = tune_grid_search(heldout, args.budget, space, args.trials_per_point, args.seed)
    best = result.best
    out = {
        "lambda": best.lam,
        "rank": best.rank,
        "sweeps": best.sweeps,
        "tolerance": best.tolerance,
        "loss": result.best_loss,
        "budget": str(args.budget),
        "heldout_segments": ids,
        "space_size": len(result.leaderboard),
        "leaderboard": [
            {"lambda": p.lam, "rank": p.rank, "sweeps": p.sweeps, "loss": loss}
            for p, loss in result.leaderboard[: args.leaderboard]
        ],
    }
    args.out.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def cmd_complete(args) -> None:
    als = _als_params(args)
    partial = load_matrices(args.matrix_in, allow_missing=True)
    completed = {}
    for seg_id, matrix in partial.items():
        params = als.with_seed(derive_seed(args.seed, seg_id, "complete"))
        result = als_complete(normalize(matrix), params, retain_observed=not args.no_retain)
        completed[seg_id] = denormalize(result.completed, matrix.utility_range)
        log.info("%s: %d sweeps, objective %.6g", seg_id, result.sweeps_run,
                 result.objective_trace[-1] if result.objective_trace else float("nan"))
    write_matrices(args.out, completed)


COMMANDS = {
    "decode": cmd_decode,
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "tune": cmd_tune,
    "complete": cmd_complete,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (InputError, UtilityError) as exc:
        print(f"pmbr: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"pmbr: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pmbr: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
