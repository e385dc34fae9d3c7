"""Monte-Carlo comparison of decoding methods over repeated seeded trials.

Each trial optionally draws a candidate subsample from every segment's pool,
runs every method at every budget on that same subsample, and scores each
choice by its true expected utility: the row mean of the full pool matrix.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .analysis import GridSearchSpace, tune_grid_search
from .completion import AlsParams
from .decoding import MatrixSource, Method, fmbr, nxk, pmbr, sxs
from .errors import InputError
from .matrix import Budget, SegmentCandidates, UtilityMatrix, build_full_matrix, restrict_rows_cols
from .seeds import derive_seed

log = logging.getLogger(__name__)

TUNED = "tuned"


@dataclass(frozen=True)
class TrialConfig:
    methods: Sequence[Method]
    budgets: Sequence[Budget]
    n_trials: int = 1000
    base_seed: int = 0
    subsample_n: int | None = None
    als: Union[AlsParams, str] = field(default_factory=AlsParams)
    # Only used when als == "tuned".
    tune_space: GridSearchSpace | None = None
    tune_heldout: int = 10
    tune_trials_per_point: int = 8
    workers: int = 1

    def __post_init__(self):
        methods = tuple(Method.parse(m) for m in self.methods)
        budgets = tuple(sorted({Budget.parse(b) for b in self.budgets}))
        if not methods:
            raise InputError("no methods selected")
        if not budgets:
            raise InputError("no budgets selected")
        if self.n_trials < 1:
            raise InputError("n_trials must be >= 1")
        if self.subsample_n is not None and self.subsample_n < 2:
            raise InputError("subsample_n must be >= 2")
        if isinstance(self.als, str) and self.als != TUNED:
            raise InputError(f"als must be AlsParams or {TUNED!r}")
        if self.als == TUNED and self.tune_space is None:
            raise InputError("tuned ALS needs a tune_space")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "budgets", budgets)


@dataclass(frozen=True)
class TrialSummary:
    method: Method
    budget: Budget
    metric_name: str
    mean: float
    std: float
    n_trials: int
    per_trial: list[float] | None = None


@dataclass(frozen=True)
class RegretSummary:
    method: Method
    budget: Budget
    mean_true_utility_of_choice: float
    mean_regret: float
    agreement_rate: float
    utility_calls: int = 0


def method_seed(base_seed: int, segment_id: str, method: Method, budget: Budget, trial: int) -> int:
    frac = budget.fraction
    return derive_seed(base_seed, segment_id, method.value, frac.numerator, frac.denominator, trial)


def subsample_seed(base_seed: int, segment_id: str, trial: int) -> int:
    return derive_seed(base_seed, segment_id, "subsample", trial)


def draw_subsample(pool: int, size: int | None, seed: int) -> np.ndarray:
    if size is None:
        return np.arange(pool)
    if size > pool:
        raise InputError(f"subsample_n={size} exceeds pool size {pool}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(pool, size=size, replace=False))


def _run_method(method, source, budget, als, seed):
    if method is Method.PMBR:
        return pmbr(source, budget, als.with_seed(seed), seed)
    if method is Method.NXK:
        return nxk(source, budget, seed)
    return sxs(source, budget, seed)


def _segment_trials(args):
    """All trials for one segment.

    Returns ``(utility, fmbr_hit, calls)`` shaped ``(methods, budgets, trials)``
    plus the FMBR choice's true utility per trial.
    """
    segment_id, full, config, als_by_budget = args
    methods, budgets = config.methods, config.budgets
    pool = full.n_rows
    truth = full.values.mean(axis=1)
    shape = (len(methods), len(budgets), config.n_trials)
    utility = np.empty(shape)
    hit = np.zeros(shape, dtype=bool)
    calls = np.zeros(shape, dtype=np.int64)
    reference_utility = np.empty(config.n_trials)
    for t in range(config.n_trials):
        idx = draw_subsample(pool, config.subsample_n, subsample_seed(config.base_seed, segment_id, t))
        sub = full if config.subsample_n is None else restrict_rows_cols(full, idx, idx)
        source = MatrixSource(sub)
        reference = fmbr(source)
        reference_utility[t] = truth[idx[reference.chosen_index]]
        for b_pos, budget in enumerate(budgets):
            for m_pos, method in enumerate(methods):
                if method is Method.FMBR:
                    result = reference
                else:
                    seed = method_seed(config.base_seed, segment_id, method, budget, t)
                    result = _run_method(method, source, budget, als_by_budget.get(budget), seed)
                utility[m_pos, b_pos, t] = truth[idx[result.chosen_index]]
                hit[m_pos, b_pos, t] = result.chosen_index == reference.chosen_index
                calls[m_pos, b_pos, t] = result.utility_calls
        if (t + 1) % 100 == 0:
            log.debug("segment %s: %d/%d trials", segment_id, t + 1, config.n_trials)
    return utility, hit, calls, reference_utility


def _full_matrices(source, utility) -> dict[str, UtilityMatrix]:
    if isinstance(source, Mapping):
        return dict(source)
    if utility is None:
        raise InputError("candidate input needs a utility function")
    # One full matrix per segment, reused by every trial.
    return {seg.segment_id: build_full_matrix(seg, utility) for seg in source}


def _tune(matrices: dict[str, UtilityMatrix], config: TrialConfig) -> tuple[dict, list[str]]:
    ids = list(matrices)
    if len(ids) <= config.tune_heldout:
        raise InputError(f"tuning holds out {config.tune_heldout} segments but only {len(ids)} exist")
    heldout_ids, eval_ids = ids[: config.tune_heldout], ids[config.tune_heldout :]
    heldout = []
    for seg_id in heldout_ids:
        full = matrices[seg_id]
        idx = draw_subsample(full.n_rows, config.subsample_n, derive_seed(config.base_seed, seg_id, "tune-subsample"))
        heldout.append(restrict_rows_cols(full, idx, idx))
    als_by_budget = {}
    for budget in config.budgets:
        result = tune_grid_search(
            heldout, budget, config.tune_space, config.tune_trials_per_point, config.base_seed
        )
        log.info("budget %s: tuned %s (loss %.1f)", budget, result.best, result.best_loss)
        als_by_budget[budget] = result.best
    return als_by_budget, eval_ids


def run_trials(
    source: Mapping[str, UtilityMatrix] | Sequence[SegmentCandidates],
    config: TrialConfig,
    utility=None,
) -> tuple[list[TrialSummary], list[RegretSummary]]:
    """Run ``config.n_trials`` paired trials per segment and aggregate them.

    ``source`` is a mapping of full matrices (e.g. a ``PrecomputedStore``) or a
    list of candidate segments together with ``utility``.  Per-trial values are
    corpus averages over segments; summaries report their mean and population
    standard deviation across trials.
    """
    matrices = _full_matrices(source, utility)
    if not matrices:
        raise InputError("no segments to simulate")
    for seg_id, full in matrices.items():
        if full.n_rows != full.n_cols or not full.fully_observed:
            raise InputError(f"segment {seg_id!r}: simulation needs a square, fully observed matrix")
        if config.subsample_n is not None and config.subsample_n > full.n_rows:
            raise InputError(f"segment {seg_id!r}: subsample_n={config.subsample_n} exceeds pool {full.n_rows}")

    if config.als == TUNED:
        als_by_budget, eval_ids = _tune(matrices, config)
    else:
        als_by_budget, eval_ids = {b: config.als for b in config.budgets}, list(matrices)

    jobs = [(seg_id, matrices[seg_id], config, als_by_budget) for seg_id in eval_ids]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(_segment_trials, jobs))
    else:
        outputs = [_segment_trials(job) for job in jobs]

    utility = np.stack([o[0] for o in outputs])  # (segments, methods, budgets, trials)
    hit = np.stack([o[1] for o in outputs])
    calls = np.stack([o[2] for o in outputs])
    reference = np.stack([o[3] for o in outputs])  # (segments, trials)
    metric = next(iter(matrices.values())).utility_name

    summaries: list[TrialSummary] = []
    regrets: list[RegretSummary] = []
    for m_pos, method in enumerate(config.methods):
        for b_pos, budget in enumerate(config.budgets):
            util = utility[:, m_pos, b_pos, :]
            regret = reference - util
            agree = hit[:, m_pos, b_pos, :].astype(np.float64)
            for name, values in ((metric, util), ("regret", regret), ("agreement", agree)):
                per_trial = values.mean(axis=0)
                summaries.append(
                    TrialSummary(method, budget, name, float(per_trial.mean()), float(per_trial.std()),
                                 config.n_trials, per_trial.tolist())
                )
            regrets.append(
                RegretSummary(
                    method, budget, float(util.mean()), float(regret.mean()), float(agree.mean()),
                    int(calls[:, m_pos, b_pos, :].max()),
                )
            )
    return summaries, regrets


_METHOD_ORDER = {m: i for i, m in enumerate(Method)}


def _row_key(summary: TrialSummary):
    return (_METHOD_ORDER[summary.method], summary.budget.fraction)


CSV_COLUMNS = ["method", "budget", "metric", "mean", "std", "n_trials"]


def emit_results(summaries: Sequence[TrialSummary], path, format: str = "csv") -> None:
    """Write summaries ordered by method then ascending budget.

    Floats are written with ``repr`` so that parsing them back is exact.
    """
    if format not in ("csv", "jsonl"):
        raise InputError(f"unknown format {format!r}; use csv or jsonl")
    rows = sorted(summaries, key=_row_key)
    try:
        handle = Path(path).open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc
    with handle:
        if format == "csv":
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for s in rows:
                writer.writerow([s.method.value, str(s.budget), s.metric_name, repr(s.mean), repr(s.std), s.n_trials])
        else:
            for s in rows:
                record = {
                    "method": s.method.value,
                    "budget": str(s.budget),
                    "metric": s.metric_name,
                    "mean": s.mean,
                    "std": s.std,
                    "n_trials": s.n_trials,
                }
                if s.per_trial is not None:
                    record["per_trial"] = s.per_trial
                handle.write(json.dumps(record) + "\n")


def read_results_csv(path) -> list[dict]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        return [
            {**row, "mean": float(row["mean"]), "std": float(row["std"]), "n_trials": int(row["n_trials"])}
            for row in csv.DictReader(handle)
        ]
