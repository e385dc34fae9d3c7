"""Low-rank diagnostics and ALS hyperparameter tuning."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .completion import AlsParams, FactorPair, als_complete, merge_completed
from .decoding import pmbr
from .errors import InputError
from .matrix import Budget, UtilityMatrix, mbr_select, observe, row_means, sample_omega
from .seeds import derive_seed
from .utility import denormalize, normalize


@dataclass(frozen=True)
class SpectrumReport:
    segment_id: str
    singular_values: list[float]
    ratio_2_1: float


def singular_spectrum(matrix: UtilityMatrix, top_m: int = 3, segment_id: str = "") -> SpectrumReport:
    if not matrix.fully_observed:
        raise InputError("singular_spectrum needs a fully observed matrix")
    if not 1 <= top_m <= min(matrix.shape):
        raise InputError(f"top_m must lie in [1, {min(matrix.shape)}], got {top_m}")
    sigma = np.linalg.svd(matrix.values, compute_uv=False)
    ratio = float(sigma[1] / sigma[0]) if len(sigma) > 1 and sigma[0] > 0 else 0.0
    return SpectrumReport(segment_id, [float(s) for s in sigma[:top_m]], ratio)


def rank_position(full_matrix: UtilityMatrix, approx_scores) -> int:
    """0-based position of the FMBR choice when candidates are sorted by ``approx_scores``.

    Sorting is descending and stable, so equal-scored competitors with a lower
    index are placed ahead of the FMBR choice.
    """
    scores = np.asarray(approx_scores, dtype=np.float64)
    if scores.shape != (full_matrix.n_rows,):
        raise InputError(f"expected {full_matrix.n_rows} scores, got shape {scores.shape}")
    best = mbr_select(full_matrix).index
    target = scores[best]
    return int(np.sum(scores > target) + np.sum(scores[:best] == target))


@dataclass(frozen=True)
class GridSearchSpace:
    lambdas: Sequence[float]
    ranks: Sequence[int]
    sweep_counts: Sequence[int]

    def __post_init__(self):
        for name in ("lambdas", "ranks", "sweep_counts"):
            values = tuple(getattr(self, name))
            if not values:
                raise InputError(f"grid search space has no {name}")
            object.__setattr__(self, name, values)
        if any(lam < 0 for lam in self.lambdas):
            raise InputError("lambdas must be >= 0")
        if any(k < 1 for k in self.ranks) or any(n < 1 for n in self.sweep_counts):
            raise InputError("ranks and sweep counts must be >= 1")

    def points(self) -> list[AlsParams]:
        return [
            AlsParams(lam=lam, rank=k, sweeps=n)
            for lam, k, n in itertools.product(self.lambdas, self.ranks, self.sweep_counts)
        ]

    def __len__(self) -> int:
        return len(self.lambdas) * len(self.ranks) * len(self.sweep_counts)


STANDARD_SPACE = GridSearchSpace(
    lambdas=(0.1, 0.15, 0.2),
    ranks=tuple(range(5, 16)),
    sweep_counts=tuple(range(10, 31)),
)


@dataclass(frozen=True)
class GridSearchResult:
    best: AlsParams
    best_loss: float
    leaderboard: list[tuple[AlsParams, float]] = field(default_factory=list)


def _cheapest_first(params: AlsParams, loss: float):
    return (loss, params.rank, params.sweeps, params.lam)


def trial_seed(rng_seed: int, heldout_index: int, trial: int) -> int:
    # Shared by every grid point so that all points see the same omegas.
    return derive_seed(rng_seed, "tune", heldout_index, trial)


def _scores_from_factors(partial: UtilityMatrix, normalized: UtilityMatrix, X, Y) -> np.ndarray:
    completed = denormalize(merge_completed(normalized, FactorPair(X, Y)), partial.utility_range)
    return row_means(completed)


def tune_grid_search(
    heldout: Sequence[UtilityMatrix],
    budget: Budget,
    space: GridSearchSpace,
    trials_per_point: int = 8,
    rng_seed: int = 0,
    tolerance: float = 1e-6,
) -> GridSearchResult:
    """Exhaustive search minimising the summed rank position of the FMBR choice.

    For a fixed ``(lambda, rank)`` and omega, ALS with ``n`` sweeps is a prefix
    of the run with ``max(sweep_counts)`` sweeps, so each such pair is solved
    once and every sweep count is read off the recorded factor path.
    """
    if not heldout:
        raise InputError("tune_grid_search needs at least one held-out matrix")
    if trials_per_point < 1:
        raise InputError("trials_per_point must be >= 1")
    budget = Budget.parse(budget)
    for matrix in heldout:
        if not matrix.fully_observed or matrix.n_rows != matrix.n_cols:
            raise InputError("held-out matrices must be square and fully observed")
        if matrix.n_rows < 2:
            raise InputError("held-out matrices need at least 2 candidates")
        if max(space.ranks) > matrix.n_rows:
            raise InputError(f"rank {max(space.ranks)} infeasible for a {matrix.n_rows}x{matrix.n_rows} matrix")

    max_sweeps = max(space.sweep_counts)
    losses: dict[tuple[float, int, int], float] = {}
    for lam, k in itertools.product(space.lambdas, space.ranks):
        totals = dict.fromkeys(space.sweep_counts, 0)
        for m_idx, matrix in enumerate(heldout):
            n = matrix.n_rows
            for t in range(trials_per_point):
                seed = trial_seed(rng_seed, m_idx, t)
                omega = sample_omega(n, budget, seed)
                partial = observe(matrix, omega)
                if len(omega) == n * n:
                    pos = rank_position(matrix, row_means(partial))
                    for sweeps in totals:
                        totals[sweeps] += pos
                    continue
                normalized = normalize(partial)
                path: list[tuple[np.ndarray, np.ndarray]] = []
                params = AlsParams(lam=lam, rank=k, sweeps=max_sweeps, tolerance=tolerance, init_seed=seed)
                als_complete(normalized, params, on_sweep=lambda X, Y: path.append((X, Y)))
                for sweeps in totals:
                    X, Y = path[min(sweeps, len(path)) - 1]
                    totals[sweeps] += rank_position(matrix, _scores_from_factors(partial, normalized, X, Y))
        for sweeps, total in totals.items():
            losses[(lam, k, sweeps)] = float(total)

    board = [(AlsParams(lam=lam, rank=k, sweeps=n, tolerance=tolerance), loss) for (lam, k, n), loss in losses.items()]
    board.sort(key=lambda item: _cheapest_first(*item))
    best, best_loss = board[0]
    return GridSearchResult(best, best_loss, board)


def evaluate_point(
    heldout: Sequence[UtilityMatrix],
    budget: Budget,
    params: AlsParams,
    trials_per_point: int = 8,
    rng_seed: int = 0,
) -> float:
    """Loss of a single grid point, computed by running PMBR directly."""
    total = 0
    for m_idx, matrix in enumerate(heldout):
        for t in range(trials_per_point):
            seed = trial_seed(rng_seed, m_idx, t)
            result = pmbr(matrix, budget, params.with_seed(seed), seed)
            total += rank_position(matrix, result.expected_utilities)
    return float(total)
