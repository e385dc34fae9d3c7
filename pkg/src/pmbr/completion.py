"""Alternating least squares completion of a partially observed utility matrix.

Minimises, over observed cells only::

    sum (m_ij - x_i . y_j)^2 + lam * (sum ||x_i||^2 + sum ||y_j||^2)

One sweep solves every row factor exactly (column factors fixed), then every
column factor.  Each half-sweep is an exact block minimiser, so the objective
can only go down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InputError, NumericalError, SingularSystemError
from .matrix import UtilityMatrix


@dataclass(frozen=True)
class AlsParams:
    lam: float = 0.1
    rank: int = 10
    sweeps: int = 30
    tolerance: float = 1e-6
    init_seed: int = 0

    def __post_init__(self):
        if not self.lam >= 0:
            raise InputError(f"lambda must be >= 0, got {self.lam}")
        if self.rank < 1:
            raise InputError(f"rank must be >= 1, got {self.rank}")
        if self.sweeps < 1:
            raise InputError(f"sweeps must be >= 1, got {self.sweeps}")
        if not self.tolerance > 0:
            raise InputError(f"tolerance must be > 0, got {self.tolerance}")

    def with_seed(self, init_seed: int) -> AlsParams:
        return replace(self, init_seed=int(init_seed))


@dataclass(frozen=True)
class FactorPair:
    """``X`` is ``n_rows x k`` and ``Y`` is ``k x n_cols``; the approximation is ``X @ Y``."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[1] != self.Y.shape[0]:
            raise InputError(f"inconsistent factor shapes {self.X.shape} and {self.Y.shape}")

    @property
    def rank(self) -> int:
        return self.X.shape[1]

    def product(self) -> np.ndarray:
        return self.X @ self.Y


@dataclass(frozen=True)
class CompletionResult:
    completed: UtilityMatrix
    factors: FactorPair
    objective_trace: list[float] = field(default_factory=list)
    sweeps_run: int = 0


def _check_shapes(matrix: UtilityMatrix, factors: FactorPair) -> None:
    if factors.X.shape[0] != matrix.n_rows or factors.Y.shape[1] != matrix.n_cols:
        raise InputError(
            f"factors {factors.X.shape} x {factors.Y.shape} do not fit a {matrix.shape} matrix"
        )


def _objective(rows, cols, observed_values, X, Y, lam) -> float:
    # Residuals over observed cells only.
    if X.shape[1] == 1:
        pred = X[rows, 0] * Y[0, cols]
    else:
        pred = (X @ Y)[rows, cols]
    resid = observed_values - pred
    return float(resid @ resid + lam * (np.vdot(X, X) + np.vdot(Y, Y)))


def als_objective(matrix: UtilityMatrix, factors: FactorPair, lam: float) -> float:
    _check_shapes(matrix, factors)
    return _objective(*_observed_coords(matrix), factors.X, factors.Y, lam)


def _solve_block(weights, weighted_values, other, lam, axis):
    """Ridge solve for every row of ``weights`` against the fixed factor ``other``.

    ``other`` is ``m x k`` (one factor row per column of ``weights``).  Row
    ``i`` solves ``(sum_j w_ij o_j o_j^T + lam I) z_i = sum_j w_ij m_ij o_j``.
    """
    m, k = other.shape
    rhs = weighted_values @ other
    if k == 1:
        gram = weights @ (other[:, 0] * other[:, 0]) + lam
        if lam == 0.0:
            bad = np.flatnonzero(gram <= 0.0)
            if bad.size:
                raise SingularSystemError(axis, int(bad[0]))
        return rhs / gram[:, None]
    outer = (other[:, :, None] * other[:, None, :]).reshape(m, k * k)
    gram = (weights @ outer).reshape(-1, k, k)
    gram += lam * np.eye(k)
    if lam == 0.0:
        counts = weights.sum(axis=1)
        short = np.flatnonzero(counts < k)
        if short.size:
            raise SingularSystemError(axis, int(short[0]))
    try:
        return np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        for i in range(gram.shape[0]):
            try:
                np.linalg.solve(gram[i], rhs[i])
            except np.linalg.LinAlgError:
                raise SingularSystemError(axis, i) from None
        raise


def _observed_coords(matrix: UtilityMatrix):
    # flatnonzero + divmod is several times faster than 2-D nonzero.
    flat = np.flatnonzero(matrix.observed)
    rows, cols = np.divmod(flat, matrix.n_cols)
    return rows, cols, matrix.values.ravel()[flat]


def _sweeper(matrix: UtilityMatrix, lam: float, rank: int, coords):
    """Return ``sweep(X, Y) -> (X_new, Y_new, objective)`` for one full ALS sweep."""
    weights = matrix.observed.astype(np.float64)
    wv = matrix.values * weights
    rows, cols, seen = coords

    def sweep_rank1(X, Y):
        # Same updates as _solve_block with k = 1, on plain vectors.
        y = Y[0]
        gram = weights @ (y * y) + lam
        if lam == 0.0 and not gram.all():
            raise SingularSystemError("row", int(np.flatnonzero(gram == 0.0)[0]))
        x = (wv @ y) / gram
        gram = (x * x) @ weights + lam
        if lam == 0.0 and not gram.all():
            raise SingularSystemError("column", int(np.flatnonzero(gram == 0.0)[0]))
        y = (x @ wv) / gram
        resid = seen - x[rows] * y[cols]
        obj = float(resid @ resid + lam * (x @ x + y @ y))
        return x[:, None], y[None, :], obj

    if rank == 1:
        return sweep_rank1

    weights_t = np.ascontiguousarray(weights.T)
    wv_t = np.ascontiguousarray(wv.T)

    def sweep(X, Y):
        X_new = _solve_block(weights, wv, Y.T, lam, "row")
        Y_new = _solve_block(weights_t, wv_t, X_new, lam, "column").T
        return X_new, Y_new, _objective(rows, cols, seen, X_new, Y_new, lam)

    return sweep


def init_factors(n_rows: int, n_cols: int, rank: int, seed: int) -> FactorPair:
    """Uniform entries in ``[-0.5, 0.5] / sqrt(rank)`` from a seeded generator."""
    rng = np.random.default_rng(seed)
    scale = 0.5 / np.sqrt(rank)
    X = rng.uniform(-scale, scale, size=(n_rows, rank))
    Y = rng.uniform(-scale, scale, size=(rank, n_cols))
    return FactorPair(X, Y)


def merge_completed(matrix: UtilityMatrix, factors: FactorPair, retain_observed: bool = True) -> UtilityMatrix:
    """Fill unobserved cells from ``X @ Y`` clamped to the utility range.

    Observed cells are copied verbatim unless ``retain_observed`` is False, in
    which case every cell comes from the factorisation.
    """
    _check_shapes(matrix, factors)
    lo, hi = matrix.utility_range
    predicted = np.clip(factors.product(), lo, hi)
    values = np.where(matrix.observed, matrix.values, predicted) if retain_observed else predicted
    return matrix._derive(values, np.ones(matrix.shape, dtype=bool))


def als_complete(
    matrix: UtilityMatrix,
    params: AlsParams,
    retain_observed: bool = True,
    on_sweep: Callable[[np.ndarray, np.ndarray], None] | None = None,
) -> CompletionResult:
    """Run ALS from seeded initial factors until the sweep cap or convergence.

    Convergence means the relative objective decrease dropped below
    ``params.tolerance``.  ``on_sweep`` receives ``(X, Y)`` after every
    accepted sweep.
    """
    n, m = matrix.shape
    k = params.rank
    if k > min(n, m):
        raise InputError(f"rank {k} exceeds min dimension of a {n}x{m} matrix")
    if matrix.n_observed == 0:
        raise InputError("cannot complete a matrix with no observed cells")

    lam = float(params.lam)
    coords = _observed_coords(matrix)
    sweep = _sweeper(matrix, lam, k, coords)

    init = init_factors(n, m, k, params.init_seed)
    X, Y = init.X, init.Y
    prev = _objective(*coords, X, Y, lam)
    trace: list[float] = []
    for _ in range(params.sweeps):
        X_new, Y_new, obj = sweep(X, Y)
        # Every factor entry reaches the objective (through a residual, or the
        # penalty when lam > 0), so a non-finite factor shows up here.
        if not math.isfinite(obj):
            raise NumericalError("non-finite factor values during ALS")
        if obj > prev:
            # Only rounding can do this once converged; keep the better factors.
            break
        X, Y = X_new, Y_new
        trace.append(obj)
        if on_sweep is not None:
            on_sweep(X, Y)
        if (prev - obj) / max(prev, 1e-12) < params.tolerance:
            break
        prev = obj

    factors = FactorPair(X, Y)
    completed = merge_completed(matrix, factors, retain_observed=retain_observed)
    return CompletionResult(completed, factors, trace, len(trace))
