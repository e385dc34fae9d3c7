"""FMBR, PMBR, NxK and SxS decoding under exact utility-call accounting.

Every method takes a *score source*: either a precomputed full matrix
(simulation mode, where a "utility call" is one cell read) or a candidate list
plus a utility function (each call scores one pair).  The accounting is the
same either way.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .completion import AlsParams, CompletionResult, als_complete
from .errors import InputError, UtilityError
from .matrix import (
    Budget,
    Omega,
    SegmentCandidates,
    UtilityMatrix,
    _matrix_range,
    _score_fn,
    fill_partial,
    mbr_select,
    observe,
    restrict_rows_cols,
    row_means,
    sample_omega,
)
from .utility import denormalize, normalize


class Method(str, enum.Enum):
    FMBR = "fmbr"
    PMBR = "pmbr"
    NXK = "nxk"
    SXS = "sxs"

    @classmethod
    def parse(cls, text: str | Method) -> Method:
        try:
            return cls(text.lower() if isinstance(text, str) else text)
        except ValueError:
            raise InputError(f"unknown method {text!r}; choose from {[m.value for m in cls]}") from None

    def __str__(self) -> str:
        return self.value


class MatrixSource:
    """Reads cells from a fully observed matrix."""

    def __init__(self, matrix: UtilityMatrix):
        if matrix.n_rows != matrix.n_cols or not matrix.fully_observed:
            raise InputError("a matrix source must be square and fully observed")
        self.matrix = matrix

    @property
    def n(self) -> int:
        return self.matrix.n_rows

    def full(self) -> UtilityMatrix:
        return self.matrix

    def partial(self, omega: Omega) -> UtilityMatrix:
        return observe(self.matrix, omega)

    def block(self, rows, cols) -> UtilityMatrix:
        return restrict_rows_cols(self.matrix, rows, cols)


class CandidateSource:
    """Scores candidate pairs on demand with a utility function."""

    def __init__(self, candidates: SegmentCandidates, utility):
        self.candidates = candidates
        self.utility = utility

    @property
    def n(self) -> int:
        return len(self.candidates)

    def full(self) -> UtilityMatrix:
        idx = range(self.n)
        return self.block(idx, idx)

    def partial(self, omega: Omega) -> UtilityMatrix:
        return fill_partial(self.candidates, omega, self.utility)

    def block(self, rows, cols) -> UtilityMatrix:
        score, name, rng = _score_fn(self.utility)
        texts = self.candidates.texts
        rows, cols = list(rows), list(cols)
        values = np.empty((len(rows), len(cols)))
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                try:
                    values[a, b] = score(texts[i], texts[j])
                except Exception as exc:
                    raise UtilityError(i, j, exc) from exc
        return UtilityMatrix.full(values, name, _matrix_range(rng, values.ravel()))


Source = Union[MatrixSource, CandidateSource, UtilityMatrix]


def as_source(source: Source) -> MatrixSource | CandidateSource:
    if isinstance(source, UtilityMatrix):
        return MatrixSource(source)
    return source


@dataclass(frozen=True)
class DecodeResult:
    method: Method
    chosen_index: int
    expected_utilities: np.ndarray
    utility_calls: int
    budget: Budget
    completion: CompletionResult | None = None


FULL_BUDGET = Budget(1)


def nxk_references(n: int, budget: Budget) -> int:
    """``K = max(1, floor(N b))``."""
    return max(1, math.floor(n * Budget.parse(budget).fraction))


def sxs_side(n: int, budget: Budget) -> int:
    """``S = max(2, floor(N sqrt(b)))``, computed exactly as an integer square root."""
    frac = Budget.parse(budget).fraction
    side = math.isqrt((n * n * frac.numerator) // frac.denominator)
    return min(n, max(2, side))


def fmbr(source: Source) -> DecodeResult:
    src = as_source(source)
    matrix = src.full()
    means = row_means(matrix)
    choice = mbr_select(matrix)
    return DecodeResult(Method.FMBR, choice.index, means, src.n * src.n, FULL_BUDGET)


def pmbr(
    source: Source,
    budget: Budget,
    als: AlsParams,
    rng_seed: int,
    stratified: bool = False,
    retain_observed: bool = True,
) -> DecodeResult:
    """Observe a random subset of cells, complete it with ALS, then pick the best row."""
    src = as_source(source)
    budget = Budget.parse(budget)
    n = src.n
    if n < 2:
        raise InputError("PMBR needs at least 2 candidates")
    omega = sample_omega(n, budget, rng_seed, stratified=stratified)
    partial = src.partial(omega)
    if len(omega) == n * n:
        choice = mbr_select(partial)
        return DecodeResult(Method.PMBR, choice.index, row_means(partial), len(omega), budget)
    result = als_complete(normalize(partial), als, retain_observed=retain_observed)
    completed = denormalize(result.completed, partial.utility_range)
    choice = mbr_select(completed)
    return DecodeResult(Method.PMBR, choice.index, row_means(completed), len(omega), budget, result)


def nxk(source: Source, budget: Budget, rng_seed: int) -> DecodeResult:
    """Score all N candidates against K randomly drawn pseudo-references."""
    src = as_source(source)
    budget = Budget.parse(budget)
    n = src.n
    k = nxk_references(n, budget)
    rng = np.random.default_rng(rng_seed)
    refs = np.sort(rng.choice(n, size=k, replace=False))
    block = src.block(range(n), refs)
    choice = mbr_select(block)
    return DecodeResult(Method.NXK, choice.index, row_means(block), n * k, budget)


def sxs(source: Source, budget: Budget, rng_seed: int) -> DecodeResult:
    """Full MBR on S randomly drawn candidates; the index is reported in the original list."""
    src = as_source(source)
    budget = Budget.parse(budget)
    n = src.n
    s = sxs_side(n, budget)
    rng = np.random.default_rng(rng_seed)
    subset = np.sort(rng.choice(n, size=s, replace=False))
    block = src.block(subset, subset)
    choice = mbr_select(block)
    return DecodeResult(Method.SXS, int(subset[choice.index]), row_means(block), s * s, budget)


def decode(
    method: Method | str,
    source: Source,
    budget: Budget | str = FULL_BUDGET,
    als: AlsParams | None = None,
    rng_seed: int = 0,
    **pmbr_options,
) -> DecodeResult:
    method = Method.parse(method)
    if method is Method.FMBR:
        return fmbr(source)
    if method is Method.PMBR:
        return pmbr(source, budget, als or AlsParams(), rng_seed, **pmbr_options)
    if method is Method.NXK:
        return nxk(source, budget, rng_seed)
    return sxs(source, budget, rng_seed)
