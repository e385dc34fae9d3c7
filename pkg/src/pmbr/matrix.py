"""Utility-matrix representation, observation sampling and the vanilla MBR rule.

Cell ``(i, j)`` of a :class:`UtilityMatrix` holds ``U(h_i, h_j)``: candidate ``i``
scored against pseudo-reference ``j``.  Observation is tracked by a parallel
boolean mask, so a legitimate score of 0 is never confused with a missing one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, UtilityError


@dataclass(frozen=True)
class Hypothesis:
    index: int
    text: str


@dataclass(frozen=True)
class SegmentCandidates:
    segment_id: str
    hypotheses: tuple[Hypothesis, ...]
    source: str | None = None

    def __post_init__(self):
        if len(self.hypotheses) < 2:
            raise InputError(
                f"segment {self.segment_id!r}: need at least 2 candidates, got {len(self.hypotheses)}"
            )
        for pos, hyp in enumerate(self.hypotheses):
            if hyp.index != pos:
                raise InputError(f"segment {self.segment_id!r}: hypothesis {pos} has index {hyp.index}")

    @classmethod
    def from_texts(cls, segment_id: str, texts: Sequence[str], source: str | None = None) -> SegmentCandidates:
        return cls(segment_id, tuple(Hypothesis(i, t) for i, t in enumerate(texts)), source)

    @property
    def texts(self) -> list[str]:
        return [h.text for h in self.hypotheses]

    def __len__(self) -> int:
        return len(self.hypotheses)


@dataclass(frozen=True)
class UtilityMatrix:
    """Dense score matrix with an observation mask.

    Both arrays are copied and made read-only on construction.  Unobserved
    cells are stored as 0.0 and must not be interpreted.
    """

    values: np.ndarray
    observed: np.ndarray
    utility_name: str = "unknown"
    utility_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        observed = np.array(self.observed, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InputError(f"utility matrix must be a non-empty 2-D array, got shape {values.shape}")
        if observed.shape != values.shape:
            raise InputError(f"mask shape {observed.shape} does not match values shape {values.shape}")
        lo, hi = (float(x) for x in self.utility_range)
        if not lo < hi:
            raise InputError(f"utility range must satisfy lo < hi, got ({lo}, {hi})")
        seen = values[observed]
        if not np.all(np.isfinite(seen)):
            raise InputError("observed cells must be finite")
        if seen.size and (seen.min() < lo or seen.max() > hi):
            raise InputError(
                f"observed cells must lie in [{lo}, {hi}], got [{seen.min()}, {seen.max()}]"
            )
        values = np.where(observed, values, 0.0)
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "utility_range", (lo, hi))

    @classmethod
    def full(cls, values, utility_name: str = "unknown", utility_range=(0.0, 1.0)) -> UtilityMatrix:
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool), utility_name, utility_range)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def fully_observed(self) -> bool:
        return bool(self.observed.all())

    def with_values(self, values, observed=None, utility_range=None) -> UtilityMatrix:
        return UtilityMatrix(
            values,
            self.observed if observed is None else observed,
            self.utility_name,
            self.utility_range if utility_range is None else utility_range,
        )

    def _derive(self, values, observed=None, utility_range=None) -> UtilityMatrix:
        """``with_values`` without validation or copying.

        Only for results that are valid by construction: float64 arrays the
        caller owns, in range, zero wherever unobserved.
        """
        out = object.__new__(UtilityMatrix)
        observed = self.observed if observed is None else observed
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(out, "values", values)
        object.__setattr__(out, "observed", observed)
        object.__setattr__(out, "utility_name", self.utility_name)
        object.__setattr__(out, "utility_range", self.utility_range if utility_range is None else utility_range)
        return out


@dataclass(frozen=True)
class Budget:
    """Fraction ``b`` of the ``N*N`` utility computations a method may spend."""

    fraction: Fraction

    def __post_init__(self):
        frac = Fraction(self.fraction)
        if not 0 < frac <= 1:
            raise InputError(f"budget must lie in (0, 1], got {frac}")
        object.__setattr__(self, "fraction", frac)

    @classmethod
    def parse(cls, text: str | float | Fraction | Budget) -> Budget:
        if isinstance(text, Budget):
            return text
        if isinstance(text, str):
            try:
                return cls(Fraction(text.strip()))
            except (ValueError, ZeroDivisionError) as exc:
                raise InputError(f"cannot parse budget {text!r}") from exc
        return cls(Fraction(text))

    def observed_count(self, n: int) -> int:
        """``ceil(n^2 * b)``, computed exactly."""
        return math.ceil(n * n * self.fraction)

    def __float__(self) -> float:
        return float(self.fraction)

    def __str__(self) -> str:
        return f"{self.fraction.numerator}/{self.fraction.denominator}"

    def __lt__(self, other: Budget) -> bool:
        return self.fraction < other.fraction


@dataclass(frozen=True)
class Omega:
    """Observed coordinates, kept sorted in row-major order."""

    n: int
    rows: np.ndarray
    cols: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def coords(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(self.rows, self.cols)}

    def mask(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=bool)
        out[self.rows, self.cols] = True
        return out

    @classmethod
    def from_flat(cls, n: int, flat) -> Omega:
        flat = np.sort(np.asarray(flat, dtype=np.int64))
        rows, cols = np.divmod(flat, n)
        return cls(n, rows, cols)

    @classmethod
    def from_coords(cls, n: int, coords) -> Omega:
        flat = []
        for i, j in coords:
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"coordinate ({i}, {j}) outside {n}x{n} grid")
            flat.append(i * n + j)
        if len(set(flat)) != len(flat):
            raise InputError("duplicate coordinates in omega")
        return cls.from_flat(n, flat)


UtilityCallable = Callable[[str, str], float]


def _score_fn(utility) -> tuple[UtilityCallable, str, tuple[float, float]]:
    # Accept a UtilityFn-like object or a bare callable.
    score = getattr(utility, "score", utility)
    name = getattr(utility, "name", getattr(utility, "__name__", "unknown"))
    rng = tuple(getattr(utility, "range", (-math.inf, math.inf)))
    return score, name, rng


def _matrix_range(rng, seen: np.ndarray) -> tuple[float, float]:
    # Bare callables declare no range: fall back to the observed span.
    lo, hi = rng
    if math.isinf(lo) or math.isinf(hi):
        lo = float(seen.min()) if seen.size else 0.0
        hi = float(seen.max()) if seen.size else 1.0
        if lo == hi:
            hi = lo + 1.0
    return lo, hi


def fill_partial(candidates: SegmentCandidates, omega: Omega, utility) -> UtilityMatrix:
    """Score exactly the cells in ``omega``; every other cell stays unobserved."""
    n = len(candidates)
    if omega.n != n:
        raise InputError(f"omega is for a {omega.n}x{omega.n} grid but there are {n} candidates")
    score, name, rng = _score_fn(utility)
    texts = candidates.texts
    values = np.zeros((n, n))
    for i, j in zip(omega.rows.tolist(), omega.cols.tolist()):
        try:
            values[i, j] = score(texts[i], texts[j])
        except Exception as exc:
            raise UtilityError(i, j, exc) from exc
    mask = omega.mask()
    return UtilityMatrix(values, mask, name, _matrix_range(rng, values[mask]))


def build_full_matrix(candidates: SegmentCandidates, utility) -> UtilityMatrix:
    n = len(candidates)
    return fill_partial(candidates, Omega.from_flat(n, np.arange(n * n)), utility)


def row_means(matrix: UtilityMatrix) -> np.ndarray:
    if not matrix.fully_observed:
        raise InputError("row_means needs a fully observed matrix")
    return matrix.values.mean(axis=1)


@dataclass(frozen=True)
class DecodeChoice:
    index: int
    score: float


def _argmax_lowest(scores: np.ndarray) -> int:
    # np.argmax already returns the first maximal index.
    return int(np.argmax(scores))


def mbr_select(matrix: UtilityMatrix) -> DecodeChoice:
    """Pick the row with the highest average; ties go to the lowest index."""
    means = row_means(matrix)
    best = _argmax_lowest(means)
    return DecodeChoice(best, float(means[best]))


def sample_omega(n: int, budget: Budget, rng_seed: int, stratified: bool = False) -> Omega:
    """Draw ``ceil(n^2 b)`` distinct cells uniformly without replacement.

    With ``stratified=True`` every row and column receives at least one
    observation (needs ``ceil(n^2 b) >= n``).
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    budget = Budget.parse(budget)
    size = budget.observed_count(n)
    rng = np.random.default_rng(rng_seed)
    if not stratified:
        return Omega.from_flat(n, rng.choice(n * n, size=size, replace=False))
    if size < n:
        raise InputError(f"stratified sampling needs at least {n} cells, budget allows {size}")
    perm = rng.permutation(n)
    seeded = np.arange(n) * n + perm
    rest = np.setdiff1d(np.arange(n * n), seeded, assume_unique=True)
    extra = rng.choice(rest, size=size - n, replace=False)
    return Omega.from_flat(n, np.concatenate([seeded, extra]))


def observe(matrix: UtilityMatrix, omega: Omega) -> UtilityMatrix:
    """Mask a fully observed matrix down to ``omega`` (simulation mode)."""
    if matrix.shape != (omega.n, omega.n):
        raise InputError(f"omega is for a {omega.n}x{omega.n} grid, matrix is {matrix.shape}")
    mask = omega.mask()
    if not matrix.observed[mask].all():
        raise InputError("omega touches cells that are not observed in the source matrix")
    return matrix._derive(np.where(mask, matrix.values, 0.0), mask)


def _check_indices(indices: Sequence[int], bound: int, what: str) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise InputError(f"{what} index list is empty")
    if idx.min() < 0 or idx.max() >= bound:
        raise InputError(f"{what} index out of range [0, {bound})")
    if np.unique(idx).size != idx.size:
        raise InputError(f"duplicate {what} index")
    return idx


def restrict_rows_cols(matrix: UtilityMatrix, rows: Sequence[int], cols: Sequence[int]) -> UtilityMatrix:
    r = _check_indices(rows, matrix.n_rows, "row")
    c = _check_indices(cols, matrix.n_cols, "column")
    sel = np.ix_(r, c)
    return matrix._derive(matrix.values[sel], matrix.observed[sel])
