"""Utility functions ``U(hypothesis, reference)`` and score-scale helpers."""
from __future__ import annotations

from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import InputError
from .matrix import UtilityMatrix

CHRF_ORDER = 6
CHRF_BETA = 2.0


@dataclass(frozen=True)
class UtilityFn:
    name: str
    range: tuple[float, float]
    score: Callable[[str, str], float]

    def __post_init__(self):
        if not self.range[0] < self.range[1]:
            raise InputError(f"utility {self.name!r}: range must satisfy lo < hi")

    def __call__(self, hypothesis: str, reference: str) -> float:
        return self.score(hypothesis, reference)


def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def chrf_score(hypothesis: str, reference: str, order: int = CHRF_ORDER, beta: float = CHRF_BETA) -> float:
    """Sentence-level chrF on character n-grams, whitespace kept.

    Precision and recall are averaged over the orders for which both strings
    have at least one n-gram, then combined into an F-beta score on a 0-100
    scale.  Two empty strings score 100; exactly one empty string scores 0.
    """
    if not hypothesis or not reference:
        return 100.0 if hypothesis == reference else 0.0
    precision = recall = 0.0
    effective = 0
    for n in range(1, order + 1):
        hyp = _char_ngrams(hypothesis, n)
        ref = _char_ngrams(reference, n)
        if not hyp or not ref:
            break
        matches = sum((hyp & ref).values())
        precision += matches / sum(hyp.values())
        recall += matches / sum(ref.values())
        effective += 1
    precision /= effective
    recall /= effective
    if precision + recall == 0.0:
        return 0.0
    b2 = beta * beta
    return 100.0 * (1 + b2) * precision * recall / (b2 * precision + recall)


CHRF = UtilityFn("chrf", (0.0, 100.0), chrf_score)

_REGISTRY = {"chrf": CHRF}


def get_utility(name: str) -> UtilityFn:
    try:
        return _REGISTRY[name.lower()]
    except KeyError:
        raise InputError(f"unknown utility {name!r}; available: {sorted(_REGISTRY)}") from None


class PrecomputedStore(Mapping):
    """Read-only mapping ``segment_id -> fully observed square UtilityMatrix``."""

    def __init__(self, matrices: Mapping[str, UtilityMatrix] | None = None):
        self._matrices: dict[str, UtilityMatrix] = {}
        self.utility_name: str | None = None
        for segment_id, matrix in (matrices or {}).items():
            self._add(segment_id, matrix)

    def _add(self, segment_id: str, matrix: UtilityMatrix) -> None:
        if segment_id in self._matrices:
            raise InputError(f"duplicate segment_id {segment_id!r}")
        if matrix.n_rows != matrix.n_cols:
            raise InputError(f"segment {segment_id!r}: matrix must be square, got {matrix.shape}")
        if not matrix.fully_observed:
            raise InputError(f"segment {segment_id!r}: matrix must be fully observed")
        if self.utility_name is None:
            self.utility_name = matrix.utility_name
        elif matrix.utility_name != self.utility_name:
            raise InputError(
                f"segment {segment_id!r}: utility {matrix.utility_name!r} differs from {self.utility_name!r}"
            )
        self._matrices[segment_id] = matrix

    def __getitem__(self, segment_id: str) -> UtilityMatrix:
        return self._matrices[segment_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self._matrices)

    def __len__(self) -> int:
        return len(self._matrices)


def precomputed_lookup(store: PrecomputedStore, segment_id: str) -> UtilityMatrix:
    try:
        return store[segment_id]
    except KeyError:
        raise InputError(f"unknown segment_id {segment_id!r}") from None


def normalize(matrix: UtilityMatrix) -> UtilityMatrix:
    """Map observed cells affinely from the declared range onto [0, 1]."""
    lo, hi = matrix.utility_range
    scaled = (matrix.values - lo) / (hi - lo)
    # Guard the [0, 1] bounds against rounding at the range ends.
    scaled = np.clip(scaled, 0.0, 1.0)
    if not matrix.fully_observed:
        scaled *= matrix.observed
    return matrix._derive(scaled, utility_range=(0.0, 1.0))


def denormalize(matrix: UtilityMatrix, utility_range: tuple[float, float]) -> UtilityMatrix:
    lo, hi = (float(x) for x in utility_range)
    if not lo < hi:
        raise InputError(f"utility range must satisfy lo < hi, got ({lo}, {hi})")
    src_lo, src_hi = matrix.utility_range
    unit = (matrix.values - src_lo) / (src_hi - src_lo)
    values = np.clip(lo + unit * (hi - lo), lo, hi)
    if not matrix.fully_observed:
        values *= matrix.observed
    return matrix._derive(values, utility_range=(lo, hi))
