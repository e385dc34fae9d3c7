"""JSONL readers and writers for candidate lists and score matrices.

Candidates, one record per line::

    {"segment_id": "s1", "source": "Hallo Welt", "candidates": ["hello world", ...]}

Matrices, one record per line (``null`` marks an unobserved cell in partial
matrices)::

    {"segment_id": "s1", "utility": "chrf", "range": [0, 100], "n": 2,
     "rows": [[100.0, 41.2], [39.8, 100.0]]}
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import InputError
from .matrix import SegmentCandidates, UtilityMatrix
from .utility import PrecomputedStore


def _records(path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def load_candidates(path) -> list[SegmentCandidates]:
    out: list[SegmentCandidates] = []
    seen: set[str] = set()
    for lineno, record in _records(path):
        where = f"{path}:{lineno}"
        segment_id = record.get("segment_id")
        if not isinstance(segment_id, str):
            raise InputError(f"{where}: segment_id must be a string")
        if segment_id in seen:
            raise InputError(f"{where}: duplicate segment_id {segment_id!r}")
        source = record.get("source")
        if source is not None and not isinstance(source, str):
            raise InputError(f"{where}: source must be a string or null")
        candidates = record.get("candidates")
        if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
            raise InputError(f"{where}: candidates must be a list of strings")
        if len(candidates) < 2:
            raise InputError(f"{where}: segment {segment_id!r} has fewer than 2 candidates")
        seen.add(segment_id)
        out.append(SegmentCandidates.from_texts(segment_id, candidates, source))
    return out


def write_candidates(path, segments: Iterable[SegmentCandidates]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for seg in segments:
            record = {"segment_id": seg.segment_id, "source": seg.source, "candidates": seg.texts}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _parse_matrix(record: dict, where: str, allow_missing: bool) -> tuple[str, UtilityMatrix]:
    segment_id = record.get("segment_id")
    if not isinstance(segment_id, str):
        raise InputError(f"{where}: segment_id must be a string")
    tag = f"{where}: segment {segment_id!r}"
    utility = record.get("utility")
    if not isinstance(utility, str):
        raise InputError(f"{tag}: utility must be a string")
    rng = record.get("range")
    if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, (int, float)) for x in rng)):
        raise InputError(f"{tag}: range must be [lo, hi]")
    lo, hi = float(rng[0]), float(rng[1])
    if not lo < hi:
        raise InputError(f"{tag}: range must satisfy lo < hi")
    n = record.get("n")
    rows = record.get("rows")
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{tag}: n must be a positive integer")
    if not isinstance(rows, list) or len(rows) != n:
        raise InputError(f"{tag}: expected {n} rows")
    values = np.zeros((n, n))
    observed = np.ones((n, n), dtype=bool)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise InputError(f"{tag}: row {i} must hold exactly {n} values")
        for j, cell in enumerate(row):
            if cell is None and allow_missing:
                observed[i, j] = False
                continue
            if isinstance(cell, bool) or not isinstance(cell, (int, float)):
                raise InputError(f"{tag}: cell ({i}, {j}) is not a number")
            if not math.isfinite(cell):
                raise InputError(f"{tag}: cell ({i}, {j}) is not finite")
            if not lo <= cell <= hi:
                raise InputError(f"{tag}: cell ({i}, {j}) = {cell} outside [{lo}, {hi}]")
            values[i, j] = cell
    return segment_id, UtilityMatrix(values, observed, utility, (lo, hi))


def load_matrices(path, allow_missing: bool = False) -> PrecomputedStore | dict[str, UtilityMatrix]:
    """Read a matrix file.

    Returns a :class:`PrecomputedStore` of fully observed matrices, or, with
    ``allow_missing=True``, a plain dict whose matrices may contain unobserved
    cells.
    """
    matrices: dict[str, UtilityMatrix] = {}
    utility_name = None
    for lineno, record in _records(path):
        where = f"{path}:{lineno}"
        segment_id, matrix = _parse_matrix(record, where, allow_missing)
        if segment_id in matrices:
            raise InputError(f"{where}: duplicate segment_id {segment_id!r}")
        if utility_name is None:
            utility_name = matrix.utility_name
        elif matrix.utility_name != utility_name:
            raise InputError(
                f"{where}: segment {segment_id!r} uses utility {matrix.utility_name!r}, expected {utility_name!r}"
            )
        matrices[segment_id] = matrix
    if allow_missing:
        return matrices
    return PrecomputedStore(matrices)


def matrix_record(segment_id: str, matrix: UtilityMatrix) -> dict:
    rows = [
        [float(v) if seen else None for v, seen in zip(vals, mask)]
        for vals, mask in zip(matrix.values.tolist(), matrix.observed.tolist())
    ]
    lo, hi = matrix.utility_range
    return {
        "segment_id": segment_id,
        "utility": matrix.utility_name,
        "range": [lo, hi],
        "n": matrix.n_rows,
        "rows": rows,
    }


def write_matrices(path, matrices: Mapping[str, UtilityMatrix]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for segment_id, matrix in matrices.items():
            if matrix.n_rows != matrix.n_cols:
                raise InputError(f"segment {segment_id!r}: only square matrices can be written")
            handle.write(json.dumps(matrix_record(segment_id, matrix)) + "\n")
