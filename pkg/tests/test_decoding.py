import math

import numpy as np
import pytest

from conftest import rank1
from oracles import mbr_bruteforce
from pmbr import (
    CHRF,
    AlsParams,
    Budget,
    CandidateSource,
    InputError,
    Method,
    SegmentCandidates,
    SingularSystemError,
    UtilityFn,
    UtilityMatrix,
    decode,
    fmbr,
    nxk,
    pmbr,
    sxs,
)
from pmbr.decoding import nxk_references, sxs_side

BUDGETS = ["1/32", "1/16", "1/8", "1/4", "1/2", "1/1"]


def random_matrix(rng, n):
    return UtilityMatrix.full(rng.random((n, n)))


class TestAccounting:
    def test_pmbr_counts_n128(self):
        m = rank1(128, 0)
        calls = [pmbr(m, b, AlsParams(rank=2, sweeps=2), 1).utility_calls for b in BUDGETS]
        assert calls == [512, 1024, 2048, 4096, 8192, 16384]

    def test_nxk_shapes_n128(self):
        assert [nxk_references(128, b) for b in BUDGETS] == [4, 8, 16, 32, 64, 128]

    def test_sxs_sides_n128(self):
        assert [sxs_side(128, b) for b in BUDGETS] == [22, 32, 45, 64, 90, 128]

    @pytest.mark.parametrize("n", [32, 64, 128, 256])
    def test_formulas_on_budget_grid(self, n):
        m = rank1(n, n)
        for b in BUDGETS:
            frac = Budget.parse(b).fraction
            k = nxk(m, b, 3)
            s = sxs(m, b, 3)
            assert k.utility_calls == n * math.floor(n * frac) <= n * n
            assert s.utility_calls == math.floor(n * math.sqrt(frac)) ** 2 <= n * n
            assert Budget.parse(b).observed_count(n) == math.ceil(n * n * frac) <= n * n

    def test_fmbr_counts_cells(self, rng):
        assert fmbr(random_matrix(rng, 9)).utility_calls == 81

    def test_floors_at_tiny_budget(self):
        assert nxk_references(4, "1/64") == 1
        assert sxs_side(4, "1/64") == 2


class TestFmbr:
    def test_trivial(self):
        assert fmbr(UtilityMatrix.full([[1, 0], [0, 0]])).chosen_index == 0

    def test_matches_bruteforce(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 17))
            values = rng.random((n, n))
            assert fmbr(UtilityMatrix.full(values)).chosen_index == mbr_bruteforce(values.tolist())

    def test_candidate_source_calls(self):
        calls = []

        def score(h, r):
            calls.append((h, r))
            return float(len(set(h) & set(r)))

        seg = SegmentCandidates.from_texts("s", ["abc", "abd", "xyz", "ab"])
        util = UtilityFn("overlap", (0.0, 26.0), score)
        result = fmbr(CandidateSource(seg, util))
        assert result.utility_calls == len(calls) == 16
        assert result.chosen_index == 0


class TestFullBudget:
    @pytest.mark.parametrize("method", list(Method))
    def test_every_method_matches_fmbr(self, rng, method):
        for seed in range(20):
            m = random_matrix(rng, 12)
            assert decode(method, m, "1/1", AlsParams(rank=2), seed).chosen_index == fmbr(m).chosen_index

    def test_pmbr_bypass_has_no_completion(self, rng):
        assert pmbr(random_matrix(rng, 6), "1", AlsParams(rank=1), 0).completion is None


class TestInvariance:
    @pytest.mark.parametrize("method", [Method.FMBR, Method.NXK, Method.SXS])
    def test_affine(self, rng, method):
        a, c = 3.5, -2.0
        for seed in range(30):
            values = rng.random((16, 16))
            m = UtilityMatrix.full(values, utility_range=(0, 1))
            moved = UtilityMatrix.full(a * values + c, utility_range=(c, a + c))
            first = decode(method, m, "1/4", None, seed).chosen_index
            assert decode(method, moved, "1/4", None, seed).chosen_index == first

    def test_affine_pmbr_without_regularisation(self, rng):
        a, c = 20.0, 5.0
        params = AlsParams(lam=0.0, rank=1, sweeps=10)
        for seed in range(20):
            values = rank1(16, seed, noise=0.05).values
            m = UtilityMatrix.full(values, utility_range=(0, 1))
            moved = UtilityMatrix.full(a * values + c, utility_range=(c, a + c))
            assert pmbr(m, "1/2", params, seed).chosen_index == pmbr(moved, "1/2", params, seed).chosen_index

    @pytest.mark.parametrize("method", list(Method))
    def test_deterministic(self, rng, method):
        m = rank1(24, 2, noise=0.05)
        a = decode(method, m, "1/8", AlsParams(rank=2), 11)
        b = decode(method, m, "1/8", AlsParams(rank=2), 11)
        assert a.chosen_index == b.chosen_index
        np.testing.assert_array_equal(a.expected_utilities, b.expected_utilities)


class TestPmbr:
    def test_rank1_agreement(self):
        m = rank1(128, 5)
        target = fmbr(m).chosen_index
        params = AlsParams(lam=1e-4, rank=1, sweeps=50)
        hits = sum(pmbr(m, "1/8", params.with_seed(s), s).chosen_index == target for s in range(100))
        assert hits >= 95

    def test_completion_attached(self):
        result = pmbr(rank1(16, 1), "1/4", AlsParams(rank=1), 0)
        assert result.completion is not None
        assert result.completion.completed.fully_observed
        assert result.expected_utilities.shape == (16,)

    def test_singular_propagates(self):
        # 4 of 256 cells cannot cover every row.
        with pytest.raises(SingularSystemError):
            pmbr(rank1(16, 1), "1/64", AlsParams(lam=0.0, rank=1), 0)

    def test_candidate_source_counts_exactly(self):
        calls = []

        def score(h, r):
            calls.append(1)
            return CHRF.score(h, r)

        texts = [f"the cat sat on mat {i}" for i in range(10)]
        src = CandidateSource(SegmentCandidates.from_texts("s", texts), UtilityFn("chrf", (0, 100), score))
        result = pmbr(src, "1/4", AlsParams(rank=1), 3)
        assert result.utility_calls == len(calls) == 25

    def test_needs_two_candidates(self):
        with pytest.raises(InputError):
            pmbr(UtilityMatrix.full([[1.0]]), "1/2", AlsParams(rank=1), 0)


class TestBaselines:
    def test_sxs_index_in_original_list(self, rng):
        values = rng.random((20, 20))
        m = UtilityMatrix.full(values)
        for seed in range(20):
            result = sxs(m, "1/4", seed)
            subset = np.sort(np.random.default_rng(seed).choice(20, size=10, replace=False))
            assert result.chosen_index in subset
            local = mbr_bruteforce(values[np.ix_(subset, subset)].tolist())
            assert result.chosen_index == subset[local]

    def test_nxk_uses_k_columns(self, rng):
        values = rng.random((16, 16))
        m = UtilityMatrix.full(values)
        result = nxk(m, "1/4", 9)
        refs = np.sort(np.random.default_rng(9).choice(16, size=4, replace=False))
        np.testing.assert_allclose(result.expected_utilities, values[:, refs].mean(axis=1))
        assert result.chosen_index == mbr_bruteforce(values[:, refs].tolist())

    def test_unknown_method(self):
        with pytest.raises(InputError):
            Method.parse("beam")
