import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import chrf_bruteforce, mbr_bruteforce, mean_rows_loop
from pmbr import (
    CHRF,
    Budget,
    InputError,
    Omega,
    SegmentCandidates,
    UtilityError,
    UtilityMatrix,
    build_full_matrix,
    fill_partial,
    mbr_select,
    restrict_rows_cols,
    row_means,
    sample_omega,
)
from pmbr.matrix import observe


def seg(*texts):
    return SegmentCandidates.from_texts("s", list(texts))


class TestTypes:
    def test_segment_needs_two_candidates(self):
        with pytest.raises(InputError):
            seg("only")

    def test_empty_text_is_allowed(self):
        assert seg("", "x").texts == ["", "x"]

    def test_matrix_rejects_out_of_range(self):
        with pytest.raises(InputError):
            UtilityMatrix.full([[0.5, 2.0]], utility_range=(0, 1))

    def test_matrix_rejects_nonfinite_observed(self):
        with pytest.raises(InputError):
            UtilityMatrix.full([[np.nan]])

    def test_unobserved_cells_may_hold_anything(self):
        m = UtilityMatrix([[np.nan, 0.2]], [[False, True]])
        assert m.n_observed == 1
        assert m.values[0, 0] == 0.0

    def test_matrix_is_read_only(self):
        m = UtilityMatrix.full([[0.1]])
        with pytest.raises(ValueError):
            m.values[0, 0] = 1.0

    @pytest.mark.parametrize("text", ["0", "-1/2", "3/2", "abc"])
    def test_budget_rejects(self, text):
        with pytest.raises(InputError):
            Budget.parse(text)

    def test_budget_rendering(self):
        assert str(Budget.parse("2/32")) == "1/16"
        assert str(Budget.parse("1")) == "1/1"


class TestBuildFullMatrix:
    def test_identical_hypotheses(self):
        m = build_full_matrix(seg("same", "same"), CHRF)
        np.testing.assert_array_equal(m.values, np.full((2, 2), 100.0))
        assert m.fully_observed

    def test_disjoint(self):
        m = build_full_matrix(seg("abc", "xyz"), CHRF)
        np.testing.assert_array_equal(m.values, [[100.0, 0.0], [0.0, 100.0]])

    def test_matches_oracle_cell_by_cell(self):
        texts = ["the cat sat", "the cat sit", "a dog ran"]
        m = build_full_matrix(seg(*texts), CHRF)
        for i, h in enumerate(texts):
            for j, r in enumerate(texts):
                assert m.values[i, j] == pytest.approx(chrf_bruteforce(h, r), abs=1e-9)

    def test_calls_utility_n_squared_times(self):
        calls = []

        def counting(h, r):
            calls.append((h, r))
            return 0.5

        build_full_matrix(seg("a", "b", "c", "d"), counting)
        assert len(calls) == 16

    def test_utility_failure_names_the_cell(self):
        def bad(h, r):
            if (h, r) == ("b", "a"):
                raise RuntimeError("boom")
            return 0.0

        with pytest.raises(UtilityError) as info:
            build_full_matrix(seg("a", "b"), bad)
        assert (info.value.row, info.value.col) == (1, 0)


class TestRowMeansAndSelect:
    def test_small(self):
        m = UtilityMatrix.full([[1, 0], [0, 0]])
        np.testing.assert_array_equal(row_means(m), [0.5, 0.0])
        assert mbr_select(m).index == 0
        assert mbr_select(m).score == 0.5

    def test_constant(self):
        m = UtilityMatrix.full(np.full((4, 4), 0.3))
        np.testing.assert_allclose(row_means(m), 0.3)

    def test_tie_goes_to_lowest_index(self):
        assert mbr_select(UtilityMatrix.full(np.full((5, 5), 0.7))).index == 0

    def test_random_matches_loop(self, rng):
        values = rng.random((5, 5))
        np.testing.assert_allclose(row_means(UtilityMatrix.full(values)), mean_rows_loop(values.tolist()), rtol=1e-12)

    def test_random_8x8_matches_bruteforce(self, rng):
        for _ in range(50):
            values = rng.random((8, 8))
            assert mbr_select(UtilityMatrix.full(values)).index == mbr_bruteforce(values.tolist())

    def test_rejects_partial(self):
        m = UtilityMatrix([[1.0, 0.0]], [[True, False]])
        with pytest.raises(InputError):
            row_means(m)
        with pytest.raises(InputError):
            mbr_select(m)

    @given(
        st.integers(2, 9),
        st.integers(0, 2**32 - 1),
        st.floats(0.01, 100.0),
        st.floats(-50.0, 50.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_affine_invariance(self, n, seed, a, c):
        values = np.random.default_rng(seed).random((n, n))
        top = np.sort(values.mean(axis=1))
        # Rounding under the map may reorder rows whose means are this close.
        assume(top[-1] - top[-2] > 1e-9)
        lo, hi = -1e4, 1e4
        base = mbr_select(UtilityMatrix.full(values, utility_range=(lo, hi))).index
        moved = mbr_select(UtilityMatrix.full(a * values + c, utility_range=(lo, hi))).index
        assert base == moved

    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_row_means_relative_error(self, m, n, seed):
        values = np.random.default_rng(seed).random((m, n))
        expected = values @ (np.ones(n) / n)
        np.testing.assert_allclose(row_means(UtilityMatrix.full(values)), expected, rtol=1e-12)


class TestSampleOmega:
    def test_budget_counts_n128(self):
        assert len(sample_omega(128, Budget.parse("1/16"), 0)) == 1024
        full = sample_omega(128, Budget.parse("1"), 0)
        assert len(full) == 16384
        assert full.mask().all()

    def test_small_deterministic(self):
        a = sample_omega(4, Budget.parse("1/2"), 11)
        b = sample_omega(4, Budget.parse("1/2"), 11)
        assert len(a) == 8
        assert a.coords == b.coords
        assert all(0 <= i < 4 and 0 <= j < 4 for i, j in a.coords)

    def test_different_seeds_differ(self):
        assert sample_omega(32, Budget.parse("1/4"), 1).coords != sample_omega(32, Budget.parse("1/4"), 2).coords

    @given(
        st.integers(2, 512),
        st.sampled_from(["1/32", "1/16", "1/8", "1/4", "1/2", "1/1", "3/7"]),
        st.integers(0, 2**63 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_size_and_distinctness(self, n, b, seed):
        budget = Budget.parse(b)
        omega = sample_omega(n, budget, seed)
        expected = -(-(n * n * budget.fraction.numerator) // budget.fraction.denominator)
        assert len(omega) == expected
        assert len(omega.coords) == expected
        assert omega.rows.min() >= 0 and omega.rows.max() < n
        assert omega.cols.min() >= 0 and omega.cols.max() < n
        assert sample_omega(n, budget, seed).coords == omega.coords

    def test_diagonal_can_be_drawn(self):
        omega = sample_omega(8, Budget.parse("1/1"), 0)
        assert (3, 3) in omega.coords

    def test_stratified_covers_rows_and_cols(self):
        omega = sample_omega(64, Budget.parse("1/32"), 5, stratified=True)
        mask = omega.mask()
        assert len(omega) == 128
        assert mask.any(axis=1).all() and mask.any(axis=0).all()

    def test_stratified_needs_enough_cells(self):
        with pytest.raises(InputError):
            sample_omega(64, Budget.parse("1/128"), 0, stratified=True)


class TestFillPartial:
    def test_full_grid_equals_full_matrix(self):
        s = seg("a b", "a c", "b c")
        omega = Omega.from_flat(3, range(9))
        full = build_full_matrix(s, CHRF)
        part = fill_partial(s, omega, CHRF)
        np.testing.assert_array_equal(full.values, part.values)
        assert part.fully_observed

    def test_single_cell(self):
        part = fill_partial(seg("a", "b", "c"), Omega.from_coords(3, [(0, 0)]), CHRF)
        assert part.n_observed == 1
        assert part.observed[0, 0]

    def test_matches_full_restriction(self, rng):
        texts = ["".join(rng.choice(list("abcde "), size=rng.integers(3, 12))) for _ in range(16)]
        s = seg(*texts)
        full = build_full_matrix(s, CHRF)
        omega = sample_omega(16, Budget.parse("1/4"), 3)
        calls = []

        def counting(h, r):
            calls.append(1)
            return CHRF.score(h, r)

        part = fill_partial(s, omega, counting)
        assert len(calls) == len(omega) == 64
        np.testing.assert_array_equal(part.values[part.observed], full.values[part.observed])
        np.testing.assert_array_equal(part.observed, omega.mask())

    def test_completing_remaining_cells_reproduces_full(self, rng):
        s = seg("ab", "abc", "bcd", "xyz", "")
        full = build_full_matrix(s, CHRF)
        omega = sample_omega(5, Budget.parse("2/5"), 9)
        part = fill_partial(s, omega, CHRF)
        rest = Omega.from_flat(5, np.flatnonzero(~omega.mask().ravel()))
        other = fill_partial(s, rest, CHRF)
        merged = np.where(part.observed, part.values, other.values)
        np.testing.assert_array_equal(merged, full.values)

    def test_omega_bounds_checked(self):
        with pytest.raises(InputError):
            Omega.from_coords(3, [(0, 3)])
        with pytest.raises(InputError):
            Omega.from_coords(3, [(0, 1), (0, 1)])

    def test_observe_masks_full_matrix(self, rng):
        full = UtilityMatrix.full(rng.random((6, 6)))
        omega = sample_omega(6, Budget.parse("1/3"), 4)
        part = observe(full, omega)
        np.testing.assert_array_equal(part.observed, omega.mask())
        np.testing.assert_array_equal(part.values[part.observed], full.values[part.observed])


class TestRestrict:
    def test_identity(self):
        m = UtilityMatrix.full([[1, 2], [3, 4]], utility_range=(0, 4))
        r = restrict_rows_cols(m, [0, 1], [0, 1])
        np.testing.assert_array_equal(r.values, m.values)

    def test_single_cell(self):
        m = UtilityMatrix.full([[1, 2], [3, 4]], utility_range=(0, 4))
        np.testing.assert_array_equal(restrict_rows_cols(m, [1], [0]).values, [[3]])

    def test_random_subsets(self, rng):
        values = rng.random((6, 6))
        mask = rng.random((6, 6)) < 0.5
        m = UtilityMatrix(values, mask)
        for _ in range(20):
            rows = rng.choice(6, 3, replace=False)
            cols = rng.choice(6, 3, replace=False)
            r = restrict_rows_cols(m, rows, cols)
            for a, i in enumerate(rows):
                for b, j in enumerate(cols):
                    assert r.observed[a, b] == mask[i, j]
                    if mask[i, j]:
                        assert r.values[a, b] == values[i, j]

    @pytest.mark.parametrize("rows,cols", [([0, 0], [1]), ([2], [0]), ([0], [-1]), ([], [0])])
    def test_bad_indices(self, rows, cols):
        m = UtilityMatrix.full(np.zeros((2, 2)))
        with pytest.raises(InputError):
            restrict_rows_cols(m, rows, cols)
