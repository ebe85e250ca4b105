"""Rankings construction, recoding, display, grouping, and decode helpers."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rankworth as rw
from rankworth.errors import DataError


class TestFromRankMatrix:
    def test_toy_paired_comparisons(self, abcd):
        assert abcd.formatted() == ["A > B", "C > A", "A > D", "B > A", "B > C"]

    def test_gap_recoded_dense(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t = rw.from_rank_matrix([[1, 3, 0]], ["a", "b", "c"])
        assert t.ranks.tolist() == [[1, 2, 0]]

    def test_single_item_row_flagged_na(self):
        with pytest.warns(UserWarning, match="set to NA"):
            t = rw.from_rank_matrix([[1, 0, 0, 0], [1, 2, 0, 0]], list("ABCD"))
        assert t.na_mask.tolist() == [True, False]
        assert t.formatted()[0] == "NA"

    def test_all_zero_row_flagged_na(self):
        with pytest.warns(UserWarning):
            t = rw.from_rank_matrix([[0, 0], [1, 2]], ["a", "b"])
        assert t.na_mask.tolist() == [True, False]

    def test_errors(self):
        with pytest.raises(DataError):
            rw.from_rank_matrix([[1]], ["only"])
        with pytest.raises(DataError):
            rw.from_rank_matrix([[1, -1]], ["a", "b"])
        with pytest.raises(DataError):
            rw.from_rank_matrix([[1, 2]], ["a", "a"])
        with pytest.raises(DataError):
            rw.from_rank_matrix([[1.5, 2]], ["a", "b"])

    @given(st.lists(st.lists(st.integers(0, 6), min_size=4, max_size=4),
                    min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_dense_recode_idempotent(self, matrix):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t1 = rw.from_rank_matrix(matrix, list("wxyz"))
            t2 = rw.from_rank_matrix(t1.ranks, list("wxyz"))
        assert np.array_equal(t1.ranks, t2.ranks)
        assert np.array_equal(t1.na_mask, t2.na_mask)


class TestFromOrderings:
    def test_tie_slot(self):
        t = rw.from_orderings([[("1", "2")]], [str(k) for k in range(1, 7)])
        assert t.ranks[0].tolist() == [1, 1, 0, 0, 0, 0]
        assert t.formatted() == ["1 = 2"]

    def test_winner_loser(self):
        t = rw.from_orderings([["A", "B"]], ["A", "B"])
        assert t.ranks[0].tolist() == [1, 2]

    def test_partial_ordering_ranks_columns(self):
        items = [f"d{k}" for k in range(6)]
        t = rw.from_orderings([["d4", "d0", "d2"]], items)
        assert t.ranks[0].tolist() == [2, 0, 3, 0, 1, 0]

    def test_race_sized_partial_ordering(self):
        # an ordering of 43 names among 87 gets ranks 1..43 on exactly
        # those columns and 0 elsewhere
        rng = np.random.default_rng(87)
        items = [f"driver{k}" for k in range(87)]
        finishers = rng.choice(87, size=43, replace=False)
        t = rw.from_orderings([[items[i] for i in finishers]], items)
        row = t.ranks[0]
        assert np.array_equal(row[finishers], np.arange(1, 44))
        assert (row > 0).sum() == 43
        assert sorted(row[row > 0]) == list(range(1, 44))

    def test_unknown_item_rejected(self):
        with pytest.raises(DataError, match="unknown item"):
            rw.from_orderings([["A", "Z"]], ["A", "B"])

    def test_duplicate_item_rejected(self):
        with pytest.raises(DataError, match="twice"):
            rw.from_orderings([["A", "A"]], ["A", "B"])

    def test_round_trip_through_ordering_extraction(self, abcd):
        # a dense no-NA table survives ordering extraction + rebuild
        orderings = []
        for i in range(abcd.n_rows):
            row = abcd.ranks[i]
            slots = []
            for lv in sorted(set(row[row > 0])):
                slots.append(tuple(abcd.items[j] for j in np.flatnonzero(row == lv)))
            orderings.append(slots)
        t = rw.from_orderings(orderings, abcd.items)
        assert np.array_equal(t.ranks, abcd.ranks)


class TestFormatRanking:
    def test_basic(self):
        assert rw.format_ranking([1, 2, 0, 0, 0, 0],
                                 [str(k) for k in range(1, 7)]) == "1 > 2"

    def test_tie(self):
        assert rw.format_ranking([1, 1], ["A", "B"]) == "A = B"

    def test_na(self):
        assert rw.format_ranking([1, 0, 0], ["a", "b", "c"]) == "NA"

    def test_truncation(self):
        items = [f"Driver {k:02d}" for k in range(20)]
        row = np.arange(1, 21)
        out = rw.format_ranking(row, items, width=30)
        assert out.endswith("...")
        assert len(out) <= 34

    def test_parse_round_trip(self, abcd):
        from rankworth.rankings import parse_ranking

        for i in range(abcd.n_rows):
            text = rw.format_ranking(abcd.ranks[i], abcd.items)
            assert np.array_equal(parse_ranking(text, abcd.items), abcd.ranks[i])


class TestSubsetItems:
    def test_drop_always_loser(self, abcd):
        with pytest.warns(UserWarning, match="set to NA"):
            abc = rw.subset_items(abcd, ["A", "B", "C"])
        assert abc.formatted() == ["A > B", "C > A", "NA", "B > A", "B > C"]

    def test_drop_unranked_item_no_change(self):
        t = rw.from_rank_matrix([[1, 2, 0]], list("abc"))
        s = rw.subset_items(t, ["a", "b"])
        assert s.ranks.tolist() == [[1, 2]]
        assert not s.na_mask.any()

    def test_subset_preserves_dense_invariant(self, rng=np.random.default_rng(3)):
        from tests.conftest import random_table

        t = random_table(rng, n_items=5, n_rows=25, max_tie=2, partial=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = rw.subset_items(t, ["i0", "i2", "i4"])
        for i in range(s.n_rows):
            if s.na_mask[i]:
                continue
            ranked = s.ranks[i][s.ranks[i] > 0]
            assert sorted(set(ranked)) == list(range(1, len(set(ranked)) + 1))

    def test_errors(self, abcd):
        with pytest.raises(DataError):
            rw.subset_items(abcd, ["A"])
        with pytest.raises(DataError):
            rw.subset_items(abcd, ["A", "Z"])


class TestGroupRankings:
    def test_repeating_layout(self):
        t = rw.from_rank_matrix([[1, 2]] * 8, ["a", "b"])
        g = rw.group_rankings(t, [1, 2, 3, 4] * 2)
        assert g.n_groups == 4
        assert g.rows_of(2).tolist() == [1, 5]

    def test_identity_index(self):
        t = rw.from_rank_matrix([[1, 2]] * 3, ["a", "b"])
        g = rw.group_rankings(t, [1, 2, 3])
        assert g.n_groups == 3

    def test_group_loglik_is_member_sum(self):
        rng = np.random.default_rng(11)
        from tests.conftest import random_params, random_table

        t = random_table(rng, n_items=4, n_rows=12, max_tie=2)
        g = rw.group_rankings(t, (np.arange(t.n_rows) % 3) + 1)
        params = random_params(rng, 4, 2)
        total = 0.0
        for gid in (1, 2, 3):
            sub = g.group_table(gid)
            total += rw.log_likelihood(sub, params)
        assert total == pytest.approx(rw.log_likelihood(t, params), abs=1e-10)

    def test_missing_group_id(self):
        t = rw.from_rank_matrix([[1, 2]] * 3, ["a", "b"])
        with pytest.raises(DataError, match="missing group"):
            rw.group_rankings(t, [1, 3, 3])


class TestDecodeComplete:
    def test_decode_single_row(self):
        out = rw.decode_orderings(
            [["C", "B", "A"]],
            [["BRT 103-182", "SJC 730-79", "PM2 Don Rey"]],
            ["A", "B", "C"])
        assert out.rows[0] == (("PM2 Don Rey",), ("SJC 730-79",), ("BRT 103-182",))

    def test_decode_identity(self):
        out = rw.decode_orderings([["A", "B", "C"]], [["A", "B", "C"]],
                                  ["A", "B", "C"])
        assert out.rows[0] == (("A",), ("B",), ("C",))

    def test_decode_rows_are_permutations(self):
        rng = np.random.default_rng(5)
        codes = ["A", "B", "C"]
        coded, item_rows = [], []
        for r in range(20):
            coded.append(list(rng.permutation(codes)))
            item_rows.append([f"variety{r}_{k}" for k in range(3)])
        out = rw.decode_orderings(coded, item_rows, codes)
        for row, items in zip(out.rows, item_rows):
            flat = [name for slot in row for name in slot]
            assert sorted(flat) == sorted(items)

    def test_decode_bad_cell(self):
        with pytest.raises(DataError, match="not one of the codes"):
            rw.decode_orderings([["D"]], [["x", "y", "z"]], ["A", "B", "C"])

    def test_complete_fills_middle(self):
        assert rw.complete_orderings([["C", "A"]], ["A", "B", "C"]) == ["B"]

    def test_complete_none_missing_errors(self):
        with pytest.raises(DataError, match="exactly 1"):
            rw.complete_orderings([["A", "B"]], ["A", "B"])

    def test_complete_set_equality(self):
        rng = np.random.default_rng(6)
        codes = ["A", "B", "C"]
        rows = []
        for _ in range(25):
            keep = rng.permutation(codes)[:2]
            rows.append(list(keep))
        missing = rw.complete_orderings(rows, codes)
        for row, m in zip(rows, missing):
            assert sorted(row + [m]) == codes


class TestTableBasics:
    def test_immutability(self, abcd):
        with pytest.raises(ValueError):
            abcd.ranks[0, 0] = 5

    def test_weights_validation(self, abcd):
        with pytest.raises(DataError):
            abcd.with_weights([1.0])
        with pytest.raises(DataError):
            abcd.with_weights([-1.0] * abcd.n_rows)

    def test_max_tie_order(self):
        t = rw.from_rank_matrix([[1, 1, 1, 2], [1, 2, 3, 4]], list("abcd"))
        assert t.max_tie_order() == 3
