"""Win/loss network: adjacency counts, connectivity, pseudo-rankings."""

import numpy as np
import pytest

import rankworth as rw
from rankworth.network import GHOST_ITEM


class TestAdjacency:
    def test_toy_matrix(self, abcd):
        adj = rw.adjacency(abcd)
        expected = np.array([
            [0, 1, 0, 1],
            [1, 0, 1, 0],
            [1, 0, 0, 0],
            [0, 0, 0, 0],
        ])
        assert np.array_equal(adj.counts, expected)

    def test_tie_adds_no_edges(self):
        t = rw.from_orderings([[("A", "B")]], ["A", "B"])
        adj = rw.adjacency(t)
        assert not adj.counts.any()

    def test_tied_middle_row_pairs(self):
        # A > {B = C} > D implies: A beats B, C, D; B and C each beat D
        t = rw.from_rank_matrix([[1, 2, 2, 3]], list("ABCD"))
        adj = rw.adjacency(t)
        expected = np.zeros((4, 4))
        expected[0, 1] = expected[0, 2] = expected[0, 3] = 1
        expected[1, 3] = expected[2, 3] = 1
        assert np.array_equal(adj.counts, expected)

    def test_additive_in_rows(self, abcd):
        half1 = rw.RankingsTable(abcd.items, abcd.ranks[:3], abcd.weights[:3],
                                 abcd.na_mask[:3])
        half2 = rw.RankingsTable(abcd.items, abcd.ranks[3:], abcd.weights[3:],
                                 abcd.na_mask[3:])
        total = rw.adjacency(half1).counts + rw.adjacency(half2).counts
        assert np.array_equal(total, rw.adjacency(abcd).counts)

    def test_weight_scaling(self, abcd):
        scaled = abcd.with_weights(abcd.weights * 3.5)
        adj1 = rw.adjacency(abcd)
        adj2 = rw.adjacency(scaled)
        assert np.allclose(adj2.counts, 3.5 * adj1.counts)
        r1, r2 = rw.connectivity(adj1), rw.connectivity(adj2)
        assert r1 == r2


class TestConnectivity:
    def test_toy_report(self, abcd):
        rep = rw.connectivity(rw.adjacency(abcd))
        assert rep.membership == (1, 1, 1, 2)
        assert rep.csize == (3, 1)
        assert rep.no == 2
        assert not rep.strongly_connected

    def test_round_robin_connected(self):
        t = rw.from_rank_matrix(
            [[1, 2, 0], [2, 1, 0], [0, 1, 2], [0, 2, 1], [1, 0, 2], [2, 0, 1]],
            list("abc"))
        rep = rw.connectivity(rw.adjacency(t))
        assert rep.no == 1
        assert rep.strongly_connected

    def test_two_clusters(self, disconnected):
        rep = rw.connectivity(rw.adjacency(disconnected))
        assert rep.no == 2
        assert rep.csize == (2, 2)
        assert rep.membership == (1, 1, 2, 2)


class TestPseudoRankings:
    def test_zero_is_identity(self, abcd):
        assert rw.augment_with_pseudo_rankings(abcd, 0.0) is abcd

    def test_toy_augmentation(self, abcd):
        aug = rw.augment_with_pseudo_rankings(abcd, 0.5)
        assert aug.n_rows == 5 + 8
        assert aug.n_items == 5
        assert aug.items[-1] == GHOST_ITEM
        assert np.all(aug.weights[5:] == 0.5)
        rep = rw.connectivity(rw.adjacency(aug))
        assert rep.no == 1

    def test_any_table_becomes_connected(self, disconnected):
        for c in (0.5, 0.1, 2.0):
            aug = rw.augment_with_pseudo_rankings(disconnected, c)
            assert rw.connectivity(rw.adjacency(aug)).no == 1

    def test_nascar_shape_counts(self):
        from rankworth.datasets import make_nascar_shape_table

        t = make_nascar_shape_table()
        aug = rw.augment_with_pseudo_rankings(t, 0.5)
        assert aug.n_rows == 36 + 2 * 87
        assert aug.n_items == 88

    def test_reserved_name_collision(self):
        t = rw.from_rank_matrix([[1, 2]], ["a", GHOST_ITEM])
        with pytest.raises(rw.DataError, match="reserved"):
            rw.augment_with_pseudo_rankings(t, 0.5)


class TestCsvExport(object):
    def test_adjacency_csv(self, abcd, tmp_path):
        adj = rw.adjacency(abcd)
        path = tmp_path / "adj.csv"
        adj.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "item,A,B,C,D"
        assert lines[1].startswith("A,0,1,0,1")
