"""Win/loss network derived from rankings.

Each non-NA ranking implies directed "ranked higher than" edges between
every pair of ranked items at different levels; ties imply no edge.  The
maximum likelihood estimate of every log-worth is finite exactly when this
directed network is strongly connected, so fitting at ``npseudo = 0``
requires a connectivity check, and weakly connected data can instead be
repaired by pseudo-rankings against a ghost item.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .rankings import RankingsTable

__all__ = [
    "GHOST_ITEM",
    "AdjacencyMatrix",
    "ConnectivityReport",
    "adjacency",
    "connectivity",
    "augment_with_pseudo_rankings",
]

logger = logging.getLogger(__name__)

# Reserved column name for the ghost item; never shown in reports.
GHOST_ITEM = "__ghost__"


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Weighted pairwise win counts: counts[i, j] = total weight of
    rankings placing item i strictly higher than item j."""

    items: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.counts.astype(np.float64))
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", *self.items])
            for name, row in zip(self.items, self.counts):
                w.writerow([name, *(format(v, ".17g") for v in row)])


@dataclass(frozen=True)
class ConnectivityReport:
    """Strongly connected component decomposition of the win/loss graph."""

    items: tuple[str, ...]
    membership: tuple[int, ...]
    csize: tuple[int, ...]
    no: int

    @property
    def strongly_connected(self) -> bool:
        return self.no == 1


def adjacency(table: RankingsTable) -> AdjacencyMatrix:
    """Accumulate weighted "ranked higher than" counts over non-NA rows."""
    j = table.n_items
    counts = np.zeros((j, j))
    for i in range(table.n_rows):
        if table.na_mask[i]:
            continue
        w = table.weights[i]
        if w == 0:
            continue
        row = table.ranks[i]
        ranked = np.flatnonzero(row > 0)
        r = row[ranked]
        # higher rank level = worse position; edge from better to worse
        better = r[:, None] < r[None, :]
        counts[np.ix_(ranked, ranked)] += w * better
    return AdjacencyMatrix(table.items, counts)


def _tarjan_scc(adj: np.ndarray) -> list[list[int]]:
    """Iterative Tarjan; returns SCCs as lists of vertex indices."""
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[v] > 0).tolist() for v in range(n)]
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(succ[v]):
                w = succ[v][pi]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
            if work:
                u, _ = work[-1]
                lowlink[u] = min(lowlink[u], lowlink[v])
    return sccs


def connectivity(adj: AdjacencyMatrix) -> ConnectivityReport:
    """Strongly connected components of the directed graph with an edge
    i -> j wherever counts[i, j] > 0.  Cluster ids are 1-based, ordered by
    each cluster's smallest item index."""
    counts = adj.counts
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise DataError("adjacency counts must be square")
    sccs = _tarjan_scc(counts)
    sccs.sort(key=min)
    membership = [0] * counts.shape[0]
    for cid, comp in enumerate(sccs, start=1):
        for v in comp:
            membership[v] = cid
    csize = tuple(len(c) for c in sccs)
    report = ConnectivityReport(adj.items, tuple(membership), csize, len(sccs))
    if not report.strongly_connected:
        logger.info("Network of items is not strongly connected")
    return report


def augment_with_pseudo_rankings(table: RankingsTable, npseudo: float) -> RankingsTable:
    """Append a ghost item and, per real item i, two weighted paired
    comparisons "i > ghost" and "ghost > i" (weight ``npseudo`` each).

    The augmented win/loss network is strongly connected for any
    ``npseudo > 0``; ``npseudo = 0`` returns the table unchanged.
    """
    if npseudo < 0:
        raise DataError("npseudo must be non-negative")
    if npseudo == 0:
        return table
    if GHOST_ITEM in table.items:
        raise DataError(f"item name {GHOST_ITEM!r} is reserved")
    j = table.n_items
    items = table.items + (GHOST_ITEM,)
    ranks = np.hstack([table.ranks, np.zeros((table.n_rows, 1), dtype=np.int64)])
    pseudo = np.zeros((2 * j, j + 1), dtype=np.int64)
    for i in range(j):
        pseudo[2 * i, i] = 1          # item i beats ghost
        pseudo[2 * i, j] = 2
        pseudo[2 * i + 1, i] = 2      # ghost beats item i
        pseudo[2 * i + 1, j] = 1
    all_ranks = np.vstack([ranks, pseudo])
    weights = np.concatenate([table.weights, np.full(2 * j, float(npseudo))])
    na = np.concatenate([table.na_mask, np.zeros(2 * j, dtype=bool)])
    return RankingsTable(items, all_ranks, weights, na)
