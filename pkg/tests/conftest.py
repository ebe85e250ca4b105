"""Shared fixtures and oracle helpers."""

import itertools
import warnings

import numpy as np
import pytest

import rankworth as rw
from rankworth.datasets import load_abcd, load_disconnected, load_pudding


@pytest.fixture(scope="session")
def abcd():
    return load_abcd()


@pytest.fixture(scope="session")
def abc(abcd):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rw.subset_items(abcd, ["A", "B", "C"])


@pytest.fixture(scope="session")
def disconnected():
    return load_disconnected()


@pytest.fixture(scope="session")
def pudding():
    return load_pudding()


@pytest.fixture(scope="session")
def pudding_fit7(pudding):
    """The historical 7-iteration fit used throughout the published output."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rw.fit(pudding, npseudo=0, maxit=7)


def sample_ranking_row(log_worth, rng, subset=None, tie_sizes=None):
    """Draw one (possibly partial, possibly tied) ranking row.

    Without ``tie_sizes`` this is a strict ranking via the Gumbel trick;
    with tie sizes the ordered items are grouped into blocks.
    """
    j = len(log_worth)
    items = np.arange(j) if subset is None else np.asarray(subset)
    g = rng.gumbel(size=len(items)) + np.asarray(log_worth)[items]
    order = items[np.argsort(-g)]
    row = np.zeros(j, dtype=np.int64)
    if tie_sizes is None:
        for pos, item in enumerate(order):
            row[item] = pos + 1
        return row
    pos = 0
    for level, size in enumerate(tie_sizes, start=1):
        for item in order[pos:pos + size]:
            row[item] = level
        pos += size
    assert pos == len(items)
    return row


def random_table(rng, n_items=4, n_rows=30, max_tie=2, partial=False):
    """Random rankings table guaranteed to contain every tie order up to
    ``max_tie`` and (almost surely) a strongly connected network."""
    log_worth = rng.normal(0, 0.8, n_items)
    rows = []
    for r in range(n_rows):
        subset = None
        if partial and n_items > 3 and rng.random() < 0.5:
            size = int(rng.integers(3, n_items + 1))
            subset = rng.choice(n_items, size=size, replace=False)
        m = n_items if subset is None else len(subset)
        sizes = []
        left = m
        while left:
            s = min(int(rng.integers(1, max_tie + 1)), left)
            sizes.append(s)
            left -= s
        rows.append(sample_ranking_row(log_worth, rng, subset, sizes))
    # make sure every tie order occurs at least once
    for k in range(2, max_tie + 1):
        row = np.zeros(n_items, dtype=np.int64)
        row[:k] = 1
        row[k:] = np.arange(2, n_items - k + 2)
        rows.append(row)
    # a full cycle both ways guarantees a strongly connected network
    rows.append(np.arange(1, n_items + 1))
    rows.append(np.arange(n_items, 0, -1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rw.from_rank_matrix(
            np.array(rows), [f"i{k}" for k in range(n_items)])


def random_params(rng, n_items, max_tie_order):
    lw = rng.normal(0, 1, n_items)
    lw -= lw.max()
    lt = rng.normal(-0.5, 0.5, max_tie_order - 1)
    return rw.Parameters(lw, lt)


def brute_force_denominator(alts, params):
    """Independent subset enumerator for the stage normalizer."""
    total = 0.0
    kmax = min(len(alts), params.max_tie_order)
    for k in range(1, kmax + 1):
        for s in itertools.combinations(alts, k):
            prod = 1.0
            for i in s:
                prod *= np.exp(params.log_worth[i])
            tie = 1.0 if k == 1 else np.exp(params.log_tie[k - 2])
            total += tie * prod ** (1.0 / k)
    return total


def brute_force_row_probability(row, params):
    """Stagewise probability computed with plain floating arithmetic."""
    row = np.asarray(row)
    levels = sorted(set(row[row > 0]))
    remaining = [i for lv in levels for i in np.flatnonzero(row == lv)]
    prob = 1.0
    pos = 0
    for lv in levels:
        block = np.flatnonzero(row == lv)
        alts = remaining[pos:]
        pos += len(block)
        if len(alts) < 2:
            break
        k = len(block)
        prod = 1.0
        for i in block:
            prod *= np.exp(params.log_worth[i])
        tie = 1.0 if k == 1 else np.exp(params.log_tie[k - 2])
        prob *= tie * prod ** (1.0 / k) / brute_force_denominator(alts, params)
    return prob
