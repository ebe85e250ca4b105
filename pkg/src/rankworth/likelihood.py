"""Probability model for rankings with ties.

A ranking is a sequence of choice events: at each stage a set C is chosen
from the remaining alternatives A.  The strength of a candidate set S is

    f(S) = delta_{|S|} * (prod_{i in S} alpha_i)^(1/|S|),

with delta_1 = 1, and the stage probability is f(C) divided by the sum of
f(S) over every subset S of A with 1 <= |S| <= min(|A|, D).  Stages with a
single remaining item have probability one and are skipped throughout.

All strengths are evaluated in log space and denominators use log-sum-exp,
so extreme worth spreads stay finite.  The module provides both readable
per-row reference functions and a flat, numpy-vectorized event structure
(:class:`EventSet`) used by the fitting and inference code; the two routes
are checked against each other and against a brute-force enumeration
oracle in the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .rankings import RankingsTable

__all__ = [
    "MAX_TIE_ORDER",
    "Parameters",
    "SufficientStats",
    "ChoiceEvent",
    "choice_events",
    "set_strength",
    "choice_denominator",
    "ranking_log_probability",
    "log_likelihood",
    "observed_sufficient_stats",
    "expected_sufficient_stats",
    "enumerate_tied_rankings",
    "EventSet",
]

# Subset enumeration grows as C(|A|, k); beyond 4-way ties the model is not
# practical and the builder refuses unless explicitly overridden.
MAX_TIE_ORDER = 4


@dataclass(frozen=True)
class Parameters:
    """Model parameters on the log scale.

    ``log_worth`` has one entry per item column (including a ghost column
    when present); ``log_tie`` holds log(delta_n) for n = 2..D.  The
    implied maximum tie order is ``D = len(log_tie) + 1``.
    """

    log_worth: np.ndarray
    log_tie: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_worth", np.asarray(self.log_worth, dtype=np.float64))
        object.__setattr__(self, "log_tie", np.asarray(self.log_tie, dtype=np.float64))

    @property
    def n_items(self) -> int:
        return self.log_worth.shape[0]

    @property
    def max_tie_order(self) -> int:
        return self.log_tie.shape[0] + 1

    def theta(self) -> np.ndarray:
        """Concatenated parameter vector (log worths, then log ties)."""
        return np.concatenate([self.log_worth, self.log_tie])

    @classmethod
    def from_theta(cls, theta: np.ndarray, n_items: int) -> "Parameters":
        return cls(theta[:n_items], theta[n_items:])

    @classmethod
    def uniform(cls, n_items: int, max_tie_order: int = 1,
                tie_start: float = 0.1) -> "Parameters":
        return cls(np.full(n_items, -np.log(n_items)),
                   np.full(max_tie_order - 1, np.log(tie_start)))

    def normalized_worth(self) -> np.ndarray:
        """Worths on the probability scale, summing to one."""
        w = np.exp(self.log_worth - self.log_worth.max())
        return w / w.sum()


@dataclass(frozen=True)
class SufficientStats:
    """Per-item win/tie credit and per-order tie counts (weighted).

    ``item_stat[i]`` is the number of outright wins of item i plus 1/n of
    the number of n-way ties it belongs to; ``tie_stat[n-2]`` is the number
    of n-way ties, n = 2..D.
    """

    item_stat: np.ndarray
    tie_stat: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.item_stat, self.tie_stat])


@dataclass(frozen=True)
class ChoiceEvent:
    """One stage of a ranking: ``chosen`` picked out of ``alternatives``."""

    chosen: tuple[int, ...]
    alternatives: tuple[int, ...]
    weight: float


def _row_levels(row: np.ndarray) -> list[np.ndarray]:
    """Item index groups per rank level, best first."""
    ranked = row > 0
    levels = np.unique(row[ranked])
    return [np.flatnonzero(row == lv) for lv in levels]


def choice_events(table: RankingsTable, max_tie_order: int | None = None):
    """Yield the :class:`ChoiceEvent` sequence of a table, skipping NA and
    zero-weight rows and single-item final stages.

    Raises:
        DataError: a tie group exceeds ``max_tie_order`` (when given).
    """
    for i in range(table.n_rows):
        if table.na_mask[i] or table.weights[i] == 0:
            continue
        groups = _row_levels(table.ranks[i])
        if max_tie_order is not None:
            worst = max((len(g) for g in groups), default=1)
            if worst > max_tie_order:
                raise DataError(
                    f"row {i} has a tie of order {worst}, above the limit {max_tie_order}")
        remaining = [j for g in groups for j in g]
        pos = 0
        for g in groups:
            alts = remaining[pos:]
            pos += len(g)
            if len(alts) < 2:
                break
            yield ChoiceEvent(tuple(int(x) for x in g),
                              tuple(int(x) for x in alts),
                              float(table.weights[i]))


def set_strength(items, params: Parameters) -> float:
    """f(S) for an item index set S, computed in log space."""
    return float(np.exp(_log_set_strength(items, params)))


def _log_set_strength(items, params: Parameters) -> float:
    k = len(items)
    if k < 1:
        raise DataError("set must be nonempty")
    if k > params.max_tie_order:
        raise DataError(f"tie order {k} exceeds the model maximum {params.max_tie_order}")
    log_tie = 0.0 if k == 1 else params.log_tie[k - 2]
    return log_tie + params.log_worth[list(items)].mean()


def _log_choice_denominator(alts, params: Parameters) -> float:
    kmax = min(len(alts), params.max_tie_order)
    logs = [_log_set_strength(s, params)
            for k in range(1, kmax + 1)
            for s in itertools.combinations(alts, k)]
    logs = np.array(logs)
    m = logs.max()
    return float(m + np.log(np.exp(logs - m).sum()))


def choice_denominator(alts, params: Parameters) -> float:
    """Sum of f(S) over all subsets S of ``alts`` with |S| <= min(|A|, D)."""
    if len(alts) < 1:
        raise DataError("alternative set must be nonempty")
    return float(np.exp(_log_choice_denominator(alts, params)))


def ranking_log_probability(row, params: Parameters) -> float:
    """Log probability of one dense rank-code row under the model.

    Raises:
        DataError: the row ranks fewer than two items or contains a tie
            group larger than the model's maximum tie order.
    """
    row = np.asarray(row)
    groups = _row_levels(row)
    if sum(len(g) for g in groups) < 2:
        raise DataError("row must rank at least two items")
    remaining = [j for g in groups for j in g]
    total = 0.0
    pos = 0
    for g in groups:
        alts = remaining[pos:]
        pos += len(g)
        if len(alts) < 2:
            break
        total += _log_set_strength(g, params) - _log_choice_denominator(alts, params)
    return total


def log_likelihood(table: RankingsTable, params: Parameters) -> float:
    """Weighted sum of ranking log probabilities over non-NA rows."""
    total = 0.0
    for i in range(table.n_rows):
        if table.na_mask[i] or table.weights[i] == 0:
            continue
        total += table.weights[i] * ranking_log_probability(table.ranks[i], params)
    return total


def observed_sufficient_stats(table: RankingsTable, max_tie_order: int) -> SufficientStats:
    """Weighted win/tie tallies; independent of parameter values."""
    item_stat = np.zeros(table.n_items)
    tie_stat = np.zeros(max_tie_order - 1)
    for ev in choice_events(table, max_tie_order):
        k = len(ev.chosen)
        item_stat[list(ev.chosen)] += ev.weight / k
        if k >= 2:
            tie_stat[k - 2] += ev.weight
    return SufficientStats(item_stat, tie_stat)


def expected_sufficient_stats(table: RankingsTable, params: Parameters) -> SufficientStats:
    """Model expectation of the tallies at ``params``."""
    item_stat = np.zeros(table.n_items)
    tie_stat = np.zeros(params.max_tie_order - 1)
    for ev in choice_events(table, params.max_tie_order):
        kmax = min(len(ev.alternatives), params.max_tie_order)
        subsets = [s for k in range(1, kmax + 1)
                   for s in itertools.combinations(ev.alternatives, k)]
        logs = np.array([_log_set_strength(s, params) for s in subsets])
        m = logs.max()
        probs = np.exp(logs - m)
        probs /= probs.sum()
        for s, p in zip(subsets, probs):
            k = len(s)
            item_stat[list(s)] += ev.weight * p / k
            if k >= 2:
                tie_stat[k - 2] += ev.weight * p
    return SufficientStats(item_stat, tie_stat)


def enumerate_tied_rankings(n_items: int, max_tie_order: int) -> list[tuple[tuple[int, ...], ...]]:
    """All complete tied rankings of ``n_items`` items: ordered set
    partitions of 0..n_items-1 with block sizes <= ``max_tie_order``.

    Raises:
        DataError: n_items > 6 (enumeration grows too fast beyond that).
    """
    if n_items > 6:
        raise DataError("enumeration limited to 6 items")
    if n_items < 1:
        return []
    out: list[tuple[tuple[int, ...], ...]] = []

    def rec(rest: tuple[int, ...], acc: tuple[tuple[int, ...], ...]):
        if not rest:
            out.append(acc)
            return
        for k in range(1, min(max_tie_order, len(rest)) + 1):
            for block in itertools.combinations(rest, k):
                rem = tuple(x for x in rest if x not in block)
                rec(rem, acc + (block,))

    rec(tuple(range(n_items)), ())
    return out


def ranking_to_row(ranking: tuple[tuple[int, ...], ...], n_items: int) -> np.ndarray:
    """Dense rank-code row for an ordered set partition."""
    row = np.zeros(n_items, dtype=np.int64)
    for level, block in enumerate(ranking, start=1):
        for i in block:
            row[i] = level
    return row


# ---------------------------------------------------------------------------
# Vectorized event structure
# ---------------------------------------------------------------------------


class EventSet:
    """Flat, deduplicated representation of all choice events of a table.

    Events are unique alternative sets A (stages sharing the same A are
    merged, accumulating weight); each event's admissible subsets are
    enumerated once into flat arrays.  Log-strengths of all subsets are a
    single sparse matrix-vector product ``B @ theta``, where theta is the
    concatenated (log worth, log tie) vector, which makes log-likelihood,
    expected statistics and the information matrix cheap to evaluate for
    arbitrary event weightings (the tree code re-weights events per group
    without rebuilding).

    Attributes:
        w_data / w_pseudo: per-event weight from data rows / pseudo rows.
        obs_data / obs_pseudo: observed sufficient statistic vectors.
        noutcomes: possible outcomes per event.
    """

    def __init__(self, table: RankingsTable, max_tie_order: int,
                 pseudo_mask=None, group_index=None,
                 allow_high_tie_orders: bool = False):
        if max_tie_order > MAX_TIE_ORDER and not allow_high_tie_orders:
            raise DataError(
                f"ties up to order {max_tie_order} requested; orders above "
                f"{MAX_TIE_ORDER} must be enabled explicitly")
        self.items = table.items
        self.n_items = table.n_items
        self.max_tie_order = max_tie_order
        self.n_params = table.n_items + (max_tie_order - 1)

        if pseudo_mask is None:
            pseudo_mask = np.zeros(table.n_rows, dtype=bool)

        want_groups = group_index is not None
        n_groups = int(group_index.max()) if want_groups else 0

        event_ids: dict[tuple[int, ...], int] = {}
        ev_alts: list[tuple[int, ...]] = []
        # flat accumulators, reduced with bincount after the row loop
        evw_id: list[int] = []
        evw_val: list[float] = []
        evw_pseudo: list[float] = []
        obs_idx: list[int] = []
        obs_val: list[float] = []
        obs_pseudo_val: list[float] = []
        group_rows: list[int] = []
        group_cols: list[int] = []
        group_w: list[float] = []
        g_obs_idx: list[int] = []
        g_obs_val: list[float] = []

        ranks = table.ranks
        na = table.na_mask
        wts = table.weights
        n_items = self.n_items
        for i in range(table.n_rows):
            if na[i] or wts[i] == 0:
                continue
            w = float(wts[i])
            is_pseudo = bool(pseudo_mask[i])
            row = ranks[i]
            nz = np.flatnonzero(row)
            if nz.size < 2:
                continue
            levels = row[nz]
            order = np.argsort(levels, kind="stable")
            items_ord = nz[order].tolist()
            lvl_ord = levels[order].tolist()
            n = len(items_ord)
            gi = int(group_index[i]) - 1 if (want_groups and not is_pseudo) else -1
            pos = 0
            while pos < n:
                lvl = lvl_ord[pos]
                q = pos + 1
                while q < n and lvl_ord[q] == lvl:
                    q += 1
                if n - pos < 2:
                    break
                k = q - pos
                if k > max_tie_order:
                    raise DataError(
                        f"row {i} has a tie of order {k}, above the limit {max_tie_order}")
                alts = tuple(sorted(items_ord[pos:]))
                eid = event_ids.get(alts)
                if eid is None:
                    eid = len(ev_alts)
                    event_ids[alts] = eid
                    ev_alts.append(alts)
                evw_id.append(eid)
                evw_val.append(0.0 if is_pseudo else w)
                evw_pseudo.append(w if is_pseudo else 0.0)
                chosen = items_ord[pos:q]
                share = w / k
                for c in chosen:
                    obs_idx.append(c)
                    obs_val.append(0.0 if is_pseudo else share)
                    obs_pseudo_val.append(share if is_pseudo else 0.0)
                if k >= 2:
                    obs_idx.append(n_items + k - 2)
                    obs_val.append(0.0 if is_pseudo else w)
                    obs_pseudo_val.append(w if is_pseudo else 0.0)
                if gi >= 0:
                    group_rows.append(gi)
                    group_cols.append(eid)
                    group_w.append(w)
                    base = gi * self.n_params
                    for c in chosen:
                        g_obs_idx.append(base + c)
                        g_obs_val.append(share)
                    if k >= 2:
                        g_obs_idx.append(base + n_items + k - 2)
                        g_obs_val.append(w)
                pos = q

        self.n_events = len(ev_alts)
        self.w_data = np.bincount(evw_id, weights=evw_val, minlength=self.n_events)
        self.w_pseudo = np.bincount(evw_id, weights=evw_pseudo, minlength=self.n_events)
        self.obs_data = np.bincount(obs_idx, weights=obs_val, minlength=self.n_params)
        self.obs_pseudo = np.bincount(obs_idx, weights=obs_pseudo_val, minlength=self.n_params)
        if want_groups:
            self.group_event_weights = sp.csr_matrix(
                (group_w, (group_rows, group_cols)),
                shape=(n_groups, self.n_events))
            self.group_obs = np.bincount(
                g_obs_idx, weights=g_obs_val,
                minlength=n_groups * self.n_params).reshape(n_groups, self.n_params)

        self._build_subsets(ev_alts)

    def _build_subsets(self, ev_alts: list[tuple[int, ...]]) -> None:
        D = self.max_tie_order
        sizes = np.array([len(a) for a in ev_alts], dtype=np.int64)
        self.ev_sizes = sizes
        self.noutcomes = np.array(
            [sum(comb(int(m), k) for k in range(1, min(int(m), D) + 1)) for m in sizes],
            dtype=np.int64)

        blocks_event: list[np.ndarray] = []
        blocks_items: list[np.ndarray] = []
        blocks_k: list[int] = []
        for m in np.unique(sizes):
            m = int(m)
            idx = np.flatnonzero(sizes == m)
            amat = np.array([ev_alts[e] for e in idx], dtype=np.int64)
            for k in range(1, min(m, D) + 1):
                tmpl = np.array(list(itertools.combinations(range(m), k)), dtype=np.int64)
                items = amat[:, tmpl]                       # (n_m, ncomb, k)
                blocks_items.append(items.reshape(-1, k))
                blocks_event.append(np.repeat(idx, tmpl.shape[0]))
                blocks_k.append(k)

        sub_event = np.concatenate(blocks_event) if blocks_event else np.zeros(0, dtype=np.int64)
        order = np.argsort(sub_event, kind="stable")
        self.sub_event = sub_event[order]
        n_sub = self.sub_event.shape[0]
        self.n_subsets = n_sub

        # invert the sort permutation to place per-block data
        inv = np.empty(n_sub, dtype=np.int64)
        inv[order] = np.arange(n_sub)

        sub_k = np.concatenate([np.full(b.shape[0], k, dtype=np.int64)
                                for b, k in zip(blocks_items, blocks_k)]) \
            if blocks_items else np.zeros(0, dtype=np.int64)
        self.sub_sizes = np.empty(n_sub, dtype=np.int64)
        self.sub_sizes[inv] = sub_k

        rows = []
        cols = []
        vals = []
        offset = 0
        for b, k in zip(blocks_items, blocks_k):
            n_b = b.shape[0]
            r = np.repeat(inv[offset:offset + n_b], k)
            rows.append(r)
            cols.append(b.reshape(-1))
            vals.append(np.full(n_b * k, 1.0 / k))
            if k >= 2:
                rows.append(inv[offset:offset + n_b])
                cols.append(np.full(n_b, self.n_items + k - 2, dtype=np.int64))
                vals.append(np.ones(n_b))
            offset += n_b
        if rows:
            self.B = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_sub, self.n_params))
        else:
            self.B = sp.csr_matrix((0, self.n_params))

        counts = np.bincount(self.sub_event, minlength=self.n_events)
        self.ev_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        # event aggregation matrix: rows = events, cols = subsets
        self.agg = sp.csr_matrix(
            (np.ones(n_sub), (self.sub_event, np.arange(n_sub))),
            shape=(self.n_events, n_sub))

    # -- weights ------------------------------------------------------

    @property
    def w_total(self) -> np.ndarray:
        return self.w_data + self.w_pseudo

    @property
    def obs_total(self) -> np.ndarray:
        return self.obs_data + self.obs_pseudo

    def df_outcomes(self) -> float:
        """Sum over data events of weight * (possible outcomes - 1)."""
        return float(self.w_data @ (self.noutcomes - 1))

    # -- evaluation ---------------------------------------------------

    def _log_denominators(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        logf = self.B @ theta
        if self.n_events == 0:
            return logf, np.zeros(0)
        m = np.maximum.reduceat(logf, self.ev_ptr[:-1])
        shifted = np.exp(logf - m[self.sub_event])
        denom = np.add.reduceat(shifted, self.ev_ptr[:-1])
        return logf, m + np.log(denom)

    def loglik(self, theta: np.ndarray, weights: np.ndarray, obs: np.ndarray) -> float:
        _, logden = self._log_denominators(theta)
        return float(obs @ theta - weights @ logden)

    def outcome_probs(self, theta: np.ndarray) -> np.ndarray:
        logf, logden = self._log_denominators(theta)
        return np.exp(logf - logden[self.sub_event])

    def expected(self, theta: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Expected sufficient statistic vector under event ``weights``."""
        p = self.outcome_probs(theta)
        return self.B.T @ (weights[self.sub_event] * p)

    def gradient(self, theta: np.ndarray, weights: np.ndarray, obs: np.ndarray) -> np.ndarray:
        return obs - self.expected(theta, weights)

    def information(self, theta: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Observed information (= negative Hessian) of the log-likelihood
        in the full theta parameterization; a sum of per-event outcome
        covariances, hence symmetric positive semidefinite."""
        p = self.outcome_probs(theta)
        q = weights[self.sub_event] * p
        full = (self.B.multiply(q[:, None])).T @ self.B
        means = self.agg @ self.B.multiply(p[:, None])      # (E, P) row = E[x]
        means = np.asarray(means.todense())
        info = np.asarray(full.todense()) - means.T @ (weights[:, None] * means)
        return info

    def group_scores(self, theta: np.ndarray) -> np.ndarray:
        """Per-group (observed - expected) statistic vectors at ``theta``.

        Requires the structure to have been built with ``group_index``.
        """
        p = self.outcome_probs(theta)
        per_event = self.agg @ self.B.multiply(p[:, None])  # (E, P) expectations
        per_event = np.asarray(per_event.todense())
        return self.group_obs - self.group_event_weights @ per_event
