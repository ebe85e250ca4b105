"""Rankings containers and transformations.

A ranking assigns positive rank codes to a subset of the item universe:
code 1 marks the top-ranked item(s), larger codes mark lower positions and
0 marks items absent from the ranking.  Ties are expressed by repeating a
code.  All tables store ranks in *dense* form (codes 1..m with no gaps);
construction recodes as necessary.  Rows that rank fewer than two items
carry no comparison information and are flagged NA: they are kept in place
(so row indices and group alignment survive) but excluded from every
computation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "RankingsTable",
    "OrderingsTable",
    "GroupedRankings",
    "from_rank_matrix",
    "from_orderings",
    "format_ranking",
    "subset_items",
    "group_rankings",
    "decode_orderings",
    "complete_orderings",
]


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _dense_recode_row(row: np.ndarray) -> np.ndarray:
    """Close rank gaps in one row, preserving order and ties."""
    out = np.zeros_like(row)
    ranked = row > 0
    if not ranked.any():
        return out
    levels = np.unique(row[ranked])
    for new, old in enumerate(levels, start=1):
        out[row == old] = new
    return out


def _validate_items(items) -> tuple[str, ...]:
    names = tuple(str(x) for x in items)
    if len(names) < 2:
        raise DataError("at least two items are required")
    if any(n == "" for n in names):
        raise DataError("item names must be nonempty")
    if len(set(names)) != len(names):
        raise DataError("item names must be unique")
    return names


@dataclass(frozen=True)
class RankingsTable:
    """Immutable table of dense rankings.

    Attributes:
        items: item names, one per column.
        ranks: (R, J) integer matrix of dense rank codes, 0 = unranked.
        weights: (R,) non-negative multiplicities, default 1.0 each.
        na_mask: (R,) flags for rows with fewer than two ranked items;
            such rows contribute nothing to any computation.
    """

    items: tuple[str, ...]
    ranks: np.ndarray
    weights: np.ndarray
    na_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ranks", _as_readonly(self.ranks.astype(np.int64)))
        object.__setattr__(self, "weights", _as_readonly(self.weights.astype(np.float64)))
        object.__setattr__(self, "na_mask", _as_readonly(self.na_mask.astype(bool)))

    @property
    def n_rows(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_items(self) -> int:
        return self.ranks.shape[1]

    @property
    def n_active(self) -> int:
        """Number of non-NA rows."""
        return int((~self.na_mask).sum())

    def row(self, i: int) -> np.ndarray:
        return self.ranks[i]

    def max_tie_order(self) -> int:
        """Largest tie-group size over non-NA rows (1 if no ties / no rows)."""
        best = 1
        for i in range(self.n_rows):
            if self.na_mask[i]:
                continue
            row = self.ranks[i]
            ranked = row[row > 0]
            if ranked.size == 0:
                continue
            counts = np.bincount(ranked)
            best = max(best, int(counts.max()))
        return best

    def with_weights(self, weights) -> "RankingsTable":
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_rows,):
            raise DataError(f"weights must have length {self.n_rows}")
        if (w < 0).any():
            raise DataError("weights must be non-negative")
        return RankingsTable(self.items, self.ranks, w, self.na_mask)

    def formatted(self, width: int | None = None) -> list[str]:
        return [format_ranking(self.ranks[i], self.items, width=width)
                if not self.na_mask[i] else "NA"
                for i in range(self.n_rows)]

    def __repr__(self) -> str:
        head = self.formatted()[:6]
        tail = "" if self.n_rows <= 6 else f", ... ({self.n_rows} rows)"
        return f"RankingsTable({head}{tail})"


def from_rank_matrix(matrix, item_names, weights=None) -> RankingsTable:
    """Build a validated :class:`RankingsTable` from a rank-code matrix.

    Non-dense rows are recoded (gaps closed, ties preserved); rows ranking
    fewer than two items are flagged NA with a warning.

    Raises:
        DataError: fewer than two items, negative or non-integer entries,
            or duplicate item names.
    """
    items = _validate_items(item_names)
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise DataError("rank matrix must be two-dimensional")
    if m.shape[1] != len(items):
        raise DataError(f"rank matrix has {m.shape[1]} columns for {len(items)} items")
    if m.size and not np.all(np.equal(np.mod(m, 1), 0)):
        raise DataError("rank codes must be integers")
    m = m.astype(np.int64)
    if (m < 0).any():
        raise DataError("rank codes must be non-negative")

    dense = np.vstack([_dense_recode_row(r) for r in m]) if m.shape[0] else m
    na = np.array([(r > 0).sum() < 2 for r in dense], dtype=bool)
    flagged = int(na.sum())
    if flagged:
        warnings.warn(f"{flagged} ranking(s) with fewer than 2 ranked items set to NA")

    if weights is None:
        w = np.ones(dense.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (dense.shape[0],):
            raise DataError("weights length must match the number of rankings")
        if (w < 0).any():
            raise DataError("weights must be non-negative")
    return RankingsTable(items, dense, w, na)


@dataclass(frozen=True)
class OrderingsTable:
    """Rows of ordered slots, best first; a slot may hold several items
    (a tie) or be empty.  No item may appear twice within a row."""

    rows: tuple[tuple[tuple[str, ...], ...], ...]

    @staticmethod
    def _norm_slot(slot) -> tuple[str, ...]:
        if slot is None:
            return ()
        if isinstance(slot, float) and np.isnan(slot):
            return ()
        if isinstance(slot, str):
            return (slot,) if slot else ()
        try:
            entries = list(slot)
        except TypeError:
            return (str(slot),)
        out = []
        for e in entries:
            if e is None or (isinstance(e, float) and np.isnan(e)):
                continue
            out.append(str(e))
        return tuple(out)

    @classmethod
    def from_rows(cls, rows) -> "OrderingsTable":
        norm = []
        for r in rows:
            slots = tuple(cls._norm_slot(s) for s in r)
            seen: set[str] = set()
            for s in slots:
                for name in s:
                    if name in seen:
                        raise DataError(f"item {name!r} appears twice in an ordering")
                    seen.add(name)
            norm.append(slots)
        return cls(tuple(norm))

    @property
    def n_rows(self) -> int:
        return len(self.rows)


def from_orderings(orderings, item_names, weights=None) -> RankingsTable:
    """Convert orderings (slot k = rank k) to a dense rankings table.

    Multi-item slots become ties; items absent from a row get rank 0.

    Raises:
        DataError: unknown item name or duplicate item within a row.
    """
    if not isinstance(orderings, OrderingsTable):
        orderings = OrderingsTable.from_rows(orderings)
    items = _validate_items(item_names)
    index = {name: j for j, name in enumerate(items)}
    m = np.zeros((orderings.n_rows, len(items)), dtype=np.int64)
    for i, row in enumerate(orderings.rows):
        rank = 0
        for slot in row:
            if not slot:
                continue
            rank += 1
            for name in slot:
                if name not in index:
                    raise DataError(f"unknown item name {name!r}")
                m[i, index[name]] = rank
    return from_rank_matrix(m, items, weights=weights)


def format_ranking(row, items, width: int | None = None) -> str:
    """Render one rank-code row: levels joined by " > ", ties by " = ".

    Rows with fewer than two ranked items render as "NA".  With ``width``,
    longer strings are cut and terminated with "...".
    """
    row = np.asarray(row)
    ranked = row > 0
    if ranked.sum() < 2:
        return "NA"
    levels = np.unique(row[ranked])
    parts = []
    for lv in levels:
        names = [items[j] for j in np.flatnonzero(row == lv)]
        parts.append(" = ".join(names))
    out = " > ".join(parts)
    if width is not None and len(out) > width:
        out = out[: max(width - 4, 0)].rstrip() + " ..."
    return out


def parse_ranking(text: str, items) -> np.ndarray:
    """Inverse of :func:`format_ranking` for non-truncated strings."""
    items = tuple(items)
    index = {name: j for j, name in enumerate(items)}
    row = np.zeros(len(items), dtype=np.int64)
    if text.strip() == "NA":
        return row
    for rank, level in enumerate(text.split(" > "), start=1):
        for name in level.split(" = "):
            name = name.strip()
            if name not in index:
                raise DataError(f"unknown item name {name!r}")
            row[index[name]] = rank
    return row


def subset_items(table: RankingsTable, keep_items) -> RankingsTable:
    """Drop all columns outside ``keep_items``; affected rows are recoded
    and rows left with fewer than two ranked items are flagged NA.

    Raises:
        DataError: ``keep_items`` empty, not a subset, or fewer than 2 names.
    """
    keep = [str(k) for k in keep_items]
    if len(keep) < 2:
        raise DataError("keep_items must retain at least two items")
    missing = [k for k in keep if k not in table.items]
    if missing:
        raise DataError(f"unknown item(s): {missing}")
    cols = [table.items.index(k) for k in keep]
    sub = table.ranks[:, cols]
    dense = np.vstack([_dense_recode_row(r) for r in sub]) if sub.shape[0] else sub
    na = table.na_mask | np.array([(r > 0).sum() < 2 for r in dense], dtype=bool)
    newly = int(na.sum() - table.na_mask.sum())
    if newly:
        warnings.warn(f"{newly} ranking(s) with fewer than 2 ranked items set to NA")
    return RankingsTable(tuple(keep), dense, table.weights, na)


@dataclass(frozen=True)
class GroupedRankings:
    """Rankings plus a mapping of each row to a group in 1..G."""

    rankings: RankingsTable
    group_index: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "group_index",
                           _as_readonly(self.group_index.astype(np.int64)))

    @property
    def n_groups(self) -> int:
        return int(self.group_index.max()) if self.group_index.size else 0

    def rows_of(self, group: int) -> np.ndarray:
        """Row indices belonging to ``group`` (1-based id)."""
        return np.flatnonzero(self.group_index == group)

    def group_table(self, group: int) -> RankingsTable:
        idx = self.rows_of(group)
        t = self.rankings
        return RankingsTable(t.items, t.ranks[idx], t.weights[idx], t.na_mask[idx])


def group_rankings(table: RankingsTable, group_index) -> GroupedRankings:
    """Attach a group id in 1..G to every ranking.

    Raises:
        DataError: length mismatch or a gap in the group ids.
    """
    idx = np.asarray(group_index, dtype=np.int64)
    if idx.shape != (table.n_rows,):
        raise DataError("group index length must match the number of rankings")
    if idx.size == 0:
        raise DataError("cannot group an empty table")
    g = int(idx.max())
    if idx.min() < 1 or g < 1:
        raise DataError("group ids must be positive integers")
    present = np.unique(idx)
    if present.size != g:
        missing = sorted(set(range(1, g + 1)) - set(present.tolist()))
        raise DataError(f"missing group id(s): {missing}")
    return GroupedRankings(table, idx)


def decode_orderings(coded, item_columns, codes) -> OrderingsTable:
    """Replace coded slot values with row-specific item names.

    ``coded`` holds per-row slot codes (e.g. best/middle/worst as "A"/"B"/"C");
    ``item_columns`` gives, for each row, the item name behind each code.

    Raises:
        DataError: a cell not in ``codes`` or misaligned rows.
    """
    codes = [str(c) for c in codes]
    pos = {c: k for k, c in enumerate(codes)}
    coded_rows = [list(r) for r in coded]
    item_rows = [list(r) for r in item_columns]
    if len(coded_rows) != len(item_rows):
        raise DataError("coded and item_columns must have the same number of rows")
    out = []
    for cr, ir in zip(coded_rows, item_rows):
        if len(ir) != len(codes):
            raise DataError(f"expected {len(codes)} item columns, got {len(ir)}")
        slots = []
        for cell in cr:
            c = str(cell)
            if c not in pos:
                raise DataError(f"cell value {c!r} is not one of the codes {codes}")
            slots.append((str(ir[pos[c]]),))
        out.append(tuple(slots))
    return OrderingsTable(tuple(out))


def complete_orderings(partial, codes) -> list[str]:
    """Return, per row, the single code absent from that row.

    Raises:
        DataError: a row where the number of missing codes is not exactly 1.
    """
    full = [str(c) for c in codes]
    fullset = set(full)
    out = []
    for i, row in enumerate(partial):
        present = {str(c) for c in row}
        unknown = present - fullset
        if unknown:
            raise DataError(f"row {i}: value(s) {sorted(unknown)} not in codes")
        missing = [c for c in full if c not in present]
        if len(missing) != 1:
            raise DataError(f"row {i}: expected exactly 1 missing code, found {len(missing)}")
        out.append(missing[0])
    return out
