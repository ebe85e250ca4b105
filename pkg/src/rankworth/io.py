"""File formats: preference-library strict-order files, rankings CSV,
and model JSON.

The strict-orders format ("SOC") is line oriented: the item count, one
"id,name" line per item, a totals line "voters,vote_sum,unique_orders",
then one "frequency,id,id,...,id" line per distinct complete ordering.
Readers reject structurally invalid input; the only repair performed is
a warning (not an error) when the totals line disagrees with the parsed
frequencies, since published files are known to contain such slips.
"""

from __future__ import annotations

import csv
import json
import warnings

import numpy as np

from .errors import DataError
from .fit import FitConfig, ModelFit
from .likelihood import EventSet, Parameters
from .rankings import OrderingsTable, RankingsTable, from_rank_matrix

__all__ = [
    "SocFile",
    "read_preflib_soc",
    "read_rank_csv",
    "write_rank_csv",
    "write_model_json",
    "read_model_json",
]

MODEL_JSON_VERSION = 1


class SocFile:
    """Parsed strict-orders file."""

    def __init__(self, item_names: list[str], frequencies: np.ndarray,
                 orderings: list[list[str]], voters: int, vote_sum: int,
                 unique_orders: int):
        self.item_names = item_names
        self.frequencies = frequencies
        self.orderings = orderings
        self.voters = voters
        self.vote_sum = vote_sum
        self.unique_orders = unique_orders


def _split_id_name(line: str) -> tuple[str, str]:
    # names may be quoted (possibly containing commas) or bare
    head, _, rest = line.partition(",")
    rest = rest.strip()
    if rest.startswith('"') and rest.endswith('"') and len(rest) >= 2:
        rest = rest[1:-1]
    return head.strip(), rest


def parse_soc(text: str) -> SocFile:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("empty strict-orders file")
    try:
        n_items = int(lines[0])
    except ValueError as exc:
        raise DataError(f"malformed item count line: {lines[0]!r}") from exc
    if n_items < 1 or len(lines) < n_items + 2:
        raise DataError("strict-orders file truncated before totals line")

    id_to_name: dict[str, str] = {}
    names: list[str] = []
    for ln in lines[1:n_items + 1]:
        item_id, name = _split_id_name(ln)
        if not name:
            name = item_id
        if item_id in id_to_name:
            raise DataError(f"duplicate item id {item_id!r}")
        id_to_name[item_id] = name
        names.append(name)
    if len(set(names)) != len(names):
        raise DataError("duplicate item names")

    totals = lines[n_items + 1].split(",")
    if len(totals) != 3:
        raise DataError(f"malformed totals line: {lines[n_items + 1]!r}")
    try:
        voters, vote_sum, unique_orders = (int(x) for x in totals)
    except ValueError as exc:
        raise DataError(f"malformed totals line: {lines[n_items + 1]!r}") from exc

    freqs: list[float] = []
    orderings: list[list[str]] = []
    for ln in lines[n_items + 2:]:
        parts = [p.strip() for p in ln.split(",")]
        try:
            freq = int(parts[0])
        except ValueError as exc:
            raise DataError(f"malformed frequency in line: {ln!r}") from exc
        if freq <= 0:
            raise DataError(f"non-positive frequency in line: {ln!r}")
        order_ids = parts[1:]
        if sorted(order_ids) != sorted(id_to_name):
            raise DataError(f"ordering is not a permutation of all item ids: {ln!r}")
        freqs.append(freq)
        orderings.append([id_to_name[i] for i in order_ids])

    if len(orderings) != unique_orders:
        warnings.warn(
            f"totals line declares {unique_orders} unique orders, parsed "
            f"{len(orderings)}")
    if int(sum(freqs)) != vote_sum:
        warnings.warn(
            f"totals line declares vote sum {vote_sum}, parsed frequencies "
            f"sum to {int(sum(freqs))}")
    return SocFile(names, np.array(freqs, dtype=float), orderings,
                   voters, vote_sum, unique_orders)


def read_preflib_soc(source) -> tuple[OrderingsTable, np.ndarray]:
    """Read a strict-orders file from a path or file object.

    Returns the orderings (item names substituted for ids) and the
    frequency of each, ready to be used as ranking weights.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    soc = parse_soc(text)
    rows = [[(name,) for name in order] for order in soc.orderings]
    return OrderingsTable(tuple(tuple(r) for r in rows)), soc.frequencies


def _read_csv_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty CSV file") from None
        rows = [r for r in reader if r]
    if not rows:
        raise DataError("CSV file has no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i + 1} has {len(row)} cells, expected {len(header)}")
    return header, rows


def _parse_rank_table(header, rows, weights_col: str | None,
                      group_col: str | None):
    special = {}
    if weights_col is not None:
        if weights_col not in header:
            raise DataError(f"weight column {weights_col!r} not found")
        special[header.index(weights_col)] = "weight"
    if group_col is not None and group_col in header:
        special[header.index(group_col)] = "group"
    item_cols = [k for k in range(len(header)) if k not in special]
    items = [header[k] for k in item_cols]
    matrix = []
    weights = [] if weights_col is not None else None
    groups = [] if (group_col is not None and group_col in header) else None
    for i, row in enumerate(rows):
        try:
            matrix.append([int(row[k]) for k in item_cols])
        except ValueError as exc:
            raise DataError(f"non-integer rank code in row {i + 1}") from exc
        for k, kind in special.items():
            try:
                if kind == "weight":
                    weights.append(float(row[k]))
                else:
                    groups.append(int(row[k]))
            except ValueError as exc:
                raise DataError(f"non-numeric {kind} in row {i + 1}") from exc
    table = from_rank_matrix(np.array(matrix), items,
                             weights=np.array(weights) if weights else None)
    return table, (np.array(groups, dtype=np.int64) if groups else None)


def read_rank_csv(path) -> RankingsTable:
    """Read a rankings table from CSV: header = item names, body = integer
    rank codes.  Columns named "weight" and "group" (exactly) are treated
    as row weights and group ids rather than items."""
    header, rows = _read_csv_rows(path)
    table, _ = _parse_rank_table(
        header, rows,
        weights_col="weight" if "weight" in header else None,
        group_col="group")
    return table


def read_rank_csv_with(path, weights_col: str) -> RankingsTable:
    """Like :func:`read_rank_csv` with an explicitly named weight column."""
    header, rows = _read_csv_rows(path)
    table, _ = _parse_rank_table(header, rows, weights_col=weights_col,
                                 group_col="group")
    return table


def read_rank_csv_grouped(path):
    """Read a rankings CSV returning (table, group ids or None)."""
    header, rows = _read_csv_rows(path)
    return _parse_rank_table(
        header, rows,
        weights_col="weight" if "weight" in header else None,
        group_col="group")


def read_covariates_csv(path):
    """Read per-group covariates: one row per group; a "group" column, if
    present, gives the group id (rows are sorted by it), otherwise row
    order is the group order.  Columns whose values all parse as numbers
    become numeric covariates, everything else categorical."""
    from .tree import CovariateFrame

    header, rows = _read_csv_rows(path)
    if "group" in header:
        gcol = header.index("group")
        try:
            order = sorted(range(len(rows)), key=lambda i: int(rows[i][gcol]))
        except ValueError as exc:
            raise DataError("non-integer group id in covariates CSV") from exc
        rows = [rows[i] for i in order]
        ids = [int(r[gcol]) for r in rows]
        if ids != list(range(1, len(rows) + 1)):
            raise DataError("covariate group ids must cover 1..G exactly once")
    data = {}
    for k, name in enumerate(header):
        if name == "group":
            continue
        data[name] = [r[k] for r in rows]
    return CovariateFrame.from_dict(data)


def write_rank_csv(table: RankingsTable, path, include_weights: bool = True) -> None:
    """Write a rankings table as CSV (inverse of :func:`read_rank_csv`).

    NA rows are written with their stored codes; reading them back flags
    them NA again.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if include_weights:
            writer.writerow([*table.items, "weight"])
            for i in range(table.n_rows):
                writer.writerow([*map(int, table.ranks[i]),
                                 format(table.weights[i], ".17g")])
        else:
            writer.writerow(list(table.items))
            for i in range(table.n_rows):
                writer.writerow(list(map(int, table.ranks[i])))


def _fit_to_dict(fit: ModelFit) -> dict:
    return {
        "kind": "fit",
        "version": MODEL_JSON_VERSION,
        "items": list(fit.items),
        "has_ghost": fit.has_ghost,
        "log_worth": fit.params.log_worth.tolist(),
        "log_tie": fit.params.log_tie.tolist(),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "log_likelihood": fit.log_likelihood,
        "npseudo": fit.npseudo,
        "method": fit.method,
        "df_outcomes": fit.df_outcomes,
    }


def write_model_json(obj, path) -> None:
    """Serialize a fitted model or tree losslessly (floats round-trip
    bit-exactly through JSON's shortest-repr encoding)."""
    from .tree import PLTree, tree_to_dict

    if isinstance(obj, ModelFit):
        payload = _fit_to_dict(obj)
    elif isinstance(obj, PLTree):
        payload = tree_to_dict(obj)
    else:
        raise DataError(f"cannot serialize object of type {type(obj).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


class LoadedFit:
    """Deserialized model parameters and metadata.

    Carries everything needed for reporting (coefficients, worths,
    metrics); re-fit from the original data to recover covariance-based
    inference.
    """

    def __init__(self, d: dict):
        self.items = tuple(d["items"])
        self.has_ghost = bool(d["has_ghost"])
        self.params = Parameters(np.array(d["log_worth"]), np.array(d["log_tie"]))
        self.converged = bool(d["converged"])
        self.iterations = int(d["iterations"])
        self.log_likelihood = float(d["log_likelihood"])
        self.npseudo = float(d["npseudo"])
        self.method = d["method"]
        self.df_outcomes = float(d["df_outcomes"])

    n_real_items = property(lambda self: len(self.items))
    max_tie_order = property(lambda self: self.params.max_tie_order)
    real_log_worth = ModelFit.real_log_worth
    worth = ModelFit.worth
    _ref_weights = ModelFit._ref_weights
    coef = ModelFit.coef
    n_free_params = ModelFit.n_free_params


def read_model_json(path):
    """Read a model JSON file; returns a :class:`LoadedFit` or a tree.

    Raises:
        DataError: unknown kind or version mismatch.
    """
    from .tree import PLTree, tree_from_dict

    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    version = d.get("version")
    if version != MODEL_JSON_VERSION:
        raise DataError(f"unsupported model file version: {version!r}")
    kind = d.get("kind")
    if kind == "fit":
        return LoadedFit(d)
    if kind == "tree":
        return tree_from_dict(d)
    raise DataError(f"unknown model kind: {kind!r}")
