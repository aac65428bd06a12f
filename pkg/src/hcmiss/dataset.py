"""Discrete data tables with missing cells, pairwise-deleted views and counting."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MISSING = -1


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class VariableMeta:
    name: str
    cardinality: int
    state_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.state_labels) != self.cardinality:
            raise DatasetError(f"{self.name}: {len(self.state_labels)} labels for cardinality {self.cardinality}")
        if self.cardinality < 2:
            raise DatasetError(f"{self.name}: cardinality must be >= 2, got {self.cardinality}")


class CategoricalDataset:
    """Immutable N x n table of state indices; ``MISSING`` (-1) marks a missing cell."""

    def __init__(self, variables: Sequence[VariableMeta], cells):
        cells = np.array(cells, dtype=np.int64, copy=True)
        if cells.ndim != 2 or cells.shape[1] != len(variables):
            raise DatasetError(f"cell matrix shape {cells.shape} does not match {len(variables)} variables")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DatasetError("variable names must be unique")
        for j, v in enumerate(variables):
            col = cells[:, j]
            bad = (col != MISSING) & ((col < 0) | (col >= v.cardinality))
            if bad.any():
                raise DatasetError(f"{v.name}: state index out of range at row {int(np.argmax(bad))}")
        cells.setflags(write=False)
        self.variables = tuple(variables)
        self.cells = cells
        self._index = {name: j for j, name in enumerate(names)}

    @classmethod
    def from_codes(cls, codes, names: Sequence[str] | None = None, cardinalities: Sequence[int] | None = None):
        """Build from an integer matrix; labels are the state indices as strings."""
        codes = np.asarray(codes, dtype=np.int64)
        n = codes.shape[1]
        if names is None:
            names = [f"V{i + 1}" for i in range(n)]
        if cardinalities is None:
            cardinalities = [max(int(codes[:, j].max(initial=-1)) + 1, 2) for j in range(n)]
        metas = [VariableMeta(nm, int(r), tuple(str(k) for k in range(int(r)))) for nm, r in zip(names, cardinalities)]
        return cls(metas, codes)

    def __repr__(self):
        return f"CategoricalDataset(n_rows={self.n_rows}, variables={list(self.names)})"

    def __len__(self):
        return self.n_rows

    @property
    def n_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def n_vars(self) -> int:
        return self.cells.shape[1]

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def cardinalities(self) -> np.ndarray:
        r = np.array([v.cardinality for v in self.variables], dtype=np.int64)
        r.setflags(write=False)
        return r

    @cached_property
    def missing(self) -> np.ndarray:
        m = self.cells == MISSING
        m.setflags(write=False)
        return m

    @cached_property
    def partially_observed(self) -> frozenset[int]:
        """Indices of V_m, the variables with at least one missing cell."""
        return frozenset(np.flatnonzero(self.missing.any(axis=0)).tolist())

    @cached_property
    def fully_observed(self) -> frozenset[int]:
        return frozenset(range(self.n_vars)) - self.partially_observed

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.cells.shape).encode())
        for v in self.variables:
            h.update(repr((v.name, v.cardinality, v.state_labels)).encode())
        h.update(np.ascontiguousarray(self.cells).tobytes())
        return h.hexdigest()

    def index(self, v) -> int:
        """Column index of a variable given by name or index."""
        if isinstance(v, (int, np.integer)):
            if not 0 <= v < self.n_vars:
                raise KeyError(f"unknown variable index {v}")
            return int(v)
        try:
            return self._index[v]
        except KeyError:
            raise KeyError(f"unknown variable {v!r}") from None

    def indices(self, vs: Iterable) -> list[int]:
        return [self.index(v) for v in vs]

    def complete_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.missing.any(axis=1))

    def subset_rows(self, rows) -> "CategoricalDataset":
        return CategoricalDataset(self.variables, self.cells[np.asarray(rows)])

    def with_cells(self, cells) -> "CategoricalDataset":
        """Same variables, different cell matrix."""
        return CategoricalDataset(self.variables, cells)

    def decode(self, row: int) -> list[str]:
        out = []
        for v, c in zip(self.variables, self.cells[row]):
            out.append("" if c == MISSING else v.state_labels[c])
        return out

    def to_csv(self, path, missing_token: str = "?"):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for s in range(self.n_rows):
                w.writerow([missing_token if c == MISSING else v.state_labels[c] for v, c in zip(self.variables, self.cells[s])])


def load_csv(path, missing_token: str = "?") -> CategoricalDataset:
    """Read a header-plus-rows CSV; states are indexed in sorted label order.

    Both ``missing_token`` and the empty string mark a missing cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    n = len(header)
    for i, r in enumerate(body, start=2):
        if len(r) != n:
            raise DatasetError(f"{path}: line {i} has {len(r)} fields, expected {n}")
    metas, cols = [], []
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        labels = sorted({x for x in raw if x != missing_token and x != ""})
        if len(labels) < 2:
            raise DatasetError(f"{path}: column {name!r} has {len(labels)} observed state(s), need >= 2")
        code = {lab: k for k, lab in enumerate(labels)}
        cols.append([code.get(x, MISSING) if x != missing_token else MISSING for x in raw])
        metas.append(VariableMeta(name, len(labels), tuple(labels)))
    cells = np.array(cols, dtype=np.int64).T.reshape(len(body), n)
    return CategoricalDataset(metas, cells)


def missing_indicator(d: CategoricalDataset, v) -> np.ndarray:
    """R_v: 1 where the cell is missing, 0 where it was recorded."""
    return d.missing[:, d.index(v)].astype(np.int8)


@dataclass(frozen=True)
class DatasetView:
    """Rows of ``base`` with no missing cell among the ``context`` columns."""

    base: CategoricalDataset
    row_indices: np.ndarray
    context: frozenset[int]

    def __len__(self):
        return len(self.row_indices)

    @property
    def is_full(self) -> bool:
        return len(self.row_indices) == self.base.n_rows

    def column(self, j: int) -> np.ndarray:
        col = self.base.cells[:, j]
        return col if self.is_full else col[self.row_indices]


def pairwise_delete(d: CategoricalDataset, vars) -> DatasetView:
    cols = sorted(set(d.indices(vars)))
    if not cols:
        raise DatasetError("pairwise deletion needs at least one variable")
    m = d.missing[:, cols].any(axis=1)
    rows = np.flatnonzero(~m)
    rows.setflags(write=False)
    return DatasetView(d, rows, frozenset(cols))


def full_view(d: CategoricalDataset) -> DatasetView:
    rows = np.arange(d.n_rows)
    rows.setflags(write=False)
    return DatasetView(d, rows, frozenset(range(d.n_vars)) if not d.partially_observed else frozenset(d.fully_observed))


@dataclass
class ContingencyTable:
    """Counts of (parent configuration, child state); only supported configurations are stored.

    ``configs[j]`` is the mixed-radix parent configuration index of row ``j`` of ``counts``;
    ``q`` is the full Cartesian number of parent configurations.
    """

    counts: np.ndarray
    configs: np.ndarray
    q: int
    r: int
    parents: tuple[int, ...] = field(default=())

    @property
    def marginals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def row(self, config: int) -> np.ndarray:
        hit = np.flatnonzero(self.configs == config)
        if len(hit) == 0:
            return np.zeros(self.r)
        return self.counts[hit[0]]


_DENSE_LIMIT = 1 << 22


def parent_config_index(d: CategoricalDataset, cols: Sequence[int], rows=None) -> tuple[np.ndarray, int]:
    """Mixed-radix index of each row's configuration over ``cols`` (first column fastest)."""
    n = d.n_rows if rows is None else len(rows)
    idx = np.zeros(n, dtype=np.int64)
    q = 1
    for j in cols:
        col = d.cells[:, j] if rows is None else d.cells[rows, j]
        idx += col * q
        q *= int(d.cardinalities[j])
    return idx, q


def contingency_counts(view: DatasetView, child, parents=(), weights=None) -> ContingencyTable:
    d = view.base
    c = d.index(child)
    pa = tuple(sorted(d.indices(parents)))
    if c in pa:
        raise DatasetError("child cannot be its own parent")
    if not {c, *pa} <= view.context:
        # context is a promise; still verify there is nothing missing
        cols = [c, *pa]
        if d.missing[np.ix_(view.row_indices, cols)].any():
            raise DatasetError("missing cell encountered among counted variables")
    rows = None if view.is_full else view.row_indices
    w = None
    if weights is not None:
        w = np.asarray(getattr(weights, "weights", weights), dtype=float)
        if len(w) != len(view):
            raise DatasetError(f"weight length {len(w)} does not match view size {len(view)}")
    r = int(d.cardinalities[c])
    cfg, q = parent_config_index(d, pa, rows)
    child_col = d.cells[:, c] if rows is None else d.cells[rows, c]
    if q * r <= _DENSE_LIMIT:
        flat = np.bincount(cfg * r + child_col, weights=w, minlength=q * r).reshape(q, r)
        support = np.flatnonzero(flat.sum(axis=1) > 0) if weights is not None else np.flatnonzero(flat.any(axis=1))
        counts = flat[support]
        configs = support
    else:
        configs, inv = np.unique(cfg, return_inverse=True)
        counts = np.bincount(inv * r + child_col, weights=w, minlength=len(configs) * r).reshape(len(configs), r)
    if weights is None:
        counts = counts.astype(float)
    return ContingencyTable(counts, configs, q, r, pa)
