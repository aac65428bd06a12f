"""Missing-indicator parents, necessary/sufficient variable sets and IPW case weights."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from .dataset import CategoricalDataset, DatasetView, pairwise_delete, parent_config_index
from .graph import Dag, EdgeOp, changed_nodes, new_parent_sets

log = logging.getLogger(__name__)


class PositivityError(ValueError):
    """An occurring configuration has zero estimated probability in a weight denominator."""


@dataclass(frozen=True)
class MissingnessModel:
    """Detected parents of each partially observed variable's missing indicator."""

    parents: Mapping[int, frozenset[int]]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parents", {int(k): frozenset(v) for k, v in self.parents.items()})
        for i, pa in self.parents.items():
            if i in pa:
                raise ValueError(f"variable {i} cannot be a parent of its own missing indicator")

    @classmethod
    def empty(cls, d: CategoricalDataset) -> "MissingnessModel":
        return cls({i: frozenset() for i in sorted(d.partially_observed)}, d.names)

    def of(self, i: int) -> frozenset[int]:
        return self.parents.get(i, frozenset())

    @property
    def is_empty(self) -> bool:
        return not any(self.parents.values())

    def _name(self, i):
        return self.names[i] if self.names else f"V{i + 1}"

    def to_text(self) -> str:
        lines = []
        for i in sorted(self.parents):
            pa = ", ".join(self._name(p) for p in sorted(self.parents[i]))
            lines.append(f"R({self._name(i)}): [{pa}]")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, names: Sequence[str]) -> "MissingnessModel":
        pos = {nm: i for i, nm in enumerate(names)}
        out = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            m = re.fullmatch(r"R\((.+?)\)\s*:\s*\[(.*)\]", line)
            if not m:
                raise ValueError(f"malformed missingness line {raw!r}")
            pa = [p.strip() for p in m.group(2).split(",") if p.strip()]
            out[pos[m.group(1).strip()]] = frozenset(pos[p] for p in pa)
        return cls(out, tuple(names))


@dataclass
class CaseWeights:
    weights: np.ndarray
    context: frozenset[int] = field(default_factory=frozenset)

    def __len__(self):
        return len(self.weights)


# ---------------------------------------------------------------- variable sets


def necessary_variables(g: Dag, op: EdgeOp) -> frozenset[int]:
    """Changed nodes together with their parent sets before and after ``op``."""
    out = set()
    new = new_parent_sets(g, op)
    for v in changed_nodes(g, op):
        out.add(v)
        out |= g.parents[v]
        out |= new[v]
    return frozenset(out)


def sufficient_variables(w: Iterable[int], m: MissingnessModel) -> frozenset[int]:
    """Close ``w`` under adding the indicator parents of its members."""
    u = set(w)
    frontier = list(u)
    while frontier:
        v = frontier.pop()
        for p in m.of(v):
            if p not in u:
                u.add(p)
                frontier.append(p)
    return frozenset(u)


def indicator_parents_of(w: Iterable[int], m: MissingnessModel) -> frozenset[int]:
    """Union of the indicator parents of the members of ``w`` (one step, no closure)."""
    out: set[int] = set()
    for v in w:
        out |= m.of(v)
    return frozenset(out)


# ---------------------------------------------------------------- CI testing


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    df: int
    p_value: float
    n: int
    abstained: bool = False

    def independent(self, alpha: float) -> bool:
        return self.abstained or self.p_value > alpha


def g2_test(x: np.ndarray, rx: int, y: np.ndarray, ry: int, s_index: np.ndarray, qs: int, min_rows_per_df: float = 5.0) -> CITestResult:
    """G^2 test of x _||_ y | s on aligned code vectors; s given as a configuration index."""
    n = len(x)
    flat = np.bincount((s_index * rx + x) * ry + y, minlength=qs * rx * ry) if qs * rx * ry <= 1 << 22 else None
    if flat is None:
        _, s_index = np.unique(s_index, return_inverse=True)
        qs = int(s_index.max(initial=-1)) + 1
        flat = np.bincount((s_index * rx + x) * ry + y, minlength=qs * rx * ry)
    obs = flat.reshape(qs, rx, ry).astype(float)
    tot = obs.sum(axis=(1, 2))
    obs = obs[tot > 0]
    tot = tot[tot > 0]
    df = len(tot) * (rx - 1) * (ry - 1)
    if n == 0 or df == 0 or n < min_rows_per_df * df:
        return CITestResult(0.0, df, 1.0, n, abstained=True)
    rowm = obs.sum(axis=2, keepdims=True)
    colm = obs.sum(axis=1, keepdims=True)
    exp = rowm * colm / tot[:, None, None]
    nz = obs > 0
    stat = 2.0 * float(np.sum(obs[nz] * np.log(obs[nz] / exp[nz])))
    stat = max(stat, 0.0)
    return CITestResult(stat, df, float(chi2.sf(stat, df)), n)


def ci_test_result(d: CategoricalDataset, x, y, s=(), min_rows_per_df: float = 5.0) -> CITestResult:
    """``x`` is a variable of ``d`` or a binary vector over all rows (e.g. a missing indicator)."""
    yi = d.index(y)
    si = d.indices(s)
    if isinstance(x, (str, int, np.integer)):
        xi = d.index(x)
        view = pairwise_delete(d, [xi, yi, *si])
        rows = view.row_indices
        xv, rx = d.cells[rows, xi], int(d.cardinalities[xi])
    else:
        xfull = np.asarray(x, dtype=np.int64)
        if len(xfull) != d.n_rows:
            raise ValueError("indicator vector length must equal the number of rows")
        view = pairwise_delete(d, [yi, *si])
        rows = view.row_indices
        xv, rx = xfull[rows], 2
    yv, ry = d.cells[rows, yi], int(d.cardinalities[yi])
    s_idx, qs = parent_config_index(d, si, rows)
    res = g2_test(xv, rx, yv, ry, s_idx, qs, min_rows_per_df)
    if res.abstained:
        log.debug("CI test abstained: %d rows for df=%d", res.n, res.df)
    return res


def ci_test(d: CategoricalDataset, x, y, s=(), alpha: float = 0.05, min_rows_per_df: float = 5.0) -> bool:
    """True when x and y are judged independent given s on the test-wise deleted rows."""
    return ci_test_result(d, x, y, s, min_rows_per_df).independent(alpha)


def detect_indicator_parents(
    d: CategoricalDataset, alpha: float = 0.05, max_sepset: int = 3, min_rows_per_df: float = 5.0
) -> MissingnessModel:
    """PC-style elimination of candidate parents for every missing indicator.

    A candidate V_j of R_i is dropped as soon as some S within the remaining
    candidates (|S| <= max_sepset, smallest sets first) makes the G^2 test accept
    independence on the rows where V_j and S are observed.
    """
    out = {}
    for i in sorted(d.partially_observed):
        r_i = d.missing[:, i].astype(np.int64)
        cand = [j for j in range(d.n_vars) if j != i]
        level = 0
        while level <= max_sepset and len(cand) - 1 >= level:
            for j in list(cand):
                if j not in cand:
                    continue
                others = [k for k in cand if k != j]
                for s in combinations(others, level):
                    if ci_test(d, r_i, j, s, alpha, min_rows_per_df):
                        cand.remove(j)
                        break
            level += 1
        out[i] = frozenset(cand)
        if cand:
            log.info("R(%s) <- %s", d.names[i], [d.names[c] for c in sorted(cand)])
    return MissingnessModel(out, d.names)


# ---------------------------------------------------------------- weights


class IPWeighter:
    """Per-indicator weight factors, computed once from the full data.

    factor_i(row) = P(pa | pa observed) / P(pa | V_i and pa observed), where
    ``pa`` is the indicator's parent configuration in that row.
    """

    def __init__(self, d: CategoricalDataset, m: MissingnessModel):
        self.d = d
        self.m = m
        self._factor: dict[int, np.ndarray] = {}
        self._zero_denominator: dict[int, np.ndarray] = {}
        for i, pa in m.parents.items():
            if not pa or i not in d.partially_observed:
                continue
            cols = sorted(pa)
            cfg, q = parent_config_index(d, cols)
            pa_obs = ~d.missing[:, cols].any(axis=1)
            both = pa_obs & ~d.missing[:, i]
            num = np.bincount(cfg[pa_obs], minlength=q).astype(float)
            den = np.bincount(cfg[both], minlength=q).astype(float)
            if num.sum() == 0 or den.sum() == 0:
                raise PositivityError(f"no rows to estimate weights for R({d.names[i]})")
            num /= num.sum()
            den /= den.sum()
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(den > 0, num / den, np.nan)
            row_factor = np.full(d.n_rows, np.nan)
            row_factor[pa_obs] = ratio[cfg[pa_obs]]
            self._factor[i] = row_factor
            self._zero_denominator[i] = np.flatnonzero(den == 0)

    def factors_for(self, u: Iterable[int]) -> list[int]:
        return sorted(i for i in u if i in self._factor)

    def weights(self, view: DatasetView, u: Iterable[int]) -> CaseWeights:
        u = frozenset(u)
        if not u <= view.context:
            raise ValueError("view must be deleted over every sufficient variable")
        for i in self.factors_for(u):
            if not self.m.of(i) <= u:
                raise ValueError(f"indicator parents of {self.d.names[i]} are not all in the variable set")
        w = np.ones(len(view))
        for i in self.factors_for(u):
            f = self._factor[i][view.row_indices]
            if not np.all(np.isfinite(f)):
                bad = view.row_indices[np.flatnonzero(~np.isfinite(f))[0]]
                cfg = {self.d.names[p]: self.d.decode(bad)[p] for p in sorted(self.m.of(i))}
                raise PositivityError(f"R({self.d.names[i]}): zero denominator for configuration {cfg}")
            w *= f
        return CaseWeights(w, u)


def ipw_weights(view: DatasetView, u, m: MissingnessModel, d: CategoricalDataset) -> CaseWeights:
    return IPWeighter(d, m).weights(view, u)
