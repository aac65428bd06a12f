"""Decomposable BIC, plain and inverse-probability weighted."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .dataset import DatasetView, contingency_counts
from .graph import Dag, EdgeOp, changed_nodes, new_parent_sets


class EmptyView(ValueError):
    """Raised when a family is scored on a view with no rows."""


@dataclass(frozen=True)
class FamilyScore:
    value: float
    n_eff: int
    context_key: Hashable


def _xlogx_ratio(counts: np.ndarray) -> float:
    """sum_jk N_jk log(N_jk / N_j) with 0 log 0 = 0."""
    marg = counts.sum(axis=1, keepdims=True)
    nz = counts > 0
    if not nz.any():
        return 0.0
    ratio = counts[nz] / np.broadcast_to(marg, counts.shape)[nz]
    return float(np.sum(counts[nz] * np.log(ratio)))


def weights_fingerprint(weights) -> str | None:
    if weights is None:
        return None
    w = np.ascontiguousarray(np.asarray(getattr(weights, "weights", weights), dtype=float))
    return hashlib.sha1(w.tobytes()).hexdigest()


def family_key(view: DatasetView, child: int, parents, weights_tag=None) -> tuple:
    return (view.base.fingerprint, child, frozenset(parents), view.context, len(view), weights_tag)


def bic_local(view: DatasetView, child, parents=(), weights=None) -> FamilyScore:
    """BIC contribution of one family on ``view``.

    The penalty is ``log(|view|) / 2 * (r - 1) * q`` with ``q`` the full number of
    parent configurations; with weights the likelihood uses the weighted counts
    while the penalty keeps the unweighted view size.
    """
    n = len(view)
    if n == 0:
        raise EmptyView(f"no rows left to score family of {child}")
    d = view.base
    c = d.index(child)
    pa = tuple(sorted(d.indices(parents)))
    table = contingency_counts(view, c, pa, weights)
    loglik = _xlogx_ratio(table.counts)
    penalty = 0.5 * math.log(n) * (table.r - 1) * table.q
    return FamilyScore(loglik - penalty, n, family_key(view, c, pa, weights_fingerprint(weights)))


class ScoreCache:
    """Context-keyed memo of family scores; a key never changes its value."""

    def __init__(self):
        self._store: dict[Hashable, FamilyScore] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def __contains__(self, key):
        return key in self._store

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value: FamilyScore):
        self._store.setdefault(key, value)

    def family(self, view: DatasetView, child: int, parents, weights=None, weights_tag=None) -> FamilyScore:
        if weights is not None and weights_tag is None:
            weights_tag = weights_fingerprint(weights)
        key = family_key(view, child, parents, weights_tag)
        hit = self._store.get(key)
        if hit is not None:
            self.hits += 1
            return hit
        self.misses += 1
        fs = bic_local(view, child, parents, weights)
        self._store[key] = fs
        return fs


def total_score(g: Dag, view: DatasetView, weights=None) -> float:
    return sum(bic_local(view, i, g.parents[i], weights).value for i in range(g.n))


def score_delta(g: Dag, op: EdgeOp, view: DatasetView, weights=None, cache: ScoreCache | None = None) -> float:
    """Score change of ``op`` summed over the families it touches, all on one view."""
    nodes = changed_nodes(g, op)
    new_pa = new_parent_sets(g, op)
    tag = weights_fingerprint(weights) if cache is not None else None
    delta = 0.0
    for v in sorted(nodes):
        if cache is None:
            new = bic_local(view, v, new_pa[v], weights).value
            old = bic_local(view, v, g.parents[v], weights).value
        else:
            new = cache.family(view, v, new_pa[v], weights, tag).value
            old = cache.family(view, v, g.parents[v], weights, tag).value
        delta += new - old
    return delta
