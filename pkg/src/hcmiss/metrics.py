"""Accuracy of a learned equivalence class against the true one."""

from __future__ import annotations

from typing import NamedTuple

from .graph import Cpdag, Dag, dag_to_cpdag


class F1Result(NamedTuple):
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _marks(learned: Cpdag, truth: Cpdag):
    if tuple(learned.names) != tuple(truth.names):
        raise ValueError("learned and true graphs are over different node sets")
    return learned.edge_marks(), truth.edge_marks()


def cpdag_f1(learned: Cpdag, truth: Cpdag) -> F1Result:
    """An edge is a true positive only when adjacency and orientation (or lack of it) both match."""
    lm, tm = _marks(learned, truth)
    tp = sum(1 for e, o in lm.items() if e in tm and tm[e] == o)
    fp = len(lm) - tp
    fn = len(tm) - tp
    if tp + fp + fn == 0:
        return F1Result(1.0, 1.0, 1.0, 0, 0, 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return F1Result(precision, recall, 2 * tp / (2 * tp + fp + fn), tp, fp, fn)


def shd(learned: Cpdag, truth: Cpdag) -> int:
    """One unit per node pair that is extra, missing, or differently oriented."""
    lm, tm = _marks(learned, truth)
    out = 0
    for e in lm.keys() | tm.keys():
        if e not in lm or e not in tm or lm[e] != tm[e]:
            out += 1
    return out


def normalized_shd(learned: Cpdag, truth: Cpdag) -> float:
    if truth.n_edges == 0:
        raise ValueError("normalized SHD is undefined for an edgeless true graph")
    return shd(learned, truth) / truth.n_edges


def compare_dags(learned: Dag, truth: Dag) -> dict:
    lc, tc = dag_to_cpdag(learned), dag_to_cpdag(truth)
    f = cpdag_f1(lc, tc)
    return {
        "f1": f.f1,
        "precision": f.precision,
        "recall": f.recall,
        "shd": shd(lc, tc),
        "shd_normalized": normalized_shd(lc, tc) if tc.n_edges else float("nan"),
    }
