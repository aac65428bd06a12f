"""Reference learners: complete-case hill climbing and a single-imputation Structural EM."""

from __future__ import annotations

import logging

import numpy as np

from .dataset import MISSING, CategoricalDataset, full_view, contingency_counts, parent_config_index
from .graph import Dag
from .search import SearchConfig, hill_climb
from .synth import most_frequent_state

log = logging.getLogger(__name__)


class NoCompleteRows(ValueError):
    pass


def hc_listwise(d: CategoricalDataset, cfg: SearchConfig | None = None) -> Dag:
    rows = d.complete_rows()
    if len(rows) == 0:
        raise NoCompleteRows("every row has at least one missing value")
    if len(rows) == d.n_rows:
        return hill_climb(d, cfg)[0]
    return hill_climb(d.subset_rows(rows), cfg)[0]


def fit_parameters(d: CategoricalDataset, g: Dag, pseudocount: float = 1.0) -> list[np.ndarray]:
    """Smoothed MLE CPTs, shaped (parent configurations, states), on complete data."""
    view = full_view(d)
    out = []
    for i in range(g.n):
        pa = tuple(sorted(g.parents[i]))
        t = contingency_counts(view, i, pa)
        dense = np.zeros((t.q, t.r))
        dense[t.configs] = t.counts
        dense += pseudocount
        out.append(dense / dense.sum(axis=1, keepdims=True))
    return out


class _Cells:
    # light stand-in so parent_config_index can read a working cell matrix
    def __init__(self, d, cells):
        self.cells = cells
        self.cardinalities = d.cardinalities


def impute_markov_blanket(d: CategoricalDataset, cells: np.ndarray, g: Dag, cpts) -> np.ndarray:
    """Set every originally-missing cell to its most probable state given its Markov blanket.

    Variables are visited in index order, each using the current values of the others.
    """
    cells = cells.copy()
    wc = _Cells(d, cells)
    for v in sorted(d.partially_observed):
        rows = np.flatnonzero(d.missing[:, v])
        r = int(d.cardinalities[v])
        score = np.zeros((len(rows), r))
        for k in range(r):
            cells[rows, v] = k
            cfg, _ = parent_config_index(wc, sorted(g.parents[v]), rows)
            score[:, k] = np.log(cpts[v][cfg, k])
            for c in g.children[v]:
                ccfg, _ = parent_config_index(wc, sorted(g.parents[c]), rows)
                score[:, k] += np.log(cpts[c][ccfg, cells[rows, c]])
        cells[rows, v] = np.argmax(score, axis=1)
    return cells


def structural_em(d: CategoricalDataset, cfg: SearchConfig | None = None, max_em_iters: int = 20) -> Dag:
    """Alternate hill climbing on completed data with Markov-blanket single imputation.

    Starts from column-mode imputation and stops once a learned DAG repeats.
    """
    cfg = cfg or SearchConfig()
    if not d.partially_observed:
        return hill_climb(d, cfg)[0]
    cells = np.array(d.cells, copy=True)
    for v in d.partially_observed:
        col = cells[:, v]
        col[col == MISSING] = most_frequent_state(d.cells[:, v], int(d.cardinalities[v]))
    seen: list[Dag] = []
    g = None
    for it in range(max_em_iters):
        completed = d.with_cells(cells)
        g, _ = hill_climb(completed, cfg)
        if g in seen:
            log.info("structural EM converged after %d iterations", it + 1)
            break
        seen.append(g)
        cpts = fit_parameters(completed, g)
        cells = impute_markov_blanket(d, cells, g, cpts)
    return g
