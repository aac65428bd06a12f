"""Greedy hill climbing over DAGs, with pairwise deletion and IPW variants."""

from __future__ import annotations

import csv
import enum
import io
import logging
import time
from dataclasses import dataclass, field

from .dataset import CategoricalDataset, DatasetView, pairwise_delete
from .graph import Dag, EdgeOp, GraphKey, apply_op, changed_nodes, enumerate_neighbors, graph_key, new_parent_sets
from .missingness import (
    IPWeighter,
    MissingnessModel,
    PositivityError,
    detect_indicator_parents,
    indicator_parents_of,
    necessary_variables,
    sufficient_variables,
)
from .scoring import ScoreCache

log = logging.getLogger(__name__)

# Score-equivalent moves (x->y vs y->x) tie exactly in theory but differ by rounding;
# deltas closer than this count as equal, so ties go to enumeration order.
DELTA_TOL = 1e-6


class MissingDataUnsupported(ValueError):
    pass


class Variant(str, enum.Enum):
    HC = "hc"
    PAIRWISE = "hc-pairwise"
    IPW = "hc-ipw"
    AIPW = "hc-aipw"


@dataclass
class SearchConfig:
    variant: Variant = Variant.HC
    alpha: float = 0.05
    max_sepset: int = 3
    max_indegree: int | None = None
    max_iterations: int | None = None
    seed: int = 0
    min_rows_per_df: float = 5.0

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")

    def iteration_limit(self, n: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 10 * n * n


@dataclass
class TraceRecord:
    iteration: int
    op: str
    delta: float
    view_size: int
    weighted: bool
    visited: int


@dataclass
class SearchTrace:
    records: list[TraceRecord] = field(default_factory=list)
    record_keys: list[GraphKey] = field(default_factory=list)
    model: MissingnessModel | None = None
    iterations: int = 0
    hit_iteration_limit: bool = False
    candidates_scored: int = 0
    candidates_skipped: int = 0
    elapsed: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "op", "delta", "view_size", "weighted"])
        for r in self.records:
            w.writerow([r.iteration, r.op, repr(r.delta), r.view_size, int(r.weighted)])
        return buf.getvalue()


@dataclass
class Candidate:
    delta: float
    view_size: int
    weighted: bool


class _Evaluator:
    """Scores one candidate move; returns None when the move cannot be scored."""

    def __init__(self, d: CategoricalDataset, cache: ScoreCache | None = None):
        self.d = d
        self.cache = cache if cache is not None else ScoreCache()
        self._views: dict[frozenset[int], DatasetView] = {}

    def view(self, vars: frozenset[int]) -> DatasetView:
        v = self._views.get(vars)
        if v is None:
            v = self._views[vars] = pairwise_delete(self.d, vars)
        return v

    def _delta(self, g: Dag, op: EdgeOp, view: DatasetView, weights=None, tag=None) -> float:
        new_pa = new_parent_sets(g, op)
        delta = 0.0
        for v in sorted(changed_nodes(g, op)):
            delta += self.cache.family(view, v, new_pa[v], weights, tag).value
            delta -= self.cache.family(view, v, g.parents[v], weights, tag).value
        return delta

    def _unweighted(self, g, op, context) -> Candidate | None:
        view = self.view(context)
        if len(view) == 0:
            return None
        return Candidate(self._delta(g, op, view), len(view), False)

    def __call__(self, g: Dag, op: EdgeOp) -> Candidate | None:
        raise NotImplementedError


class _CompleteEvaluator(_Evaluator):
    def __init__(self, d, cache=None):
        super().__init__(d, cache)
        self._all = frozenset(range(d.n_vars))

    def __call__(self, g, op):
        return self._unweighted(g, op, self._all)


class _PairwiseEvaluator(_Evaluator):
    def __call__(self, g, op):
        return self._unweighted(g, op, necessary_variables(g, op))


class _IPWEvaluator(_Evaluator):
    def __init__(self, d, model: MissingnessModel, cache=None, adaptive: bool = False):
        super().__init__(d, cache)
        self.model = model
        self.adaptive = adaptive
        self.weighter = IPWeighter(d, model)
        self._weights: dict[frozenset[int], object] = {}

    def _weighted(self, g, op, w):
        u = sufficient_variables(w, self.model)
        view = self.view(u)
        if len(view) == 0:
            return None
        if not self.weighter.factors_for(u):
            return Candidate(self._delta(g, op, view), len(view), False)
        cw = self._weights.get(u)
        if cw is None:
            try:
                cw = self.weighter.weights(view, u)
            except PositivityError as exc:
                log.warning("skipping %s: %s", op.describe(self.d.names), exc)
                cw = exc
            self._weights[u] = cw
        if isinstance(cw, PositivityError):
            return None
        return Candidate(self._delta(g, op, view, cw.weights, ("ipw", u)), len(view), True)

    def __call__(self, g, op):
        w = necessary_variables(g, op)
        if self.adaptive:
            pa_rw = indicator_parents_of(w & self.d.partially_observed, self.model)
            if pa_rw & self.d.partially_observed:
                return self._unweighted(g, op, w)
        return self._weighted(g, op, w)


def _neighbor_parents(g: Dag, op: EdgeOp) -> tuple[frozenset[int], ...]:
    pa = list(g.parents)
    for v, s in new_parent_sets(g, op).items():
        pa[v] = s
    return tuple(pa)


def greedy_search(
    d: CategoricalDataset,
    cfg: SearchConfig,
    evaluator: _Evaluator,
    use_record: bool = True,
    start: Dag | None = None,
) -> tuple[Dag, SearchTrace]:
    """Best-improvement hill climbing; ties go to the first move in enumeration order."""
    t0 = time.perf_counter()
    g = start if start is not None else Dag.empty(d.names)
    trace = SearchTrace()
    visited = {g.parents}
    trace.record_keys.append(graph_key(g))
    limit = cfg.iteration_limit(d.n_vars)
    it = 0
    while True:
        if it >= limit:
            trace.hit_iteration_limit = True
            log.warning("stopped after %d iterations without converging", it)
            break
        best_op, best = None, None
        for op in enumerate_neighbors(g, cfg.max_indegree):
            if use_record and _neighbor_parents(g, op) in visited:
                trace.candidates_skipped += 1
                continue
            cand = evaluator(g, op)
            if cand is None:
                trace.candidates_skipped += 1
                continue
            trace.candidates_scored += 1
            if cand.delta > DELTA_TOL and (best is None or cand.delta > best.delta + DELTA_TOL):
                best_op, best = op, cand
        if best_op is None:
            break
        g = apply_op(g, best_op)
        it += 1
        if use_record:
            visited.add(g.parents)
        trace.record_keys.append(graph_key(g))
        trace.records.append(
            TraceRecord(it, best_op.describe(d.names), best.delta, best.view_size, best.weighted, len(trace.record_keys))
        )
    trace.iterations = it
    trace.elapsed = time.perf_counter() - t0
    return g, trace


def hill_climb(d: CategoricalDataset, cfg: SearchConfig | None = None, cache: ScoreCache | None = None):
    """Plain hill climbing on complete data."""
    cfg = cfg or SearchConfig()
    if d.partially_observed:
        raise MissingDataUnsupported(
            f"hc needs complete data; {len(d.partially_observed)} variable(s) have missing values"
        )
    return greedy_search(d, cfg, _CompleteEvaluator(d, cache), use_record=False)


def hc_pairwise(d: CategoricalDataset, cfg: SearchConfig | None = None, cache: ScoreCache | None = None):
    cfg = cfg or SearchConfig(variant=Variant.PAIRWISE)
    return greedy_search(d, cfg, _PairwiseEvaluator(d, cache))


def _model_for(d, cfg, model):
    if model is None:
        t0 = time.perf_counter()
        model = detect_indicator_parents(d, cfg.alpha, cfg.max_sepset, cfg.min_rows_per_df)
        log.info("indicator parents detected in %.2fs:\n%s", time.perf_counter() - t0, model.to_text().rstrip())
    return model


def hc_ipw(d: CategoricalDataset, cfg: SearchConfig | None = None, model: MissingnessModel | None = None, cache=None):
    """Pairwise deletion over the sufficient variables plus inverse probability weights.

    ``model`` overrides the indicator-parent detection step (e.g. with a known truth).
    """
    cfg = cfg or SearchConfig(variant=Variant.IPW)
    model = _model_for(d, cfg, model)
    g, trace = greedy_search(d, cfg, _IPWEvaluator(d, model, cache))
    trace.model = model
    return g, trace


def hc_aipw(d: CategoricalDataset, cfg: SearchConfig | None = None, model: MissingnessModel | None = None, cache=None):
    """As :func:`hc_ipw`, but a move falls back to unweighted deletion over the necessary
    variables whenever one of their indicator parents is itself partially observed."""
    cfg = cfg or SearchConfig(variant=Variant.AIPW)
    model = _model_for(d, cfg, model)
    g, trace = greedy_search(d, cfg, _IPWEvaluator(d, model, cache, adaptive=True))
    trace.model = model
    return g, trace


def learn(d: CategoricalDataset, cfg: SearchConfig, model: MissingnessModel | None = None):
    v = cfg.variant
    if v is Variant.HC:
        return hill_climb(d, cfg)
    if v is Variant.PAIRWISE:
        return hc_pairwise(d, cfg)
    if v is Variant.IPW:
        return hc_ipw(d, cfg, model)
    return hc_aipw(d, cfg, model)
