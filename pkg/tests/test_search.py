import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcmiss.dataset import CategoricalDataset, full_view
from hcmiss.graph import Dag, EdgeOp, OpKind, apply_op, dag_to_cpdag, enumerate_neighbors
from hcmiss.missingness import MissingnessModel
from hcmiss.scoring import total_score
from hcmiss.search import (
    Candidate,
    MissingDataUnsupported,
    SearchConfig,
    Variant,
    _Evaluator,
    _IPWEvaluator,
    _PairwiseEvaluator,
    greedy_search,
    hc_aipw,
    hc_ipw,
    hc_pairwise,
    hill_climb,
    learn,
)
from hcmiss.synth import chain3_system, forward_sample, inject_missing, make_missingness_spec, random_network


def test_independent_columns_give_empty_graph():
    rng = np.random.default_rng(0)
    d = CategoricalDataset.from_codes(rng.integers(0, 2, (20000, 3)))
    g, trace = hill_climb(d)
    assert g.edges == () and trace.iterations == 0


def test_strong_dependence_found():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 2, 10000)
    y = np.where(rng.random(10000) < 0.9, x, 1 - x)
    d = CategoricalDataset.from_codes(np.column_stack([x, y]))
    g, _ = hill_climb(d)
    c = dag_to_cpdag(g)
    assert c.undirected == {frozenset((0, 1))} and not c.directed


@pytest.mark.parametrize("seed", range(5))
def test_result_is_local_maximum(seed):
    gt = random_network(4, "dense", seed=seed)
    d = forward_sample(gt, 1000, seed=seed)
    g, _ = hill_climb(d)
    v = full_view(d)
    best = total_score(g, v)
    for op in enumerate_neighbors(g):
        assert total_score(apply_op(g, op), v) <= best + 1e-6


def test_hc_refuses_missing_data():
    d = CategoricalDataset.from_codes([[0, 1], [-1, 0], [1, 1]], cardinalities=[2, 2])
    with pytest.raises(MissingDataUnsupported):
        hill_climb(d)


@pytest.mark.parametrize("seed", range(4))
def test_variants_agree_on_complete_data(seed):
    gt = random_network(6, "sparse", seed=seed)
    d = forward_sample(gt, 2000, seed=seed)
    ref, ref_trace = hill_climb(d)
    for f in (hc_pairwise, hc_ipw, hc_aipw):
        g, trace = f(d)
        assert g == ref
        assert [r.op for r in trace.records] == [r.op for r in ref_trace.records]


class _Cyclic(_Evaluator):
    """Two nodes; every move to the 'next' graph of a 3-cycle looks like an improvement."""

    ring = [(), ((0, 1),), ((1, 0),)]

    def __call__(self, g, op):
        h = apply_op(g, op)
        i, j = self.ring.index(g.edges), self.ring.index(h.edges)
        return Candidate(1.0 if j == (i + 1) % 3 else -1.0, 10, False)


def test_record_breaks_preference_cycles():
    d = CategoricalDataset.from_codes(np.zeros((10, 2), dtype=int), cardinalities=[2, 2])
    cfg = SearchConfig(max_iterations=50)
    g, trace = greedy_search(d, cfg, _Cyclic(d), use_record=True)
    assert not trace.hit_iteration_limit
    assert len(set(trace.record_keys)) == len(trace.record_keys)
    _, loop = greedy_search(d, cfg, _Cyclic(d), use_record=False)
    assert loop.hit_iteration_limit


def test_pairwise_under_mcar_recovers_chain():
    agree = 0
    for seed in range(20):
        gt, spec = chain3_system("mcar")
        full = forward_sample(gt, 50000, seed=seed)
        d = inject_missing(full, spec, seed=seed)
        agree += dag_to_cpdag(hc_pairwise(d)[0]) == dag_to_cpdag(hill_climb(full)[0])
    assert agree >= 18


def test_ipw_without_indicator_parents_follows_pairwise():
    gt = random_network(8, "sparse", seed=3)
    full = forward_sample(gt, 3000, seed=3)
    d = inject_missing(full, make_missingness_spec(full, "mcar", seed=3), seed=3)
    model = MissingnessModel.empty(d)
    pw = hc_pairwise(d)[1].to_csv()
    assert hc_ipw(d, model=model)[1].to_csv() == pw
    assert hc_aipw(d, model=model)[1].to_csv() == pw


def test_aipw_equals_ipw_when_indicator_parents_fully_observed():
    gt = random_network(8, "sparse", seed=4)
    full = forward_sample(gt, 3000, seed=4)
    spec = make_missingness_spec(full, "mar", seed=4)
    d = inject_missing(full, spec, seed=4)
    model = spec.true_model(d.n_vars, d.names)
    a, b = hc_ipw(d, model=model), hc_aipw(d, model=model)
    assert a[0] == b[0]
    assert a[1].to_csv() == b[1].to_csv()


def six_variable_case():
    """R6 <- V1, R1 <- V4, R4 <- V5; current graph has V2 -> V5."""
    rng = np.random.default_rng(7)
    cells = rng.integers(0, 2, (4000, 6))
    for child, parent in ((5, 0), (0, 3), (3, 4)):
        p = np.where(cells[:, parent] == 0, 0.4, 0.1)
        cells[rng.random(4000) < p, child] = -1
    d = CategoricalDataset.from_codes(cells, cardinalities=[2] * 6)
    m = MissingnessModel({5: frozenset({0}), 0: frozenset({3}), 3: frozenset({4})})
    return d, m, Dag.from_edges(6, [(1, 4)]), EdgeOp(OpKind.ADD, 5, 4)


def test_weighted_view_uses_sufficient_variables():
    d, m, g, op = six_variable_case()
    pw = _PairwiseEvaluator(d)(g, op)
    ipw = _IPWEvaluator(d, m)(g, op)
    n_u = int((~d.missing[:, [0, 1, 3, 4, 5]].any(axis=1)).sum())
    assert ipw.weighted and ipw.view_size == n_u < pw.view_size


def test_adaptive_falls_back_to_necessary_variables():
    d, m, g, op = six_variable_case()
    pw = _PairwiseEvaluator(d)(g, op)
    aipw = _IPWEvaluator(d, m, adaptive=True)(g, op)
    assert not aipw.weighted
    assert aipw.view_size == pw.view_size
    assert aipw.delta == pw.delta


def test_learn_dispatch_and_trace_csv():
    gt, spec = chain3_system("mar")
    d = inject_missing(forward_sample(gt, 5000, seed=0), spec, seed=0)
    g, trace = learn(d, SearchConfig(variant="hc-aipw"))
    assert trace.model.parents == {1: frozenset({0})}
    lines = trace.to_csv().splitlines()
    assert lines[0] == "iteration,op,delta,view_size,weighted"
    assert len(lines) == trace.iterations + 1
    with pytest.raises(ValueError):
        SearchConfig(variant="bogus")


def test_max_iterations_respected():
    gt = random_network(6, "dense", seed=0)
    d = forward_sample(gt, 2000, seed=0)
    g, trace = hill_climb(d, SearchConfig(max_iterations=2))
    assert trace.iterations == 2 and trace.hit_iteration_limit


@settings(max_examples=25, deadline=None)
@given(
    st.integers(2, 5), st.integers(20, 200), st.floats(0.0, 0.6), st.integers(0, 2**32 - 1),
    st.sampled_from(list(Variant)[1:]),
)
def test_fuzzed_runs_terminate_without_revisits(n, rows, rate, seed, variant):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 3, (rows, n))
    cells[rng.random((rows, n)) < rate] = -1
    d = CategoricalDataset.from_codes(cells, cardinalities=[3] * n)
    g, trace = learn(d, SearchConfig(variant=variant))
    assert not trace.hit_iteration_limit
    assert len(set(trace.record_keys)) == len(trace.record_keys)
