"""Hill-climbing structure learning for discrete Bayesian networks with missing data."""

from .baselines import hc_listwise, structural_em
from .dataset import CategoricalDataset, DatasetView, VariableMeta, load_csv, missing_indicator, pairwise_delete
from .graph import Cpdag, Dag, EdgeOp, OpKind, apply_op, dag_to_cpdag, enumerate_neighbors
from .metrics import compare_dags, cpdag_f1, normalized_shd
from .missingness import MissingnessModel, detect_indicator_parents, ipw_weights, necessary_variables, sufficient_variables
from .scoring import ScoreCache, bic_local, score_delta, total_score
from .search import SearchConfig, Variant, hc_aipw, hc_ipw, hc_pairwise, hill_climb, learn

__version__ = "0.1.0"
