"""Random ground-truth networks, ancestral sampling and missingness injection."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import MISSING, CategoricalDataset, VariableMeta
from .graph import Dag, topological_order


class Density(str, enum.Enum):
    SPARSE = "sparse"
    DENSE = "dense"


EDGE_FACTOR = {Density.SPARSE: 2.0, Density.DENSE: 4.0}


def _rng(seed, *stream) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *stream])


def random_dag(n: int, density: Density | str = Density.SPARSE, seed: int = 0) -> Dag:
    """Edges go from earlier to later nodes of a random order, each w.p. k/(n-1), k=2 or 4."""
    if n < 2:
        raise ValueError("need at least two nodes")
    density = Density(density)
    rng = _rng(seed, 0)
    order = rng.permutation(n)
    p = min(1.0, EDGE_FACTOR[density] / (n - 1))
    draws = rng.random((n, n))
    edges = [
        (int(order[a]), int(order[b]))
        for a in range(n)
        for b in range(a + 1, n)
        if draws[a, b] < p
    ]
    return Dag.from_edges(n, edges)


@dataclass
class GroundTruth:
    """A DAG with one CPT per node, shaped (parent configurations, states).

    Parent configurations are indexed mixed-radix over the sorted parents, first parent fastest.
    """

    dag: Dag
    cardinalities: tuple[int, ...]
    cpts: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, t in enumerate(self.cpts):
            q = math.prod(self.cardinalities[p] for p in sorted(self.dag.parents[i]))
            if t.shape != (q, self.cardinalities[i]):
                raise ValueError(f"CPT of {self.dag.names[i]} has shape {t.shape}, expected {(q, self.cardinalities[i])}")
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise ValueError(f"CPT rows of {self.dag.names[i]} do not sum to 1")

    @property
    def names(self):
        return self.dag.names

    def joint(self) -> np.ndarray:
        """Full joint table indexed by (V1, ..., Vn); only sensible for tiny networks."""
        shape = tuple(self.cardinalities)
        P = np.ones(shape)
        grids = np.indices(shape)
        for i, t in enumerate(self.cpts):
            cfg = np.zeros(shape, dtype=np.int64)
            q = 1
            for p in sorted(self.dag.parents[i]):
                cfg += grids[p] * q
                q *= self.cardinalities[p]
            P = P * t[cfg, grids[i]]
        return P

    def to_text(self) -> str:
        out = ["[meta]"]
        out += [f"{k} = {json.dumps(v)}" for k, v in sorted(self.meta.items())]
        out.append("[nodes]")
        out += [f"{nm} = {r}" for nm, r in zip(self.names, self.cardinalities)]
        out.append("[edges]")
        out += [f"{self.names[a]} -> {self.names[b]}" for a, b in self.dag.edges]
        for i, t in enumerate(self.cpts):
            out.append(f"[cpt {self.names[i]}]")
            out.append("parents = " + ", ".join(self.names[p] for p in sorted(self.dag.parents[i])))
            out += [" ".join(repr(float(x)) for x in row) for row in t]
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GroundTruth":
        section, meta, nodes, edges, cpts = None, {}, [], [], {}
        cur = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("["):
                section = line[1:-1].strip()
                if section.startswith("cpt "):
                    cur = section[4:].strip()
                    cpts[cur] = {"parents": [], "rows": []}
                    section = "cpt"
                continue
            if section == "meta":
                k, v = (s.strip() for s in line.split("=", 1))
                meta[k] = json.loads(v)
            elif section == "nodes":
                k, v = (s.strip() for s in line.split("=", 1))
                nodes.append((k, int(v)))
            elif section == "edges":
                a, b = (s.strip() for s in line.split("->", 1))
                edges.append((a, b))
            elif section == "cpt":
                if line.startswith("parents"):
                    rhs = line.split("=", 1)[1]
                    cpts[cur]["parents"] = [p.strip() for p in rhs.split(",") if p.strip()]
                else:
                    cpts[cur]["rows"].append([float(x) for x in line.split()])
            else:
                raise ValueError(f"unexpected line outside a section: {raw!r}")
        names = [n for n, _ in nodes]
        dag = Dag.from_edges(names, edges)
        tables = []
        for i, nm in enumerate(names):
            spec = cpts[nm]
            if sorted(names.index(p) for p in spec["parents"]) != sorted(dag.parents[i]):
                raise ValueError(f"CPT parents of {nm} disagree with the edge list")
            tables.append(np.array(spec["rows"], dtype=float).reshape(-1, nodes[i][1]))
        return cls(dag, tuple(r for _, r in nodes), tables, meta)


def random_cardinalities(n: int, seed: int = 0, low: int = 2, high: int = 6) -> tuple[int, ...]:
    return tuple(int(x) for x in _rng(seed, 1).integers(low, high + 1, size=n))


def random_cpts(g: Dag, cardinalities: Sequence[int] | None = None, seed: int = 0, alpha: float = 1.0) -> GroundTruth:
    """Every CPT row drawn independently from a symmetric Dirichlet (uniform on the simplex by default)."""
    if cardinalities is None:
        cardinalities = random_cardinalities(g.n, seed)
    cardinalities = tuple(int(r) for r in cardinalities)
    rng = _rng(seed, 2)
    cpts = []
    for i in range(g.n):
        q = math.prod(cardinalities[p] for p in sorted(g.parents[i]))
        cpts.append(rng.dirichlet(np.full(cardinalities[i], alpha), size=q))
    return GroundTruth(g, cardinalities, cpts, {"seed": int(seed), "dirichlet_alpha": alpha})


def random_network(n: int, density="sparse", seed: int = 0, card_range=(2, 6)) -> GroundTruth:
    g = random_dag(n, density, seed)
    gt = random_cpts(g, random_cardinalities(n, seed, *card_range), seed)
    gt.meta.update({"n": n, "density": Density(density).value, "card_range": list(card_range)})
    return gt


def forward_sample(gt: GroundTruth, n_rows: int, seed: int = 0) -> CategoricalDataset:
    rng = _rng(seed, 3)
    g = gt.dag
    cells = np.zeros((n_rows, g.n), dtype=np.int64)
    u = rng.random((n_rows, g.n))
    for i in topological_order(g.parents):
        cfg = np.zeros(n_rows, dtype=np.int64)
        q = 1
        for p in sorted(g.parents[i]):
            cfg += cells[:, p] * q
            q *= gt.cardinalities[p]
        cum = np.cumsum(gt.cpts[i], axis=1)[cfg]
        cells[:, i] = np.minimum((u[:, [i]] >= cum).sum(axis=1), gt.cardinalities[i] - 1)
    metas = [VariableMeta(nm, r, tuple(str(k) for k in range(r))) for nm, r in zip(g.names, gt.cardinalities)]
    return CategoricalDataset(metas, cells)


# ---------------------------------------------------------------- missingness injection


class Mechanism(str, enum.Enum):
    MCAR = "mcar"
    MAR = "mar"
    MNAR = "mnar"


@dataclass
class MissingnessSpec:
    """Resolved recipe for removing cells.

    MCAR uses ``probabilities[v] = p``.  MAR/MNAR use ``probabilities[v] = (p_high, p_low)``:
    a cell of ``v`` is removed w.p. ``p_high`` when its indicator parent sits at
    ``trigger_states[v]`` and w.p. ``p_low`` otherwise.
    """

    mechanism: Mechanism
    partially_observed: tuple[int, ...]
    indicator_parents: dict[int, int] = field(default_factory=dict)
    probabilities: dict[int, object] = field(default_factory=dict)
    trigger_states: dict[int, int] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        self.mechanism = Mechanism(self.mechanism)

    def validate(self, n_vars: int):
        known = range(n_vars)
        for v in (*self.partially_observed, *self.indicator_parents, *self.indicator_parents.values()):
            if v not in known:
                raise ValueError(f"spec references unknown variable index {v}")
        for v, p in self.indicator_parents.items():
            if v == p:
                raise ValueError("a variable cannot drive its own missingness")
            if self.mechanism is Mechanism.MAR and p in self.partially_observed:
                raise ValueError("MAR indicator parents must be fully observed")
        if self.mechanism is not Mechanism.MCAR:
            missing = set(self.partially_observed) - set(self.indicator_parents)
            if missing:
                raise ValueError(f"no indicator parent given for {sorted(missing)}")

    def to_json(self, names: Sequence[str]) -> str:
        nm = lambda i: names[i]
        doc = {
            "mechanism": self.mechanism.value,
            "seed": self.seed,
            "partially_observed": [nm(v) for v in self.partially_observed],
            "indicator_parents": {nm(v): nm(p) for v, p in self.indicator_parents.items()},
            "probabilities": {nm(v): p for v, p in self.probabilities.items()},
            "trigger_states": {nm(v): s for v, s in self.trigger_states.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, names: Sequence[str]) -> "MissingnessSpec":
        doc = json.loads(text)
        ix = {n: i for i, n in enumerate(names)}
        probs = {ix[k]: (tuple(v) if isinstance(v, list) else v) for k, v in doc["probabilities"].items()}
        return cls(
            Mechanism(doc["mechanism"]),
            tuple(ix[v] for v in doc["partially_observed"]),
            {ix[k]: ix[v] for k, v in doc["indicator_parents"].items()},
            probs,
            {ix[k]: int(v) for k, v in doc.get("trigger_states", {}).items()},
            doc.get("seed"),
        )

    def true_model(self, n_vars: int, names=()):
        """The m-graph's indicator parents as a :class:`MissingnessModel`."""
        from .missingness import MissingnessModel

        return MissingnessModel(
            {v: frozenset({self.indicator_parents[v]}) if v in self.indicator_parents else frozenset()
             for v in self.partially_observed},
            tuple(names),
        )


def most_frequent_state(col: np.ndarray, r: int) -> int:
    """Mode of the observed cells, ties to the lower state index."""
    counts = np.bincount(col[col != MISSING], minlength=r)
    return int(np.argmax(counts))


def make_missingness_spec(
    d: CategoricalDataset,
    mechanism: Mechanism | str,
    seed: int = 0,
    fraction: float = 0.5,
    p_range: tuple[float, float] = (0.1, 0.6),
    p_high: float = 0.6,
    p_low: float = 0.1,
) -> MissingnessSpec:
    """Pick partially observed variables (rounded down) and, for MAR/MNAR, their indicator parents.

    For MNAR the larger half (rounded up) gets a fully observed parent, the rest
    another partially observed variable.
    """
    mechanism = Mechanism(mechanism)
    rng = _rng(seed, 4)
    n = d.n_vars
    k = int(math.floor(n * fraction))
    if k < 1:
        raise ValueError("too few variables to select any as partially observed")
    selected = tuple(sorted(int(v) for v in rng.choice(n, size=k, replace=False)))
    observed = [v for v in range(n) if v not in selected]
    spec = MissingnessSpec(mechanism, selected, seed=seed)
    if mechanism is Mechanism.MCAR:
        spec.probabilities = {v: float(rng.uniform(*p_range)) for v in selected}
        return spec
    if not observed:
        raise ValueError(f"{mechanism.value} needs at least one fully observed variable as indicator parent")
    order = list(rng.permutation(selected))
    if mechanism is Mechanism.MAR:
        to_observed, to_partial = order, []
    else:
        m = math.ceil(k / 2)
        to_observed, to_partial = order[:m], order[m:]
    for v in to_observed:
        spec.indicator_parents[int(v)] = int(rng.choice(observed))
    for v in to_partial:
        others = [u for u in selected if u != v]
        spec.indicator_parents[int(v)] = int(rng.choice(others))
    for v, p in spec.indicator_parents.items():
        spec.probabilities[v] = (p_high, p_low)
        spec.trigger_states[v] = most_frequent_state(d.cells[:, p], int(d.cardinalities[p]))
    return spec


def inject_missing(d: CategoricalDataset, spec: MissingnessSpec, seed: int = 0) -> CategoricalDataset:
    """Replace cells by MISSING according to ``spec``; indicator decisions read the uncorrupted parent values."""
    spec.validate(d.n_vars)
    src = d.cells
    cells = np.array(src, copy=True)
    for v in spec.partially_observed:
        u = _rng(seed, 5, v).random(d.n_rows)
        if spec.mechanism is Mechanism.MCAR:
            p = np.full(d.n_rows, float(spec.probabilities[v]))
        else:
            par = spec.indicator_parents[v]
            if (src[:, par] == MISSING).any():
                raise ValueError(f"indicator parent {d.names[par]} has missing values in the input")
            hi, lo = spec.probabilities.get(v, (0.6, 0.1))
            trig = spec.trigger_states.get(v)
            if trig is None:
                trig = most_frequent_state(src[:, par], int(d.cardinalities[par]))
            p = np.where(src[:, par] == trig, hi, lo)
        cells[u < p, v] = MISSING
    return d.with_cells(cells)


# ---------------------------------------------------------------- three-variable m-graph systems


CHAIN3_CPTS = (
    np.array([[0.65, 0.35]]),
    np.array([[0.8, 0.2], [0.25, 0.75]]),
    np.array([[0.7, 0.3], [0.15, 0.85]]),
)


def chain3_system(mechanism: Mechanism | str, p_high: float = 0.6, p_low: float = 0.1):
    """The V1 -> V2 -> V3 chain with binary variables and a known missingness mechanism.

    MCAR: V2 missing w.p. 0.3.  MAR: V1 drives R2.  MNAR: V1 drives R2 and V2 drives R1.
    Trigger states are state 0, the most probable state of V1 and V2 under these CPTs.
    """
    mechanism = Mechanism(mechanism)
    g = Dag.from_edges(3, [(0, 1), (1, 2)])
    gt = GroundTruth(g, (2, 2, 2), [t.copy() for t in CHAIN3_CPTS], {"system": f"chain3-{mechanism.value}"})
    if mechanism is Mechanism.MCAR:
        spec = MissingnessSpec(mechanism, (1,), probabilities={1: 0.3})
    elif mechanism is Mechanism.MAR:
        spec = MissingnessSpec(mechanism, (1,), {1: 0}, {1: (p_high, p_low)}, {1: 0})
    else:
        spec = MissingnessSpec(mechanism, (0, 1), {1: 0, 0: 1}, {1: (p_high, p_low), 0: (p_high, p_low)}, {1: 0, 0: 0})
    return gt, spec
