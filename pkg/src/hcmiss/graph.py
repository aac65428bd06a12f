"""DAGs, CPDAGs and the edge operations hill climbing moves along."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence


class GraphError(ValueError):
    pass


class CycleIntroduced(GraphError):
    pass


class NotApplicable(GraphError):
    pass


class OpKind(enum.IntEnum):
    ADD = 0
    DELETE = 1
    REVERSE = 2


@dataclass(frozen=True)
class EdgeOp:
    kind: OpKind
    src: int
    dst: int

    def __post_init__(self):
        if self.src == self.dst:
            raise GraphError("edge operation endpoints must differ")

    def describe(self, names: Sequence[str] | None = None) -> str:
        a = names[self.src] if names else str(self.src)
        b = names[self.dst] if names else str(self.dst)
        return f"{self.kind.name.lower()} {a}->{b}"


GraphKey = bytes


@dataclass(frozen=True)
class Dag:
    """Labeled DAG stored as one frozen parent set per node."""

    names: tuple[str, ...]
    parents: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.names) != len(self.parents):
            raise GraphError("one parent set per node required")
        for i, pa in enumerate(self.parents):
            if i in pa:
                raise GraphError(f"self-loop on {self.names[i]}")
            if any(not 0 <= p < len(self.names) for p in pa):
                raise GraphError("parent index out of range")
        if topological_order(self.parents) is None:
            raise CycleIntroduced("graph contains a directed cycle")

    @classmethod
    def empty(cls, names: Sequence[str] | int) -> "Dag":
        if isinstance(names, int):
            names = [f"V{i + 1}" for i in range(names)]
        return cls(tuple(names), tuple(frozenset() for _ in names))

    @classmethod
    def from_edges(cls, names: Sequence[str] | int, edges: Iterable[tuple]) -> "Dag":
        """Edges may be given as index pairs or name pairs."""
        if isinstance(names, int):
            names = [f"V{i + 1}" for i in range(names)]
        names = tuple(names)
        pos = {nm: i for i, nm in enumerate(names)}
        pa = [set() for _ in names]
        for a, b in edges:
            a = pos[a] if isinstance(a, str) else a
            b = pos[b] if isinstance(b, str) else b
            pa[b].add(a)
        return cls(names, tuple(frozenset(p) for p in pa))

    @property
    def n(self) -> int:
        return len(self.names)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((p, i) for i, pa in enumerate(self.parents) for p in pa))

    @cached_property
    def children(self) -> tuple[frozenset[int], ...]:
        ch = [set() for _ in self.names]
        for a, b in self.edges:
            ch[a].add(b)
        return tuple(frozenset(c) for c in ch)

    def has_edge(self, a: int, b: int) -> bool:
        return a in self.parents[b]

    def adjacent(self, a: int, b: int) -> bool:
        return a in self.parents[b] or b in self.parents[a]

    @cached_property
    def key(self) -> GraphKey:
        return graph_key(self)

    @cached_property
    def descendants(self) -> tuple[frozenset[int], ...]:
        """Nodes reachable from each node by a non-empty directed path."""
        order = topological_order(self.parents)
        desc: list[set[int]] = [set() for _ in self.names]
        for v in reversed(order):
            for c in self.children[v]:
                desc[v].add(c)
                desc[v] |= desc[c]
        return tuple(frozenset(s) for s in desc)

    def __str__(self):
        return to_edge_list(self)


def topological_order(parents: Sequence[Iterable[int]]) -> list[int] | None:
    """Kahn's algorithm with smallest-index-first; None when there is a cycle."""
    import heapq

    n = len(parents)
    indeg = [len(p) for p in parents]
    children = [[] for _ in range(n)]
    for i, pa in enumerate(parents):
        for p in pa:
            children[p].append(i)
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        v = heapq.heappop(heap)
        out.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    return out if len(out) == n else None


def graph_key(g: Dag) -> GraphKey:
    parts = [",".join(map(str, sorted(pa))) for pa in g.parents]
    return (str(g.n) + "|" + ";".join(parts)).encode()


def _check_applicable(g: Dag, op: EdgeOp):
    if not (0 <= op.src < g.n and 0 <= op.dst < g.n):
        raise NotApplicable(f"{op}: endpoint out of range")
    present = g.has_edge(op.src, op.dst)
    if op.kind is OpKind.ADD:
        if present or g.has_edge(op.dst, op.src):
            raise NotApplicable(f"{op.describe(g.names)}: nodes already adjacent")
    elif not present:
        raise NotApplicable(f"{op.describe(g.names)}: edge absent")


def apply_op(g: Dag, op: EdgeOp) -> Dag:
    _check_applicable(g, op)
    pa = list(g.parents)
    x, y = op.src, op.dst
    if op.kind is OpKind.ADD:
        if x == y or x in g.descendants[y]:
            raise CycleIntroduced(f"{op.describe(g.names)} closes a cycle")
        pa[y] = pa[y] | {x}
    elif op.kind is OpKind.DELETE:
        pa[y] = pa[y] - {x}
    else:
        if _reversal_cycles(g, x, y):
            raise CycleIntroduced(f"{op.describe(g.names)} closes a cycle")
        pa[y] = pa[y] - {x}
        pa[x] = pa[x] | {y}
    return Dag(g.names, tuple(pa))


def _reversal_cycles(g: Dag, x: int, y: int) -> bool:
    # x->y reversed is cyclic iff y is reachable from x without the direct edge
    return any(c != y and y in g.descendants[c] for c in g.children[x])


def changed_nodes(g: Dag, op: EdgeOp) -> frozenset[int]:
    _check_applicable(g, op)
    if op.kind is OpKind.REVERSE:
        return frozenset((op.src, op.dst))
    return frozenset((op.dst,))


def new_parent_sets(g: Dag, op: EdgeOp) -> dict[int, frozenset[int]]:
    """Parent sets of the changed nodes after ``op`` (no acyclicity check)."""
    x, y = op.src, op.dst
    if op.kind is OpKind.ADD:
        return {y: g.parents[y] | {x}}
    if op.kind is OpKind.DELETE:
        return {y: g.parents[y] - {x}}
    return {x: g.parents[x] | {y}, y: g.parents[y] - {x}}


def enumerate_neighbors(g: Dag, max_indegree: int | None = None) -> Iterator[EdgeOp]:
    """All acyclic single-edge moves: adds, then deletes, then reverses, each in (src, dst) order."""
    n = g.n
    desc = g.descendants
    for x in range(n):
        for y in range(n):
            if x == y or g.adjacent(x, y) or x in desc[y]:
                continue
            if max_indegree is not None and len(g.parents[y]) >= max_indegree:
                continue
            yield EdgeOp(OpKind.ADD, x, y)
    edges = g.edges
    for x, y in edges:
        yield EdgeOp(OpKind.DELETE, x, y)
    for x, y in edges:
        if _reversal_cycles(g, x, y):
            continue
        if max_indegree is not None and len(g.parents[x]) >= max_indegree:
            continue
        yield EdgeOp(OpKind.REVERSE, x, y)


# ---------------------------------------------------------------- CPDAG


@dataclass(frozen=True)
class Cpdag:
    names: tuple[str, ...]
    directed: frozenset[tuple[int, int]]
    undirected: frozenset[frozenset[int]]

    def __post_init__(self):
        skel = [frozenset(e) for e in self.directed]
        if len(set(skel)) != len(skel):
            raise GraphError("duplicate adjacency among directed edges")
        if set(skel) & set(self.undirected):
            raise GraphError("an adjacency is both directed and undirected")
        if any(len(e) != 2 for e in self.undirected):
            raise GraphError("undirected edges need two distinct endpoints")

    @classmethod
    def from_edges(cls, names, directed=(), undirected=()):
        names = tuple(names)
        pos = {nm: i for i, nm in enumerate(names)}
        f = lambda a: pos[a] if isinstance(a, str) else a
        return cls(
            names,
            frozenset((f(a), f(b)) for a, b in directed),
            frozenset(frozenset((f(a), f(b))) for a, b in undirected),
        )

    @property
    def n_edges(self) -> int:
        return len(self.directed) + len(self.undirected)

    def edge_marks(self) -> dict[frozenset[int], tuple[int, int] | None]:
        """Adjacency -> orientation (``None`` for undirected)."""
        out: dict[frozenset[int], tuple[int, int] | None] = {frozenset(e): e for e in self.directed}
        out.update({e: None for e in self.undirected})
        return out

    def __str__(self):
        lines = [f"{self.names[a]} -> {self.names[b]}" for a, b in sorted(self.directed)]
        lines += [f"{self.names[a]} -- {self.names[b]}" for a, b in sorted(tuple(sorted(e)) for e in self.undirected)]
        return "\n".join(lines)


def v_structures(g: Dag) -> frozenset[tuple[int, int, int]]:
    """Colliders (a, c, b) with a < b, a->c<-b and a, b non-adjacent."""
    out = set()
    for c, pa in enumerate(g.parents):
        ps = sorted(pa)
        for i, a in enumerate(ps):
            for b in ps[i + 1 :]:
                if not g.adjacent(a, b):
                    out.add((a, c, b))
    return frozenset(out)


def dag_to_cpdag(g: Dag) -> Cpdag:
    """Equivalence-class representative of ``g``.

    Edges in v-structures stay directed; the remaining edges are oriented only when
    leaving them undirected would allow a new v-structure or a directed cycle
    (Meek's rules 1-3), iterated until nothing changes.
    """
    directed: set[tuple[int, int]] = set()
    for a, c, b in v_structures(g):
        directed.add((a, c))
        directed.add((b, c))
    undirected = {frozenset(e) for e in g.edges} - {frozenset(e) for e in directed}

    def is_dir(a, b):
        return (a, b) in directed

    def adj(a, b):
        return g.adjacent(a, b)

    changed = True
    while changed:
        changed = False
        for e in sorted(undirected, key=sorted):
            a, b = sorted(e)
            for x, y in ((a, b), (b, a)):
                # orientation must agree with g; the rules only ever fire in that direction
                if not g.has_edge(x, y):
                    continue
                forced = False
                # R1: z->x, x-y, z not adjacent to y
                if any(is_dir(z, x) and not adj(z, y) for z in range(g.n) if z not in (x, y)):
                    forced = True
                # R2: x->z->y with x-y
                elif any(is_dir(x, z) and is_dir(z, y) for z in range(g.n) if z not in (x, y)):
                    forced = True
                else:
                    # R3: x-z1->y, x-z2->y, z1 and z2 non-adjacent
                    zs = [
                        z for z in range(g.n)
                        if z not in (x, y) and frozenset((x, z)) in undirected and is_dir(z, y)
                    ]
                    forced = any(not adj(z1, z2) for i, z1 in enumerate(zs) for z2 in zs[i + 1 :])
                if forced:
                    undirected.discard(e)
                    directed.add((x, y))
                    changed = True
                    break
    return Cpdag(g.names, frozenset(directed), frozenset(undirected))


# ---------------------------------------------------------------- text formats


def to_edge_list(g: Dag) -> str:
    lines = [f"{g.names[a]} -> {g.names[b]}" for a, b in g.edges]
    touched = {v for e in g.edges for v in e}
    lines += [g.names[i] for i in range(g.n) if i not in touched]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, names: Sequence[str] | None = None) -> Dag:
    """Inverse of :func:`to_edge_list`; node order is first appearance unless ``names`` is given."""
    order: list[str] = list(names) if names else []
    seen = set(order)
    edges = []

    def note(nm):
        if nm not in seen:
            if names:
                raise GraphError(f"unknown node {nm!r}")
            seen.add(nm)
            order.append(nm)

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            a, b = (s.strip() for s in line.split("->", 1))
            if not a or not b:
                raise GraphError(f"malformed edge line {raw!r}")
            note(a)
            note(b)
            edges.append((a, b))
        else:
            note(line)
    return Dag.from_edges(order, edges)


def to_dot(g: Dag | Cpdag) -> str:
    out = ["digraph G {"]
    for nm in g.names:
        out.append(f'  "{nm}";')
    if isinstance(g, Dag):
        out += [f'  "{g.names[a]}" -> "{g.names[b]}";' for a, b in g.edges]
    else:
        out += [f'  "{g.names[a]}" -> "{g.names[b]}";' for a, b in sorted(g.directed)]
        out += [
            f'  "{g.names[a]}" -> "{g.names[b]}" [dir=none];'
            for a, b in sorted(tuple(sorted(e)) for e in g.undirected)
        ]
    out.append("}")
    return "\n".join(out) + "\n"
