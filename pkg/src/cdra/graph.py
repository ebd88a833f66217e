"""Directed acyclic graphs over named factors.

Immutable DAG values with the graph surgery needed for causal audits:
d-separation, mutilation (edge removal for do-interventions), random
generation, and controlled edge perturbation.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CycleDetected,
    DanglingEdge,
    DuplicateNode,
    NoEdgesToRemove,
    UnknownNode,
)

Edge = tuple[str, str]


@dataclass(frozen=True)
class CausalDag:
    """A DAG over named factor nodes, with an optional designated metric sink.

    Node order is meaningful: it fixes tie-breaking in topological sorts and
    the canonical serialized form.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    sink: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((str(u), str(v)) for u, v in self.edges))
        validate(self)

    # -- basic queries -------------------------------------------------

    def has_node(self, v: str) -> bool:
        return v in self.nodes

    def parents(self, v: str) -> tuple[str, ...]:
        self._check(v)
        return tuple(u for u, w in self.edges if w == v)

    def children(self, v: str) -> tuple[str, ...]:
        self._check(v)
        return tuple(w for u, w in self.edges if u == v)

    def factor_nodes(self) -> tuple[str, ...]:
        """All nodes except the sink."""
        return tuple(n for n in self.nodes if n != self.sink)

    def _check(self, *vs):
        for v in vs:
            if v not in self.nodes:
                raise UnknownNode(v)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": sorted([list(e) for e in self.edges]),
            "sink": self.sink,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CausalDag":
        return cls(
            nodes=tuple(d["nodes"]),
            edges=tuple((u, v) for u, v in d.get("edges", [])),
            sink=d.get("sink"),
        )


@dataclass(frozen=True)
class DagPerturbation:
    """Edges to add to / remove from a base DAG."""

    added: tuple[Edge, ...] = ()
    removed: tuple[Edge, ...] = ()

    def __post_init__(self):
        if set(self.added) & set(self.removed):
            raise ValueError("added and removed edge sets overlap")


def validate(dag: CausalDag) -> None:
    """Check all CausalDag invariants; raise on the first violation."""
    seen = set()
    for n in dag.nodes:
        if not n:
            raise DuplicateNode("empty node name")
        if n in seen:
            raise DuplicateNode(n)
        seen.add(n)
    edge_set = set()
    for u, v in dag.edges:
        if u not in seen or v not in seen:
            raise DanglingEdge(f"({u}, {v})")
        if u == v:
            raise CycleDetected([u, u])
        if (u, v) in edge_set:
            raise DuplicateNode(f"duplicate edge ({u}, {v})")
        edge_set.add((u, v))
    if dag.sink is not None and dag.sink not in seen:
        raise DanglingEdge(f"sink {dag.sink}")
    _kahn_order(dag)  # raises CycleDetected if cyclic


def _kahn_order(dag: CausalDag) -> list[str]:
    index = {n: i for i, n in enumerate(dag.nodes)}
    indeg = {n: 0 for n in dag.nodes}
    children: dict[str, list[str]] = {n: [] for n in dag.nodes}
    for u, v in dag.edges:
        indeg[v] += 1
        children[u].append(v)
    for n in children:
        children[n].sort(key=index.__getitem__)
    queue = deque(n for n in dag.nodes if indeg[n] == 0)
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for w in children[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if len(order) < len(dag.nodes):
        raise CycleDetected(_find_cycle(dag, {n for n in dag.nodes if n not in order}))
    return order


def _find_cycle(dag: CausalDag, contenders: set[str]) -> list[str]:
    # Walk parent pointers inside the cyclic remainder until a node repeats.
    parents = {n: [u for u, v in dag.edges if v == n and u in contenders] for n in contenders}
    node = next(iter(contenders))
    path = [node]
    seen = {node}
    while True:
        node = parents[node][0]
        if node in seen:
            cycle = path[path.index(node):] + [node]
            return cycle[::-1]
        path.append(node)
        seen.add(node)


def topological_order(dag: CausalDag) -> list[str]:
    """Kahn's algorithm with FIFO tie-breaking by node insertion order."""
    return _kahn_order(dag)


def _would_cycle(edges: set[Edge], u: str, v: str) -> bool:
    """True if adding u->v creates a directed cycle (i.e. v reaches u)."""
    stack = [v]
    seen = set()
    while stack:
        node = stack.pop()
        if node == u:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(w for p, w in edges if p == node)
    return False


def descendants(dag: CausalDag, v: str) -> set[str]:
    """All nodes reachable from v by directed paths (excluding v itself)."""
    dag._check(v)
    children: dict[str, list[str]] = {n: [] for n in dag.nodes}
    for u, w in dag.edges:
        children[u].append(w)
    out: set[str] = set()
    stack = list(children[v])
    while stack:
        node = stack.pop()
        if node in out:
            continue
        out.add(node)
        stack.extend(children[node])
    return out


def ancestors(dag: CausalDag, vs: set[str]) -> set[str]:
    """All nodes with a directed path into vs, including vs themselves."""
    parents: dict[str, list[str]] = {n: [] for n in dag.nodes}
    for u, w in dag.edges:
        parents[w].append(u)
    out = set()
    stack = list(vs)
    while stack:
        node = stack.pop()
        if node in out:
            continue
        out.add(node)
        stack.extend(parents[node])
    return out


def d_separated(dag: CausalDag, a: set[str], b: set[str], z: set[str]) -> bool:
    """True iff every path between a and b is blocked given z.

    Reachability ("Bayes ball") formulation: track traversal direction and
    open colliders only when the collider has a descendant in z.
    """
    a, b, z = set(a), set(b), set(z)
    dag._check(*(a | b | z))
    if a & b or a & z or b & z:
        raise ValueError("a, b, z must be pairwise disjoint")

    an_z = ancestors(dag, z) if z else set()
    parents: dict[str, list[str]] = {n: [] for n in dag.nodes}
    children: dict[str, list[str]] = {n: [] for n in dag.nodes}
    for u, w in dag.edges:
        parents[w].append(u)
        children[u].append(w)

    # States are (node, direction): "up" = arrived from a child (against the
    # arrow), "down" = arrived from a parent (along the arrow).
    visited = set()
    frontier = [(n, "up") for n in a]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in b:
            return False
        if direction == "up":
            if node not in z:
                frontier.extend((p, "up") for p in parents[node])
                frontier.extend((c, "down") for c in children[node])
        else:  # arrived along an edge into node
            if node not in z:
                frontier.extend((c, "down") for c in children[node])
            if node in an_z:
                # collider (or z-member) with descendant in z: path may reopen upward
                frontier.extend((p, "up") for p in parents[node])
    return True


def mutilate(dag: CausalDag, v: str) -> CausalDag:
    """Delete every edge into v; the graph surgery behind do(v = ...)."""
    dag._check(v)
    return CausalDag(
        nodes=dag.nodes,
        edges=tuple(e for e in dag.edges if e[1] != v),
        sink=dag.sink,
    )


def remove_outgoing(dag: CausalDag, vs: set[str]) -> CausalDag:
    """Delete every edge out of any node in vs (backdoor-path graph)."""
    dag._check(*vs)
    return CausalDag(
        nodes=dag.nodes,
        edges=tuple(e for e in dag.edges if e[0] not in vs),
        sink=dag.sink,
    )


def random_dag(n: int, p_edge: float, rng: np.random.Generator) -> CausalDag:
    """Erdos-Renyi style DAG: each candidate pair gets an edge with p_edge.

    Orientation comes from a sampled node permutation (edges always point
    from lower to higher rank), so the result is acyclic by construction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("p_edge must be in [0, 1]")
    names = tuple(f"V{i}" for i in range(n))
    perm = rng.permutation(n)
    rank = {names[int(perm[i])]: i for i in range(n)}
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                u, v = names[i], names[j]
                if rank[u] > rank[v]:
                    u, v = v, u
                edges.append((u, v))
    return CausalDag(nodes=names, edges=tuple(edges))


def perturb(dag: CausalDag, n_errors: int, mode: str, rng: np.random.Generator) -> DagPerturbation:
    """Sample a random edge perturbation of the given mode.

    remove: up to n_errors distinct existing edges, uniformly.
    add: uniform non-edge pairs, rejecting cycle-creating candidates; may
    return fewer than requested when no candidate remains.
    """
    if n_errors < 1:
        raise ValueError("n_errors must be >= 1")
    if mode == "remove":
        if not dag.edges:
            raise NoEdgesToRemove("graph has no edges")
        k = min(n_errors, len(dag.edges))
        idx = rng.choice(len(dag.edges), size=k, replace=False)
        return DagPerturbation(removed=tuple(dag.edges[int(i)] for i in sorted(idx)))
    if mode == "add":
        existing = set(dag.edges)
        candidates = [
            (u, v)
            for u in dag.nodes
            for v in dag.nodes
            if u != v and (u, v) not in existing
        ]
        rng.shuffle(candidates)
        added: list[Edge] = []
        working = set(existing)
        for u, v in candidates:
            if len(added) == n_errors:
                break
            if (v, u) in working or _would_cycle(working, u, v):
                continue
            working.add((u, v))
            added.append((u, v))
        return DagPerturbation(added=tuple(added))
    raise ValueError(f"unknown perturbation mode: {mode}")


def apply_perturbation(dag: CausalDag, pert: DagPerturbation) -> CausalDag:
    removed = set(pert.removed)
    edges = tuple(e for e in dag.edges if e not in removed) + tuple(pert.added)
    return CausalDag(nodes=dag.nodes, edges=edges, sink=dag.sink)
