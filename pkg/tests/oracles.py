"""Independent brute-force oracles used only by tests.

These deliberately avoid the library's fast implementations: d-separation
by exhaustive path enumeration with the blocking rules applied per path,
and conditional/interventional expectations by direct enumeration.
"""

from itertools import product

import numpy as np

from cdra.graph import CausalDag, descendants


def all_undirected_paths(dag: CausalDag, a: str, b: str):
    """All simple paths between a and b ignoring edge direction, as lists of
    (node, ...) with the original edge orientations recorded."""
    adjacency = {}
    for u, v in dag.edges:
        adjacency.setdefault(u, []).append((v, "->"))
        adjacency.setdefault(v, []).append((u, "<-"))
    paths = []

    def walk(node, path, arrows):
        if node == b:
            paths.append((list(path), list(arrows)))
            return
        for nxt, arrow in adjacency.get(node, []):
            if nxt in path:
                continue
            path.append(nxt)
            arrows.append(arrow)
            walk(nxt, path, arrows)
            path.pop()
            arrows.pop()

    walk(a, [a], [])
    return paths


def path_blocked(dag: CausalDag, path, arrows, z: set) -> bool:
    """Standard per-path blocking: a non-collider in z blocks; a collider
    blocks unless it or one of its descendants is in z."""
    for i in range(1, len(path) - 1):
        into_prev = arrows[i - 1] == "->"   # edge points into path[i]
        into_next = arrows[i] == "<-"       # edge points into path[i]
        node = path[i]
        if into_prev and into_next:         # collider
            if node not in z and not (descendants(dag, node) & z):
                return True
        else:                               # chain or fork
            if node in z:
                return True
    return False


def d_separated_by_paths(dag: CausalDag, a: str, b: str, z: set) -> bool:
    for path, arrows in all_undirected_paths(dag, a, b):
        if not path_blocked(dag, path, arrows, z):
            return False
    return True


def enumerate_joint(gcm):
    """All factor assignments (as level-index rows) with their observational
    probabilities, by direct product over CPT lookups."""
    factors = gcm.factors
    grids = [range(len(gcm.domains[f])) for f in factors]
    col = {f: j for j, f in enumerate(factors)}
    states, probs = [], []
    for assignment in product(*grids):
        p = 1.0
        for v in factors:
            cpd = gcm.cpds[v]
            key = tuple(assignment[col[q]] for q in cpd.parents)
            p *= float(cpd.row(key)[assignment[col[v]]])
        states.append(assignment)
        probs.append(p)
    return np.array(states, dtype=np.int64), np.array(probs)


def brute_force_interventional_mean(gcm, v: str, value: int) -> float:
    """E[M | do(v=value)] by explicit per-state loop over the mutilated joint."""
    factors = gcm.factors
    col = {f: j for j, f in enumerate(factors)}
    vidx = gcm.domains[v].index(value)
    grids = [range(len(gcm.domains[f])) for f in factors]
    total = 0.0
    for assignment in product(*grids):
        if assignment[col[v]] != vidx:
            continue
        p = 1.0
        for u in factors:
            if u == v:
                continue
            cpd = gcm.cpds[u]
            key = tuple(assignment[col[q]] for q in cpd.parents)
            p *= float(cpd.row(key)[assignment[col[u]]])
        resp = gcm.response_rows(factors, np.array([assignment], dtype=np.int64))[0]
        total += p * float(resp)
    return total


def brute_force_conditional_mean(gcm, cond: dict) -> float:
    """E[M | cond] under the observational joint (enumerated)."""
    factors = gcm.factors
    col = {f: j for j, f in enumerate(factors)}
    states, probs = enumerate_joint(gcm)
    mask = np.ones(len(states), dtype=bool)
    for f, value in cond.items():
        mask &= states[:, col[f]] == gcm.domains[f].index(value)
    resp = gcm.response_rows(factors, states[mask])
    w = probs[mask]
    return float(np.sum(w * resp) / np.sum(w))
