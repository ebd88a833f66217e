"""Identifiability checks and adjustment-set computation.

Backdoor adjustment sets back the ACE estimator; the frontdoor criterion is
checked (for diagnostics) but never estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from . import graph as g
from .errors import EnumerationBoundExceeded, UnknownNode


@dataclass(frozen=True)
class AdjustmentSet:
    target: str
    variables: frozenset
    method: str = "backdoor"   # or "frontdoor-check-only"
    minimal: bool = False

    def sorted_names(self) -> list[str]:
        return sorted(self.variables)


def is_valid_backdoor(dag: g.CausalDag, v: str, sink: str, w: set) -> bool:
    """Backdoor criterion: w holds no descendant of v and d-separates v from
    the sink once all edges out of v are removed."""
    w = set(w)
    dag._check(v, sink, *w)
    if v in w or sink in w:
        raise ValueError("w must exclude the target and the sink")
    if w & g.descendants(dag, v):
        return False
    backdoor_graph = g.remove_outgoing(dag, {v})
    return g.d_separated(backdoor_graph, {v}, {sink}, w)


def default_adjustment_set(dag: g.CausalDag, v: str, sink: str) -> AdjustmentSet:
    """Parents of the target, restricted to factor nodes.

    Always a valid backdoor set when every factor is observed: parents block
    all backdoor paths and none can descend from their child.
    """
    dag._check(v, sink)
    parents = frozenset(p for p in dag.parents(v) if p != sink)
    return AdjustmentSet(target=v, variables=parents, method="backdoor", minimal=False)


def minimal_adjustment_sets(dag: g.CausalDag, v: str, sink: str,
                            cap: int = 64) -> list[AdjustmentSet]:
    """All inclusion-minimal valid backdoor sets, up to cap.

    Subset enumeration over non-descendants ordered by size; bounded to
    graphs of at most 20 nodes.
    """
    dag._check(v, sink)
    if len(dag.nodes) > 20:
        raise EnumerationBoundExceeded(f"{len(dag.nodes)} nodes > 20")
    candidates = [n for n in dag.nodes
                  if n not in (v, sink) and n not in g.descendants(dag, v)]
    found: list[frozenset] = []
    out: list[AdjustmentSet] = []
    for size in range(len(candidates) + 1):
        for combo in combinations(candidates, size):
            w = frozenset(combo)
            if any(prev <= w for prev in found):
                continue
            if is_valid_backdoor(dag, v, sink, set(w)):
                found.append(w)
                out.append(AdjustmentSet(target=v, variables=w, minimal=True))
                if len(out) >= cap:
                    return out
    return out


def frontdoor_applicable(dag: g.CausalDag, v: str, sink: str) -> tuple[bool, frozenset]:
    """Search for a witness mediator set satisfying the frontdoor criterion.

    Returns (True, Z) for the first witness found (smallest first), else
    (False, empty set). Estimation via frontdoor is out of scope.
    """
    dag._check(v, sink)
    if sink not in g.descendants(dag, v):
        return False, frozenset()
    candidates = _directed_path_interior(dag, v, sink)
    for size in range(1, len(candidates) + 1):
        for combo in combinations(sorted(candidates), size):
            z = frozenset(combo)
            if _frontdoor_holds(dag, v, sink, z):
                return True, z
    return False, frozenset()


def _frontdoor_holds(dag: g.CausalDag, v: str, sink: str, z: frozenset) -> bool:
    # (i) z intercepts every directed path v -> sink
    if _has_directed_path_avoiding(dag, v, sink, z):
        return False
    # (ii) no unblocked backdoor path from v to z
    backdoor_v = g.remove_outgoing(dag, {v})
    if not g.d_separated(backdoor_v, {v}, set(z), set()):
        return False
    # (iii) every backdoor path from z to the sink is blocked by v
    backdoor_z = g.remove_outgoing(dag, set(z))
    return g.d_separated(backdoor_z, set(z), {sink}, {v})


def _has_directed_path_avoiding(dag: g.CausalDag, src: str, dst: str, blocked: frozenset) -> bool:
    stack = [src]
    seen = set()
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        if node in seen or (node in blocked and node != src):
            continue
        seen.add(node)
        stack.extend(dag.children(node))
    return False


def _directed_path_interior(dag: g.CausalDag, v: str, sink: str) -> set:
    """Nodes lying on some directed path from v to sink, endpoints excluded."""
    desc_v = g.descendants(dag, v)
    anc_sink = g.ancestors(dag, {sink})
    return (desc_v & anc_sink) - {v, sink}
