"""Mapping causal-model samples to renderer settings.

Continuous latent propagation along weighted edges, squashed through
(1 + tanh)/2 and pushed through a Beta inverse CDF, then mapped to
renderer units by directional (increasing / decreasing / centered)
setting rules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import graph as g
from .errors import MissingSpec, NominalMissing, ParseError

_CF_MAX_ITER = 300
_CF_EPS = 1e-15
_INV_TOL = 1e-12
_INV_MAX_ITER = 200


@dataclass(frozen=True)
class FactorSpec:
    name: str
    corruption_type: str                 # increasing | decreasing | centered
    minimum: float
    maximum: float
    a: float
    b: float
    sigma: float = 0.1
    nominal: float | None = None
    squash: str = "tanh-unit"

    def __post_init__(self):
        if self.corruption_type not in ("increasing", "decreasing", "centered"):
            raise ParseError(f"unknown corruption type {self.corruption_type!r}")
        if not self.minimum < self.maximum:
            raise ParseError(f"{self.name}: min must be < max")
        if self.a <= 0 or self.b <= 0:
            raise ParseError(f"{self.name}: Beta shapes must be positive")
        if self.sigma < 0:
            raise ParseError(f"{self.name}: sigma must be >= 0")
        if self.corruption_type == "centered":
            if self.nominal is None:
                raise NominalMissing(self.name)
            if not self.minimum <= self.nominal <= self.maximum:
                raise ParseError(f"{self.name}: nominal outside [min, max]")


@dataclass(frozen=True)
class WeightedEdge:
    parent: str
    child: str
    weight: float

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise ParseError(f"non-finite weight on ({self.parent}, {self.child})")


# ---------------------------------------------------------------------
# Regularized incomplete Beta and its inverse

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete Beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_EPS:
        d = _CF_EPS
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_EPS:
            d = _CF_EPS
        c = 1.0 + aa / c
        if abs(c) < _CF_EPS:
            c = _CF_EPS
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_EPS:
            d = _CF_EPS
        c = 1.0 + aa / c
        if abs(c) < _CF_EPS:
            c = _CF_EPS
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return h


def beta_cdf(a: float, b: float, x: float) -> float:
    """Regularized incomplete Beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    # symmetry switch keeps the continued fraction well away from its poles
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def beta_inverse_cdf(a: float, b: float, q: float) -> float:
    """x in [0, 1] with I_x(a, b) = q, by bracketed bisection.

    Endpoints map exactly; the bracket halves to below machine spacing,
    which is far inside the 1e-10 round-trip tolerance.
    """
    if a <= 0 or b <= 0:
        raise ValueError("Beta shapes must be positive")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = a / (a + b)  # start at the mean
    for _ in range(_INV_MAX_ITER):
        f = beta_cdf(a, b, x) - q
        if abs(f) < _INV_TOL:
            break
        if f > 0.0:
            hi = x
        else:
            lo = x
        x = 0.5 * (lo + hi)
    return x


# ---------------------------------------------------------------------
# Latent propagation and setting maps

def _squash(name: str, z: float) -> float:
    if name == "tanh-unit":
        return 0.5 * (1.0 + math.tanh(z))
    raise ParseError(f"unknown squash function {name!r}")


def _edge_graph(specs: dict, edges: list[WeightedEdge]) -> g.CausalDag:
    for e in edges:
        if e.parent not in specs or e.child not in specs:
            raise MissingSpec(f"edge ({e.parent}, {e.child}) references unspecified factor")
    return g.CausalDag(nodes=tuple(specs), edges=tuple((e.parent, e.child) for e in edges))


def sample_normalized(specs: dict, edges: list[WeightedEdge],
                      rng: np.random.Generator) -> dict:
    """One draw of normalized factor values in [0, 1].

    Each factor's latent is the weighted sum of its parents' normalized
    values plus Gaussian exogenous noise, squashed to [0, 1] and passed
    through the factor's Beta inverse CDF.
    """
    dag = _edge_graph(specs, edges)
    weight = {(e.parent, e.child): e.weight for e in edges}
    values: dict = {}
    for v in g.topological_order(dag):
        spec = specs[v]
        z = sum(weight[(p, v)] * values[p] for p in dag.parents(v))
        if spec.sigma > 0:
            z += spec.sigma * rng.standard_normal()
        values[v] = beta_inverse_cdf(spec.a, spec.b, _squash(spec.squash, z))
    return values


def to_setting(spec: FactorSpec, v_a: float) -> tuple[float, float]:
    """Map a normalized value to (renderer setting, severity in [0, 1])."""
    if not 0.0 <= v_a <= 1.0:
        raise ValueError("normalized value must lie in [0, 1]")
    span = spec.maximum - spec.minimum
    if spec.corruption_type == "increasing":
        return spec.minimum + v_a * span, v_a
    if spec.corruption_type == "decreasing":
        return spec.minimum + (1.0 - v_a) * span, v_a
    if spec.nominal is None:
        raise NominalMissing(spec.name)
    setting = spec.minimum + v_a * span
    denom = max(abs(spec.minimum - spec.nominal), abs(spec.maximum - spec.nominal))
    severity = abs(setting - spec.nominal) / denom
    return setting, severity


@dataclass
class RenderPlan:
    records: list                       # per-sample dicts
    seed: int

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def emit_plan(specs: dict, edges: list[WeightedEdge], n: int, seed: int) -> RenderPlan:
    """Generate n per-factor setting records, deterministic given seed."""
    records = []
    for i in range(n):
        rng = np.random.default_rng([int(seed), i])
        values = sample_normalized(specs, edges, rng)
        settings, severities = {}, {}
        for name, v in values.items():
            s, sev = to_setting(specs[name], v)
            settings[name] = s
            severities[name] = sev
        records.append({"index": i, "settings": settings, "severities": severities})
    return RenderPlan(records=records, seed=int(seed))


# ---------------------------------------------------------------------
# Config I/O

def specs_from_dict(d: dict) -> tuple[dict, list[WeightedEdge]]:
    """Parse {factors: [...], edges: [[parent, child, weight], ...]}."""
    specs = {}
    for f in d.get("factors", []):
        spec = FactorSpec(
            name=f["name"],
            corruption_type=f["type"],
            minimum=float(f["min"]),
            maximum=float(f["max"]),
            a=float(f["a"]),
            b=float(f["b"]),
            sigma=float(f.get("sigma", 0.1)),
            nominal=None if f.get("nominal") is None else float(f["nominal"]),
            squash=f.get("squash", "tanh-unit"),
        )
        specs[spec.name] = spec
    edges = [WeightedEdge(parent=u, child=v, weight=float(w))
             for u, v, w in d.get("edges", [])]
    _edge_graph(specs, edges)  # validates names and acyclicity
    return specs, edges


def default_render_config() -> dict:
    """The four-factor lighting/exposure/defocus/noise rendering setup."""
    return {
        "factors": [
            {"name": "L", "type": "centered", "min": 0.25, "max": 1.5,
             "nominal": 1.0, "a": 2, "b": 2, "sigma": 1.0},
            {"name": "E", "type": "centered", "min": -2.0, "max": 2.0,
             "nominal": 0.0, "a": 3, "b": 3, "sigma": 0.1},
            {"name": "D", "type": "decreasing", "min": 0.01, "max": 0.2,
             "a": 2, "b": 5, "sigma": 0.1},
            {"name": "N", "type": "decreasing", "min": 10.0, "max": 300.0,
             "a": 1, "b": 1, "sigma": 0.1},
        ],
        "edges": [
            ["L", "E", -0.223],
            ["L", "D", -0.800],
            ["E", "D", 0.800],
            ["E", "N", -0.322],
            ["D", "N", -0.909],
        ],
    }
