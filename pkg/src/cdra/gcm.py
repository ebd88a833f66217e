"""Graphical causal models over discrete severity factors.

A Gcm couples a factor DAG with per-node conditional probability tables and
a metric-generating task response attached to the sink. Supports ancestral
(observational) sampling, mutilated (interventional) sampling, and exact
expectations by full enumeration on small state spaces.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import graph as g
from .errors import (
    EmptyData,
    InvalidGcm,
    LevelOutOfDomain,
    ParseError,
    SchemaMismatch,
    StateSpaceTooLarge,
    UnknownNode,
)

METRIC_NAME = "M"
ENUMERATION_CAP = 10**7
_SHARD_SIZE = 8192


@dataclass(frozen=True)
class SeverityDomain:
    levels: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))
        if not self.levels:
            raise InvalidGcm("empty severity domain")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidGcm("severity levels must be strictly increasing")

    def __len__(self):
        return len(self.levels)

    def index(self, level: int) -> int:
        try:
            return self.levels.index(int(level))
        except ValueError:
            raise LevelOutOfDomain(f"{level} not in {self.levels}") from None


@dataclass(frozen=True)
class Cpd:
    """Conditional distribution P(child | parents) as a dense table.

    Rows are indexed by the tuple of parent domain *indices* in parent order.
    """

    child: str
    parents: tuple[str, ...]
    table: dict  # parent-index tuple -> np.ndarray of probabilities

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        table = {tuple(k): np.asarray(v, dtype=float) for k, v in self.table.items()}
        for key, row in table.items():
            if len(key) != len(self.parents):
                raise InvalidGcm(f"{self.child}: key arity {len(key)} != {len(self.parents)} parents")
            if np.any(row < 0) or abs(row.sum() - 1.0) > 1e-12:
                raise InvalidGcm(f"{self.child}: CPT row {key} does not sum to 1")
        object.__setattr__(self, "table", table)

    def row(self, parent_idx: tuple[int, ...]) -> np.ndarray:
        return self.table[tuple(parent_idx)]


@dataclass(frozen=True)
class RetentionResponse:
    """Multiplicative success model: base * prod(retention) * prod(interactions).

    Retention vectors are indexed by domain position and must start at 1
    (level 0 leaves performance untouched). The evaluated probability is
    clamped to [0, 1].
    """

    base: float
    retention: dict  # factor -> tuple of per-level multipliers
    interactions: dict | None = None  # (f1, f2, idx1, idx2) -> multiplier

    kind = "retention"

    def __post_init__(self):
        object.__setattr__(
            self, "retention", {f: tuple(float(x) for x in v) for f, v in self.retention.items()}
        )
        for f, v in self.retention.items():
            if abs(v[0] - 1.0) > 1e-12:
                raise InvalidGcm(f"retention for {f} must be 1 at level index 0")
            if any(not (0.0 < x <= 1.0) for x in v):
                raise InvalidGcm(f"retention for {f} must lie in (0, 1]")

    def evaluate_rows(self, factor_names, level_idx: np.ndarray) -> np.ndarray:
        p = np.full(level_idx.shape[0], self.base, dtype=float)
        for j, f in enumerate(factor_names):
            if f in self.retention:
                p *= np.asarray(self.retention[f])[level_idx[:, j]]
        if self.interactions:
            col = {f: j for j, f in enumerate(factor_names)}
            for (f1, f2, i1, i2), mult in self.interactions.items():
                mask = (level_idx[:, col[f1]] == i1) & (level_idx[:, col[f2]] == i2)
                p[mask] *= mult
        return np.clip(p, 0.0, 1.0)

    def to_dict(self):
        d = {"kind": self.kind, "base": self.base,
             "retention": {f: list(v) for f, v in self.retention.items()}}
        if self.interactions:
            d["interactions"] = [[f1, f2, i1, i2, m]
                                 for (f1, f2, i1, i2), m in sorted(self.interactions.items())]
        return d


@dataclass(frozen=True)
class LinearResponse:
    """Additive success model: clamp(base + sum coeff * level_value)."""

    base: float
    coefficients: dict  # factor -> per-level-value coefficient

    kind = "linear"

    def evaluate_rows(self, factor_names, level_idx: np.ndarray, level_values=None) -> np.ndarray:
        # Linear responses act on level *values*; callers pass domains via Gcm.
        values = level_idx if level_values is None else level_values
        p = np.full(values.shape[0], self.base, dtype=float)
        for j, f in enumerate(factor_names):
            if f in self.coefficients:
                p += self.coefficients[f] * values[:, j]
        return np.clip(p, 0.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base, "coefficients": dict(self.coefficients)}


def response_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "retention":
        inter = None
        if d.get("interactions"):
            inter = {(f1, f2, int(i1), int(i2)): float(m) for f1, f2, i1, i2, m in d["interactions"]}
        return RetentionResponse(
            base=float(d["base"]),
            retention={f: tuple(v) for f, v in d["retention"].items()},
            interactions=inter,
        )
    if kind == "linear":
        return LinearResponse(base=float(d["base"]),
                              coefficients={f: float(c) for f, c in d["coefficients"].items()})
    raise ParseError(f"unknown response kind: {kind!r}")


@dataclass(frozen=True)
class Gcm:
    """Factor DAG + CPDs + task response on the metric sink."""

    dag: g.CausalDag                       # includes the sink node
    domains: dict                          # factor -> SeverityDomain
    cpds: dict                             # factor -> Cpd
    response: object                       # RetentionResponse | LinearResponse
    metric: str = "correctness"            # or "continuous"
    noise_sigma: float = 0.0               # metric noise for continuous metrics

    def __post_init__(self):
        if self.dag.sink is None:
            raise InvalidGcm("GCM DAG must designate a metric sink")
        factors = self.dag.factor_nodes()
        for v in factors:
            if v not in self.domains:
                raise InvalidGcm(f"missing domain for {v}")
            cpd = self.cpds.get(v)
            if cpd is None:
                raise InvalidGcm(f"missing CPD for {v}")
            pa = tuple(p for p in self.dag.parents(v) if p != self.dag.sink)
            if cpd.parents != pa:
                raise InvalidGcm(f"CPD parents {cpd.parents} != DAG parents {pa} for {v}")
            n_rows = 1
            for p in pa:
                n_rows *= len(self.domains[p])
            if len(cpd.table) != n_rows:
                raise InvalidGcm(f"CPD for {v} covers {len(cpd.table)} of {n_rows} parent combinations")
            for row in cpd.table.values():
                if len(row) != len(self.domains[v]):
                    raise InvalidGcm(f"CPD row length mismatch for {v}")
        if self.dag.sink in self.cpds:
            raise InvalidGcm("sink carries a response, not a CPD")

    @property
    def factors(self) -> tuple[str, ...]:
        return self.dag.factor_nodes()

    def factor_order(self) -> list[str]:
        return [v for v in g.topological_order(self.dag) if v != self.dag.sink]

    def n_states(self) -> int:
        n = 1
        for v in self.factors:
            n *= len(self.domains[v])
        return n

    def response_rows(self, factor_names, level_idx: np.ndarray) -> np.ndarray:
        if isinstance(self.response, LinearResponse):
            values = np.empty_like(level_idx, dtype=float)
            for j, f in enumerate(factor_names):
                values[:, j] = np.asarray(self.domains[f].levels, dtype=float)[level_idx[:, j]]
            return self.response.evaluate_rows(factor_names, level_idx, level_values=values)
        return self.response.evaluate_rows(factor_names, level_idx)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        cpds = {}
        for v, cpd in self.cpds.items():
            shape = [len(self.domains[p]) for p in cpd.parents]
            cpds[v] = {"parents": list(cpd.parents), "table": _nest(cpd.table, shape)}
        return {
            "dag": self.dag.to_dict(),
            "domains": {f: list(d.levels) for f, d in self.domains.items()},
            "cpds": cpds,
            "response": self.response.to_dict(),
            "metric": self.metric,
            "noise_sigma": self.noise_sigma,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Gcm":
        dag = g.CausalDag.from_dict(d["dag"])
        domains = {f: SeverityDomain(tuple(v)) for f, v in d["domains"].items()}
        cpds = {}
        for v, spec in d["cpds"].items():
            parents = tuple(spec["parents"])
            shape = [len(domains[p]) for p in parents]
            cpds[v] = Cpd(child=v, parents=parents, table=_unnest(spec["table"], shape))
        return cls(
            dag=dag,
            domains=domains,
            cpds=cpds,
            response=response_from_dict(d["response"]),
            metric=d.get("metric", "correctness"),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
        )


def _nest(table: dict, shape: list[int]):
    """Dense dict keyed by index tuples -> nested lists in parent order."""
    if not shape:
        return [float(x) for x in table[()]]
    def build(prefix, dims):
        if not dims:
            return [float(x) for x in table[tuple(prefix)]]
        return [build(prefix + [i], dims[1:]) for i in range(dims[0])]
    return build([], shape)


def _unnest(nested, shape: list[int]) -> dict:
    if not shape:
        return {(): list(nested)}
    out = {}
    def walk(prefix, sub, dims):
        if not dims:
            out[tuple(prefix)] = list(sub)
            return
        for i in range(dims[0]):
            walk(prefix + [i], sub[i], dims[1:])
    walk([], nested, shape)
    return out


# ---------------------------------------------------------------------
# Observation tables


@dataclass
class ObservationTable:
    """Rectangular table of factor levels plus one metric column."""

    factor_names: tuple[str, ...]
    levels: np.ndarray          # int array, shape (n, n_factors); raw level values
    metric: np.ndarray          # float array, shape (n,)
    metric_name: str = METRIC_NAME
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.factor_names = tuple(self.factor_names)
        self.levels = np.asarray(self.levels, dtype=np.int64).reshape(-1, len(self.factor_names))
        self.metric = np.asarray(self.metric, dtype=float).reshape(-1)
        if self.levels.shape[0] != self.metric.shape[0]:
            raise SchemaMismatch("factor rows and metric rows differ in length")
        if self.metric.size and not np.all(np.isfinite(self.metric)):
            raise SchemaMismatch("metric column contains non-finite values")

    def __len__(self):
        return self.levels.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name == self.metric_name:
            return self.metric
        try:
            j = self.factor_names.index(name)
        except ValueError:
            raise UnknownNode(name) from None
        return self.levels[:, j]

    def mean_metric(self) -> float:
        if len(self) == 0:
            raise EmptyData("no rows")
        return float(self.metric.mean())

    def take(self, idx: np.ndarray) -> "ObservationTable":
        return ObservationTable(self.factor_names, self.levels[idx], self.metric[idx],
                                self.metric_name, dict(self.meta))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(self.factor_names) + [self.metric_name])
        for row, m in zip(self.levels, self.metric):
            w.writerow([int(x) for x in row] + [repr(float(m))])

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue().encode("utf-8")


def ingest_metrics(path, domains: dict, metric_name: str = METRIC_NAME) -> ObservationTable:
    """Read and validate a factor/metric CSV.

    Rows with out-of-domain factor levels are dropped; the count lands in
    meta["rejected_rows"]. Factor columns are matched by name against the
    declared domains; extra columns are a schema error.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: empty file") from None
        if metric_name not in header:
            raise SchemaMismatch(f"missing metric column {metric_name!r}")
        factor_cols = [c for c in header if c != metric_name]
        missing = [c for c in domains if c not in factor_cols]
        if missing:
            raise SchemaMismatch(f"missing factor columns: {missing}")
        extra = [c for c in factor_cols if c not in domains]
        if extra:
            raise SchemaMismatch(f"undeclared columns: {extra}")
        allowed = {f: set(domains[f].levels) for f in factor_cols}
        col_of = {c: header.index(c) for c in header}
        mcol = col_of[metric_name]
        rows, metrics, rejected = [], [], 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", line=lineno)
            try:
                levels = [int(rec[col_of[c]]) for c in factor_cols]
                m = float(rec[mcol])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not math.isfinite(m):
                raise ParseError(f"non-finite metric {rec[mcol]!r}", line=lineno)
            if any(lv not in allowed[c] for c, lv in zip(factor_cols, levels)):
                rejected += 1
                continue
            rows.append(levels)
            metrics.append(m)
    if not rows:
        raise EmptyData(f"{path}: no valid data rows")
    return ObservationTable(
        factor_names=tuple(factor_cols),
        levels=np.array(rows, dtype=np.int64),
        metric=np.array(metrics, dtype=float),
        metric_name=metric_name,
        meta={"source": "ingested", "rejected_rows": rejected},
    )


# ---------------------------------------------------------------------
# Sampling

def _sample_factors(gcm: Gcm, n: int, seed: int, do: dict | None = None) -> np.ndarray:
    """Ancestral sampling of factor level indices, sharded for seed-stable
    output independent of any parallel execution plan."""
    factors = gcm.factors
    order = gcm.factor_order()
    col = {f: j for j, f in enumerate(factors)}
    out = np.empty((n, len(factors)), dtype=np.int64)
    start = 0
    shard = 0
    while start < n:
        m = min(_SHARD_SIZE, n - start)
        rng = np.random.default_rng([int(seed), shard])
        block = np.empty((m, len(factors)), dtype=np.int64)
        for v in order:
            if do and v in do:
                block[:, col[v]] = do[v]
                continue
            cpd = gcm.cpds[v]
            if cpd.parents:
                probs = np.empty((m, len(gcm.domains[v])), dtype=float)
                # group rows by parent configuration
                pidx = np.stack([block[:, col[p]] for p in cpd.parents], axis=1)
                keys, inverse = np.unique(pidx, axis=0, return_inverse=True)
                for k, key in enumerate(keys):
                    probs[inverse == k] = cpd.row(tuple(int(x) for x in key))
            else:
                probs = np.broadcast_to(cpd.row(()), (m, len(gcm.domains[v])))
            u = rng.random(m)
            block[:, col[v]] = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
        out[start:start + m] = block
        start += m
        shard += 1
    return out


def _metric_rows(gcm: Gcm, level_idx: np.ndarray, seed: int) -> np.ndarray:
    p = gcm.response_rows(gcm.factors, level_idx)
    rng = np.random.default_rng([int(seed), 0x7FFFFFFF])  # stream disjoint from shard ids
    if gcm.metric == "correctness":
        return (rng.random(len(p)) < p).astype(float)
    return p + gcm.noise_sigma * rng.standard_normal(len(p))


def _indices_to_levels(gcm: Gcm, level_idx: np.ndarray) -> np.ndarray:
    out = np.empty_like(level_idx)
    for j, f in enumerate(gcm.factors):
        out[:, j] = np.asarray(gcm.domains[f].levels, dtype=np.int64)[level_idx[:, j]]
    return out


def sample_observational(gcm: Gcm, n: int, seed: int) -> ObservationTable:
    """Draw n rows by ancestral sampling in topological order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    idx = _sample_factors(gcm, n, seed)
    metric = _metric_rows(gcm, idx, seed)
    return ObservationTable(gcm.factors, _indices_to_levels(gcm, idx), metric,
                            meta={"seed": int(seed), "source": "simulated"})


def sample_interventional(gcm: Gcm, v: str, value: int, n: int, seed: int) -> ObservationTable:
    """Sample from the mutilated model do(v = value)."""
    if v not in gcm.factors:
        raise UnknownNode(v)
    vidx = gcm.domains[v].index(value)
    idx = _sample_factors(gcm, n, seed, do={v: vidx})
    metric = _metric_rows(gcm, idx, seed)
    return ObservationTable(gcm.factors, _indices_to_levels(gcm, idx), metric,
                            meta={"seed": int(seed), "source": "simulated",
                                  "do": {v: int(value)}})


# ---------------------------------------------------------------------
# Exact expectations

def _enumerate_states(gcm: Gcm) -> np.ndarray:
    """All factor-level index assignments, shape (n_states, n_factors)."""
    grids = [range(len(gcm.domains[f])) for f in gcm.factors]
    return np.array(list(product(*grids)), dtype=np.int64)


def _joint_probability(gcm: Gcm, states: np.ndarray, do: dict) -> np.ndarray:
    """Mutilated-model probability of each state row (do-nodes contribute 1)."""
    col = {f: j for j, f in enumerate(gcm.factors)}
    prob = np.ones(states.shape[0], dtype=float)
    for v in gcm.factors:
        if v in do:
            prob *= (states[:, col[v]] == do[v]).astype(float)
            continue
        cpd = gcm.cpds[v]
        pidx = np.stack([states[:, col[p]] for p in cpd.parents], axis=1) if cpd.parents \
            else np.zeros((states.shape[0], 0), dtype=np.int64)
        keys, inverse = np.unique(pidx, axis=0, return_inverse=True)
        pv = np.empty(states.shape[0], dtype=float)
        for k, key in enumerate(keys):
            row = cpd.row(tuple(int(x) for x in key))
            mask = inverse == k
            pv[mask] = row[states[mask, col[v]]]
        prob *= pv
    return prob


def exact_interventional_expectation(gcm: Gcm, v: str, value: int,
                                     cap: int = ENUMERATION_CAP) -> float:
    """E[M | do(v = value)] by full enumeration of the mutilated joint."""
    if v not in gcm.factors:
        raise UnknownNode(v)
    if gcm.n_states() > cap:
        raise StateSpaceTooLarge(f"{gcm.n_states()} joint states exceed cap {cap}")
    vidx = gcm.domains[v].index(value)
    states = _enumerate_states(gcm)
    prob = _joint_probability(gcm, states, do={v: vidx})
    resp = gcm.response_rows(gcm.factors, states)
    return float(np.sum(prob * resp))


def true_ace(gcm: Gcm, v: str, frm: int, to: int,
             cap: int = ENUMERATION_CAP, mc_n: int = 10**6, mc_seed: int = 0) -> float:
    """Ground-truth ACE: E[M|do(v=to)] - E[M|do(v=frm)].

    Exact by enumeration when the joint state space fits under cap;
    otherwise falls back to Monte-Carlo interventional sampling.
    """
    if frm == to:
        return 0.0
    try:
        hi = exact_interventional_expectation(gcm, v, to, cap=cap)
        lo = exact_interventional_expectation(gcm, v, frm, cap=cap)
        return hi - lo
    except StateSpaceTooLarge:
        hi = sample_interventional(gcm, v, to, mc_n, mc_seed).mean_metric()
        lo = sample_interventional(gcm, v, frm, mc_n, mc_seed + 1).mean_metric()
        return hi - lo


# ---------------------------------------------------------------------
# Random model generation

def augment_with_sink(dag: g.CausalDag, sink: str = METRIC_NAME) -> g.CausalDag:
    """Attach the metric sink as a child of every factor node (idempotent)."""
    if dag.sink is not None:
        return dag
    if sink in dag.nodes:
        raise InvalidGcm(f"node {sink!r} exists but is not marked as sink")
    return g.CausalDag(
        nodes=dag.nodes + (sink,),
        edges=dag.edges + tuple((v, sink) for v in dag.nodes),
        sink=sink,
    )


def random_gcm(dag: g.CausalDag, domain: SeverityDomain, rng: np.random.Generator) -> Gcm:
    """Random CPTs (symmetric Dirichlet(1) rows) plus a random monotone
    retention response; the sink is attached if the DAG lacks one."""
    full = augment_with_sink(dag)
    factors = full.factor_nodes()
    domains = {v: domain for v in factors}
    cpds = {}
    for v in factors:
        parents = tuple(p for p in full.parents(v) if p != full.sink)
        keys = list(product(*[range(len(domain)) for _ in parents]))
        table = {k: rng.dirichlet(np.ones(len(domain))) for k in keys}
        cpds[v] = Cpd(child=v, parents=parents, table=table)
    base = float(rng.uniform(0.75, 0.9))
    retention = {}
    for v in factors:
        mults = np.sort(rng.uniform(0.7, 1.0, size=len(domain) - 1))[::-1]
        retention[v] = (1.0,) + tuple(float(x) for x in mults)
    response = RetentionResponse(base=base, retention=retention)
    return Gcm(dag=full, domains=domains, cpds=cpds, response=response)
