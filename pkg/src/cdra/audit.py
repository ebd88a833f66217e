"""Audit orchestration: per-factor ACE over a dataset, ground-truth
comparison on simulated domains, and DAG-misspecification sweeps."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import gcm as gcm_mod
from . import graph as g
from .errors import EmptyData, InsufficientSupport, LevelOutOfDomain, SchemaMismatch
from .estimate import (
    AceError,
    AceEstimate,
    bootstrap_ci,
    delta_ace,
    estimate_ace,
    fit_outcome_model,
)
from .gcm import Gcm, ObservationTable, augment_with_sink, sample_observational, true_ace
from .identify import default_adjustment_set


@dataclass(frozen=True)
class AuditConfig:
    assumed_dag: g.CausalDag
    seed: int
    pairs: tuple = ((0, 1),)
    estimator: str = "stratified"
    bootstrap: int | None = None        # replicate count, None disables CIs
    ci_level: float = 0.95
    coverage_floor: float = 0.95

    def to_dict(self) -> dict:
        return {
            "assumed_dag": self.assumed_dag.to_dict(),
            "seed": self.seed,
            "pairs": [list(p) for p in self.pairs],
            "estimator": self.estimator,
            "bootstrap": self.bootstrap,
            "ci_level": self.ci_level,
            "coverage_floor": self.coverage_floor,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class FactorAudit:
    estimate: AceEstimate | None
    flag: str | None = None             # "no causal path" | "insufficient support"
    error: AceError | None = None
    flag_target: str | None = None      # factor name when estimate is absent
    coverage: float | None = None       # achieved coverage on support failure

    def to_dict(self) -> dict:
        d = {"estimate": self.estimate.to_dict() if self.estimate else None,
             "flag": self.flag}
        if self.estimate is None:
            d["factor"] = self.flag_target
            d["coverage"] = self.coverage
        if self.error is not None:
            d["truth"] = self.error.truth
            d["delta_ace"] = self.error.delta
        return d


@dataclass
class AuditReport:
    factors: tuple
    audits: list                        # FactorAudit, one per (factor, pair)
    mean_metric: float
    config_hash: str
    provenance: dict

    def estimates(self) -> dict:
        """factor -> ACE value for the first treatment pair (None if flagged)."""
        out = {}
        for a in self.audits:
            f = a.estimate.target if a.estimate else a.flag_target
            if f not in out:
                out[f] = a.estimate.value if a.estimate else None
        return out

    def deltas(self) -> list[float]:
        return [a.error.delta for a in self.audits if a.error is not None]

    def mean_delta(self) -> float:
        ds = self.deltas()
        if not ds:
            raise EmptyData("report carries no ground-truth errors")
        return float(np.mean(ds))

    def to_dict(self) -> dict:
        return {
            "factors": list(self.factors),
            "audits": [a.to_dict() for a in self.audits],
            "mean_metric": self.mean_metric,
            "config_hash": self.config_hash,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def run_audit(data: ObservationTable, config: AuditConfig) -> AuditReport:
    """Per-factor ACE estimates under the assumed DAG.

    The assumed DAG is augmented with the metric sink; each factor's
    adjustment set is its parents in that graph. Support failures are
    non-fatal: the factor is flagged and excluded from the estimates.
    """
    dag = augment_with_sink(config.assumed_dag)
    factors = dag.factor_nodes()
    if set(factors) != set(data.factor_names):
        raise SchemaMismatch(
            f"data columns {sorted(data.factor_names)} != DAG factors {sorted(factors)}")
    if len(data) == 0:
        raise EmptyData("no rows to audit")
    sink = dag.sink
    audits = []
    for i, v in enumerate(factors):
        adjustment = default_adjustment_set(dag, v, sink)
        has_path = sink in g.descendants(dag, v)
        model = None
        for frm, to in config.pairs:
            try:
                if config.bootstrap:
                    est = bootstrap_ci(data, v, adjustment, frm, to,
                                       b=config.bootstrap, level=config.ci_level,
                                       seed=config.seed + i, kind=config.estimator,
                                       coverage_floor=config.coverage_floor)
                else:
                    if model is None:
                        model = fit_outcome_model(data, v, adjustment,
                                                  kind=config.estimator,
                                                  seed=config.seed + i)
                    est = estimate_ace(data, model, frm, to,
                                       coverage_floor=config.coverage_floor)
                flag = None if has_path else "no causal path"
                audits.append(FactorAudit(estimate=est, flag=flag))
            except InsufficientSupport as exc:
                audits.append(FactorAudit(estimate=None, flag="insufficient support",
                                          flag_target=v, coverage=exc.coverage))
            except LevelOutOfDomain:
                # a requested treatment level never appears in the data, so
                # no contrast exists for this factor at all
                audits.append(FactorAudit(estimate=None, flag="insufficient support",
                                          flag_target=v, coverage=0.0))
    return AuditReport(
        factors=factors,
        audits=audits,
        mean_metric=data.mean_metric(),
        config_hash=config.content_hash(),
        provenance={"seed": config.seed,
                    "source": data.meta.get("source", "unknown"),
                    "n": len(data)},
    )


def run_simulated_audit(gcm: Gcm, n: int, config: AuditConfig | None = None,
                        seed: int | None = None,
                        data: ObservationTable | None = None) -> AuditReport:
    """Sample observational data from the GCM, audit it, and attach the
    enumerated ground-truth ACE per factor."""
    if config is None:
        if seed is None:
            raise ValueError("need a config or a seed")
        factor_dag = g.CausalDag(
            nodes=gcm.factors,
            edges=tuple(e for e in gcm.dag.edges if e[1] != gcm.dag.sink),
        )
        config = AuditConfig(assumed_dag=factor_dag, seed=seed)
    if data is None:
        if n == 0:
            raise EmptyData("n must be positive for a simulated audit")
        data = sample_observational(gcm, n, config.seed)
    report = run_audit(data, config)
    for a in report.audits:
        if a.estimate is None:
            continue
        truth = true_ace(gcm, a.estimate.target, a.estimate.frm, a.estimate.to)
        a.error = delta_ace(a.estimate, truth)
    return report


@dataclass
class SweepCell:
    n_errors: int
    mode: str
    repeat: int
    perturbation: g.DagPerturbation
    mean_delta: float
    residual: float
    per_factor: list                    # dicts with factor, delta, adjustment, valid_in_true

    def to_dict(self) -> dict:
        return {
            "n_errors": self.n_errors,
            "mode": self.mode,
            "repeat": self.repeat,
            "added": sorted(list(e) for e in self.perturbation.added),
            "removed": sorted(list(e) for e in self.perturbation.removed),
            "mean_delta_ace": self.mean_delta,
            "residual": self.residual,
            "per_factor": self.per_factor,
        }


@dataclass
class MisspecReport:
    baseline_delta: float
    cells: list
    config_hash: str
    provenance: dict

    def aggregate(self) -> dict:
        """mean/std of residuals per (n_errors, mode)."""
        groups: dict = {}
        for c in self.cells:
            groups.setdefault((c.n_errors, c.mode), []).append(c.residual)
        return {
            f"{ne}:{mode}": {"mean": float(np.mean(v)), "std": float(np.std(v)),
                             "cells": len(v)}
            for (ne, mode), v in sorted(groups.items())
        }

    def to_dict(self) -> dict:
        return {
            "baseline_delta_ace": self.baseline_delta,
            "cells": [c.to_dict() for c in self.cells],
            "aggregate": self.aggregate(),
            "config_hash": self.config_hash,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def run_misspec_sweep(gcm: Gcm, n: int, n_errors: list, modes: list,
                      repeats: int, config: AuditConfig) -> MisspecReport:
    """Audit the same observational dataset under randomly perturbed assumed
    DAGs and report residual Delta_ACE against the unperturbed baseline.

    Perturbation applies to the factor-only DAG; only the assumed structure
    varies, never the data, so residuals isolate specification error.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    from .identify import is_valid_backdoor

    true_factor_dag = config.assumed_dag
    true_aug = augment_with_sink(true_factor_dag)
    data = sample_observational(gcm, n, config.seed)
    truths = {v: true_ace(gcm, v, frm, to)
              for v in gcm.factors for frm, to in config.pairs}

    baseline = run_simulated_audit(gcm, n, config=config, data=data)
    baseline_delta = baseline.mean_delta()

    cells = []
    cell_idx = 0
    for ne in n_errors:
        for mode in modes:
            for rep in range(repeats):
                rng = np.random.default_rng([int(config.seed), 0x5EE9, cell_idx])
                cell_idx += 1
                pert = g.perturb(true_factor_dag, ne, mode, rng)
                assumed = g.apply_perturbation(true_factor_dag, pert)
                cell_config = replace(config, assumed_dag=assumed)
                report = run_audit(data, cell_config)
                per_factor = []
                deltas = []
                for a in report.audits:
                    if a.estimate is None:
                        per_factor.append({"factor": a.flag_target, "flag": a.flag})
                        continue
                    v = a.estimate.target
                    delta = abs(a.estimate.value - truths[v])
                    deltas.append(delta)
                    w = set(a.estimate.adjustment)
                    per_factor.append({
                        "factor": v,
                        "delta_ace": delta,
                        "adjustment": sorted(w),
                        "valid_in_true": is_valid_backdoor(true_aug, v, true_aug.sink, w),
                    })
                mean_delta = float(np.mean(deltas)) if deltas else float("nan")
                cells.append(SweepCell(
                    n_errors=ne, mode=mode, repeat=rep, perturbation=pert,
                    mean_delta=mean_delta, residual=mean_delta - baseline_delta,
                    per_factor=per_factor,
                ))
    return MisspecReport(
        baseline_delta=baseline_delta,
        cells=cells,
        config_hash=config.content_hash(),
        provenance={"seed": config.seed, "n": n, "repeats": repeats,
                    "n_errors": list(n_errors), "modes": list(modes)},
    )


def compare_reports(a: AuditReport, b: AuditReport) -> list[dict]:
    """Per-factor ACE difference between two reports, ranked by |ACE| in a."""
    ea, eb = a.estimates(), b.estimates()
    if set(ea) != set(eb):
        raise SchemaMismatch(f"factor sets differ: {sorted(ea)} vs {sorted(eb)}")
    rows = []
    for f in ea:
        va, vb = ea[f], eb[f]
        rows.append({
            "factor": f,
            "ace_a": va,
            "ace_b": vb,
            "delta": (va - vb) if va is not None and vb is not None else None,
        })
    rows.sort(key=lambda r: -abs(r["ace_a"]) if r["ace_a"] is not None else 1.0)
    for rank, r in enumerate(rows, start=1):
        r["rank"] = rank
    return rows


def _fmt_pct(x: float) -> str:
    """Two significant figures, percent scale."""
    return f"{100.0 * x:.2g}"


def render_audit_table(report: AuditReport) -> str:
    """Plain-text factor/ACE table (percent, 2 significant figures)."""
    lines = []
    header = ["factor", "from", "to", "ACE (%)", "coverage"]
    has_truth = any(a.error is not None for a in report.audits)
    if has_truth:
        header += ["truth (%)", "delta (%)"]
    rows = []
    for a in report.audits:
        if a.estimate is None:
            rows.append([getattr(a, "flag_target", "?"), "-", "-", a.flag, "-"]
                        + (["-", "-"] if has_truth else []))
            continue
        e = a.estimate
        row = [e.target, str(e.frm), str(e.to), _fmt_pct(e.value), f"{e.coverage:.3f}"]
        if has_truth:
            if a.error is not None:
                row += [_fmt_pct(a.error.truth), _fmt_pct(a.error.delta)]
            else:
                row += ["-", "-"]
        rows.append(row)
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    def fmt(row):
        return "  ".join(str(c).rjust(w) for c, w in zip(row, widths))
    lines.append(fmt(header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in rows)
    lines.append(f"mean metric: {report.mean_metric:.6f}")
    return "\n".join(lines)


def render_misspec_table(report: MisspecReport) -> str:
    """Grid of mean residuals by perturbation mode and edge-error count."""
    agg = report.aggregate()
    modes = sorted({k.split(":")[1] for k in agg})
    nes = sorted({int(k.split(":")[0]) for k in agg})
    lines = [f"baseline mean delta_ACE (%): {_fmt_pct(report.baseline_delta)}"]
    header = ["mode \\ N_E"] + [str(ne) for ne in nes]
    rows = []
    for mode in modes:
        mean_row = [f"{mode} mean"]
        std_row = [f"{mode} std"]
        for ne in nes:
            cell = agg.get(f"{ne}:{mode}")
            mean_row.append(_fmt_pct(cell["mean"]) if cell else "-")
            std_row.append(_fmt_pct(cell["std"]) if cell else "-")
        rows.append(mean_row)
        rows.append(std_row)
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    def fmt(row):
        return "  ".join(str(c).rjust(w) for c, w in zip(row, widths))
    lines.append(fmt(header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)
