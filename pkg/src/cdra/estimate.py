"""S-learner outcome models and ACE estimation with uncertainty.

Two estimator kinds: exact stratified conditional means (the default for
discrete severities) and a bagged regression-tree ensemble for smoothing
sparse strata. Both feed the same averaged-contrast ACE estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .errors import (
    EmptyData,
    InsufficientSupport,
    LevelOutOfDomain,
    MissingColumn,
)
from .gcm import ObservationTable
from .identify import AdjustmentSet

DEFAULT_COVERAGE_FLOOR = 0.95
FOREST_N_TREES = 100
FOREST_MAX_DEPTH = 8
FOREST_SUBSAMPLE = 0.8


@dataclass(frozen=True)
class AceEstimate:
    target: str
    frm: int
    to: int
    value: float
    coverage: float
    n: int
    ci: tuple | None = None          # (lo, hi, level, replicates)
    adjustment: tuple = ()
    estimator: str = "stratified"

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "from": self.frm,
            "to": self.to,
            "ace": self.value,
            "ci": list(self.ci[:2]) if self.ci else None,
            "ci_level": self.ci[2] if self.ci else None,
            "coverage": self.coverage,
            "n": self.n,
            "adjustment": sorted(self.adjustment),
            "estimator": self.estimator,
        }


@dataclass(frozen=True)
class AceError:
    estimate: AceEstimate
    truth: float
    delta: float


def delta_ace(estimate: AceEstimate, truth: float) -> AceError:
    return AceError(estimate=estimate, truth=float(truth),
                    delta=abs(estimate.value - float(truth)))


class _Coder:
    """Integer coding of adjustment strata from observed column values."""

    def __init__(self, data: ObservationTable, cols: list[str]):
        self.cols = list(cols)
        self.uniques = [np.unique(data.column(c)) for c in cols]
        self.strides = []
        stride = 1
        for u in self.uniques:
            self.strides.append(stride)
            stride *= len(u)
        self.n_codes = stride

    def codes(self, data: ObservationTable) -> np.ndarray:
        n = len(data)
        code = np.zeros(n, dtype=np.int64)
        for c, u, s in zip(self.cols, self.uniques, self.strides):
            idx = np.searchsorted(u, data.column(c))
            idx = np.clip(idx, 0, len(u) - 1)
            if not np.array_equal(u[idx], data.column(c)):
                raise LevelOutOfDomain(f"unseen level in column {c}")
            code += idx * s
        return code


@dataclass
class StratifiedModel:
    """Exact per-(w, v) sample means with counts."""

    target: str
    adjustment: AdjustmentSet
    coder: _Coder
    target_levels: np.ndarray
    means: np.ndarray            # (n_codes, n_levels), nan where unsupported
    counts: np.ndarray
    metric_range: tuple
    n: int
    kind: str = "stratified"

    def target_index(self, level: int) -> int:
        pos = np.searchsorted(self.target_levels, level)
        if pos >= len(self.target_levels) or self.target_levels[pos] != level:
            raise LevelOutOfDomain(f"{self.target}={level} never observed")
        return int(pos)


@dataclass
class ForestModel:
    """Bagged regression trees on one-hot stratum/treatment features."""

    target: str
    adjustment: AdjustmentSet
    coder: _Coder
    target_levels: np.ndarray
    trees: list
    n: int
    kind: str = "forest"

    def _features(self, codes: np.ndarray, tidx: np.ndarray) -> np.ndarray:
        # one-hot of each adjustment column plus the treatment level
        cols = []
        for u, s in zip(self.coder.uniques, self.coder.strides):
            idx = (codes // s) % len(u)
            cols.append(np.eye(len(u))[idx])
        cols.append(np.eye(len(self.target_levels))[tidx])
        return np.hstack(cols) if cols else np.zeros((len(tidx), 0))

    def predict(self, codes: np.ndarray, tidx: np.ndarray) -> np.ndarray:
        x = self._features(codes, tidx)
        preds = np.zeros(len(tidx))
        for tree in self.trees:
            preds += tree.predict(x)
        return preds / len(self.trees)

    def target_index(self, level: int) -> int:
        pos = np.searchsorted(self.target_levels, level)
        if pos >= len(self.target_levels) or self.target_levels[pos] != level:
            raise LevelOutOfDomain(f"{self.target}={level} never observed")
        return int(pos)


def fit_outcome_model(data: ObservationTable, target: str, adjustment: AdjustmentSet,
                      kind: str = "stratified", seed: int = 0):
    """Fit mu(w, v) = E[M | W=w, V=v] on the table."""
    if len(data) == 0:
        raise EmptyData("cannot fit on an empty table")
    for c in [target, *adjustment.variables]:
        if c not in data.factor_names:
            raise MissingColumn(c)
    wcols = sorted(adjustment.variables)
    coder = _Coder(data, wcols)
    target_levels = np.unique(data.column(target))
    codes = coder.codes(data)
    tidx = np.searchsorted(target_levels, data.column(target))
    if kind == "stratified":
        n_lv = len(target_levels)
        flat = codes * n_lv + tidx
        size = coder.n_codes * n_lv
        counts = np.bincount(flat, minlength=size).astype(np.int64)
        sums = np.bincount(flat, weights=data.metric, minlength=size)
        with np.errstate(invalid="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        return StratifiedModel(
            target=target, adjustment=adjustment, coder=coder,
            target_levels=target_levels,
            means=means.reshape(coder.n_codes, n_lv),
            counts=counts.reshape(coder.n_codes, n_lv),
            metric_range=(float(data.metric.min()), float(data.metric.max())),
            n=len(data),
        )
    if kind == "forest":
        rng = np.random.default_rng([int(seed), 0xF0])
        model = ForestModel(target=target, adjustment=adjustment, coder=coder,
                            target_levels=target_levels, trees=[], n=len(data))
        x = model._features(codes, tidx)
        m = max(1, int(round(FOREST_SUBSAMPLE * len(data))))
        for t in range(FOREST_N_TREES):
            rows = rng.choice(len(data), size=m, replace=False)
            tree = DecisionTreeRegressor(max_depth=FOREST_MAX_DEPTH, random_state=t)
            tree.fit(x[rows], data.metric[rows])
            model.trees.append(tree)
        return model
    raise ValueError(f"unknown estimator kind: {kind}")


def estimate_ace(data: ObservationTable, model, frm: int, to: int,
                 coverage_floor: float = DEFAULT_COVERAGE_FLOOR) -> AceEstimate:
    """Averaged S-learner contrast: mean over rows of mu(w, to) - mu(w, frm).

    With the stratified model, rows whose (w, frm) or (w, to) stratum lacks
    support are skipped; the retained fraction is reported as coverage and
    enforced against the floor.
    """
    adjustment = tuple(sorted(model.adjustment.variables))
    if frm == to:
        return AceEstimate(target=model.target, frm=frm, to=to, value=0.0,
                           coverage=1.0, n=len(data), adjustment=adjustment,
                           estimator=model.kind)
    codes = model.coder.codes(data)
    i_from = model.target_index(frm)
    i_to = model.target_index(to)
    if model.kind == "stratified":
        mu_from = model.means[codes, i_from]
        mu_to = model.means[codes, i_to]
        supported = ~(np.isnan(mu_from) | np.isnan(mu_to))
        coverage = float(supported.mean()) if len(data) else 0.0
        if coverage < coverage_floor:
            raise InsufficientSupport(coverage, coverage_floor)
        value = float(np.mean(mu_to[supported] - mu_from[supported]))
    else:
        mu_from = model.predict(codes, np.full(len(data), i_from))
        mu_to = model.predict(codes, np.full(len(data), i_to))
        coverage = 1.0
        value = float(np.mean(mu_to - mu_from))
    return AceEstimate(target=model.target, frm=frm, to=to, value=value,
                       coverage=coverage, n=len(data), adjustment=adjustment,
                       estimator=model.kind)


def bootstrap_ci(data: ObservationTable, target: str, adjustment: AdjustmentSet,
                 frm: int, to: int, b: int = 200, level: float = 0.95,
                 seed: int = 0, kind: str = "stratified",
                 coverage_floor: float = DEFAULT_COVERAGE_FLOOR) -> AceEstimate:
    """Percentile bootstrap over row resampling with a refit per replicate."""
    if b < 50:
        raise ValueError("bootstrap requires b >= 50 replicates")
    model = fit_outcome_model(data, target, adjustment, kind=kind, seed=seed)
    point = estimate_ace(data, model, frm, to, coverage_floor=coverage_floor)
    values = []
    for k in range(b):
        rng = np.random.default_rng([int(seed), k])
        sample = data.take(rng.integers(0, len(data), size=len(data)))
        try:
            m = fit_outcome_model(sample, target, adjustment, kind=kind, seed=seed)
            values.append(estimate_ace(sample, m, frm, to, coverage_floor=0.0).value)
        except (EmptyData, LevelOutOfDomain):
            continue
    if not values:
        raise InsufficientSupport(0.0, coverage_floor)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha])
    # percentile intervals can just miss the point estimate on tiny samples
    lo, hi = min(float(lo), point.value), max(float(hi), point.value)
    return AceEstimate(target=point.target, frm=frm, to=to, value=point.value,
                       coverage=point.coverage, n=point.n,
                       ci=(lo, hi, level, len(values)),
                       adjustment=point.adjustment, estimator=kind)
