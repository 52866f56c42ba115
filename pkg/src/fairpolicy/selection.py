"""Preference-parameter sweeps, diagnostics, budget-based selection, interpolation.

A sweep fits the plug-in array once, then maximizes the chosen empirical
objective (plug-in, IPW with known propensities, or IPW with cell-frequency
propensities) for every lambda on the grid.  Per-lambda diagnostics (target
value, per-group unfairness) are always computed against the same fitted
array, matching how the empirical illustrations report estimated quantities.

Budget selection spends at most beta of the target functional on fairness:
it picks the largest lambda whose target drop relative to lambda = 0 stays
within beta * (1 - c_n), with slack c_n = sqrt(log(n) / n).  The drop is used
raw; it can be negative and is not clamped.

The value function over lambda is estimated by piecewise-linear interpolation
on the uniform grid {0, 1/m, ..., 1}; `lip_m` is the underlying operator and
its guarantee is attached to that grid only (non-uniform grids get the
generic `interpolate_linear`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .estimation import (
    PropensityModel,
    TrainingSample,
    fit_plugin,
    ipw_objective,
    ipw_objective_estimated,
)
from .functionals import SimilarityMeasure, TargetFunctional
from .objective import DecisionRule, implied_cdf, implied_cdf_group, omega
from .optimizer import OptimizerConfig, maximize

_MASK64 = (1 << 64) - 1

ESTIMATORS = ("plugin", "ipw", "ipw-estimated")


class LambdaNotOnGrid(ValueError):
    """Requested a path entry at a lambda that was never fitted."""


class InvalidBudget(ValueError):
    """Budget beta must be a positive real."""


class NonUniformGrid(ValueError):
    """Interpolation with the LIP operator needs the uniform grid {0, 1/m, ..., 1}."""


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing preference parameters in [0, 1], starting at 0."""

    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("grid must be nonempty")
        if values[0] != 0.0:
            raise ValueError("grid must contain 0 as its first element")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("grid values must lie in [0, 1]")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("grid values must be strictly increasing")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def uniform(cls, m: int) -> "LambdaGrid":
        """{0, 1/m, 2/m, ..., 1}."""
        if m < 1:
            raise ValueError("m must be >= 1")
        return cls(tuple(i / m for i in range(m + 1)))

    def index_of(self, lam: float, tol: float = 1e-12) -> int:
        for i, v in enumerate(self.values):
            if abs(v - lam) <= tol:
                return i
        raise LambdaNotOnGrid(f"lambda {lam!r} is not on the grid")

    def uniform_m(self, tol: float = 1e-12) -> int:
        """The m with values == {0, 1/m, ..., 1}; raises NonUniformGrid otherwise."""
        m = len(self.values) - 1
        if m < 1 or self.values[-1] != 1.0:
            raise NonUniformGrid("grid must end at 1")
        if any(abs(v - i / m) > tol for i, v in enumerate(self.values)):
            raise NonUniformGrid("grid points must be {0, 1/m, ..., 1}")
        return m


@dataclass(frozen=True)
class PathEntry:
    """Fitted rule and diagnostics for one preference parameter."""

    rule: DecisionRule
    obj_value: float
    target_value: float
    unfairness: dict
    max_unfairness: float


@dataclass(frozen=True, eq=False)
class LambdaPath:
    """Per-lambda results of a sweep, aligned with the grid."""

    grid: LambdaGrid
    entries: tuple[PathEntry, ...]
    n: int

    def __post_init__(self):
        if len(self.entries) != len(self.grid):
            raise ValueError("one entry per grid value required")
        object.__setattr__(self, "entries", tuple(self.entries))

    def entry(self, lam: float) -> PathEntry:
        return self.entries[self.grid.index_of(lam)]

    @property
    def obj_values(self) -> np.ndarray:
        return np.array([e.obj_value for e in self.entries])


@dataclass(frozen=True)
class BudgetSelection:
    """Outcome of budget-based preference-parameter selection."""

    beta: float
    c_n: float
    threshold: float
    chosen_lambda: float
    deltas: dict


def _per_lambda_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=(1, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _empirical_objective(sample, arr, lam, t, s, estimator, propensity):
    if estimator == "plugin":
        return lambda rule: omega(rule, arr, lam, t, s)
    if estimator == "ipw":
        if propensity is None:
            raise ValueError("estimator 'ipw' needs a propensity model")
        return lambda rule: ipw_objective(sample, rule, lam, t, s, propensity)
    if estimator == "ipw-estimated":
        return lambda rule: ipw_objective_estimated(sample, rule, lam, t, s)
    raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")


def sweep(
    sample: TrainingSample,
    grid: LambdaGrid,
    t: TargetFunctional,
    s: SimilarityMeasure,
    cfg: OptimizerConfig,
    estimator: str = "plugin",
    propensity: PropensityModel | None = None,
) -> LambdaPath:
    """One maximize call per grid lambda against the chosen empirical objective.

    Per-lambda optimizer seeds derive from (cfg.seed, lambda index), so the
    path is reproducible bit-for-bit and per-lambda runs are independent.
    """
    arr = fit_plugin(sample)
    positive_groups = [z for z in sample.space.z_levels if arr.p_z(z) > 0.0]
    entries = []
    for idx, lam in enumerate(grid):
        obj = _empirical_objective(sample, arr, lam, t, s, estimator, propensity)
        result = maximize(obj, sample.space, replace(cfg, seed=_per_lambda_seed(cfg.seed, idx)))
        pop = implied_cdf(result.rule, arr)
        unfairness = {
            z: s.value(implied_cdf_group(result.rule, arr, z), pop) for z in positive_groups
        }
        entries.append(
            PathEntry(
                rule=result.rule,
                obj_value=result.value,
                target_value=t.value(pop),
                unfairness=unfairness,
                max_unfairness=max(unfairness.values()),
            )
        )
    return LambdaPath(grid=grid, entries=tuple(entries), n=sample.n)


def delta_n(path: LambdaPath, lam: float) -> float:
    """Target drop relative to the unpenalized policy; can be negative."""
    return path.entry(0.0).target_value - path.entry(lam).target_value


def budget_slack(n: int) -> float:
    """c_n = sqrt(log(n) / n) (natural log)."""
    return math.sqrt(math.log(n) / n)


def select_lambda_budget(path: LambdaPath, beta: float) -> BudgetSelection:
    """Largest grid lambda whose target drop stays within beta * (1 - c_n).

    Always well defined: the drop at lambda = 0 is exactly 0.  For c_n >= 1
    the threshold would be non-positive, so lambda = 0 is returned.
    """
    if not (isinstance(beta, (int, float)) and math.isfinite(beta) and beta > 0):
        raise InvalidBudget(f"beta must be a positive real, got {beta!r}")
    if path.n < 2:
        raise ValueError("budget selection needs n >= 2")
    c_n = budget_slack(path.n)
    threshold = beta * (1.0 - c_n)
    deltas = {lam: delta_n(path, lam) for lam in path.grid}
    chosen = 0.0
    if c_n < 1.0:
        for lam in path.grid:
            if deltas[lam] <= threshold:
                chosen = lam
    return BudgetSelection(
        beta=float(beta), c_n=c_n, threshold=threshold, chosen_lambda=chosen, deltas=deltas
    )


def lip_m(values, lam: float) -> float:
    """Piecewise-linear interpolation of values sampled on {0, 1/m, ..., 1}."""
    values = np.asarray(values, dtype=float)
    m = values.size - 1
    if m < 1:
        raise ValueError("need at least two values")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    pos = lam * m
    i = min(int(math.floor(pos)), m - 1)
    if abs(lam - i / m) <= 1e-12:
        return float(values[i])
    if abs(lam - (i + 1) / m) <= 1e-12:
        return float(values[i + 1])
    return float(values[i] + (values[i + 1] - values[i]) * m * (lam - i / m))


def interpolate_value(path: LambdaPath, lam: float) -> float:
    """Value-function estimate at lam by LIP interpolation of the path's
    objective values; requires the uniform grid."""
    path.grid.uniform_m()
    return lip_m(path.obj_values, lam)


def interpolate_linear(xs, ys, x: float) -> float:
    """Generic piecewise-linear interpolation on an arbitrary increasing grid.

    Kept separate from interpolate_value: the uniform-grid guarantee does not
    attach here.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size < 2:
        raise ValueError("need matching xs/ys with at least two points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    if not xs[0] <= x <= xs[-1]:
        raise ValueError(f"x {x!r} outside [{xs[0]}, {xs[-1]}]")
    return float(np.interp(x, xs, ys))
