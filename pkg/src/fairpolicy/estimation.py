"""Fitting conditional-CDF arrays from training data, and IPW estimators.

The plug-in fit groups observations into treatment cells (d, x, z), takes the
empirical CDF in each cell (point mass at the upper support endpoint b when a
cell is empty), and records cell frequencies.  The IPW route instead weights
each observation by 1 / (n * e_d(x, z) * p_Z(z)) with e the treatment
propensities, accumulates a monotone step function per protected group, and
projects it onto the CDFs on [a, b].

Propensities are never clipped or trimmed: a zero propensity on a used cell
raises, because silently clamping would mask violated overlap.

Everything here is a deterministic function of the sample; no hidden RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    MonotoneStep,
    OutOfSupport,
    StepCdf,
    SupportInterval,
    mixture,
    point_mass,
    project_mab,
    step_cdf_from_samples,
)
from .functionals import SimilarityMeasure, TargetFunctional
from .objective import (
    CondCdfArray,
    CovariateSpace,
    DecisionRule,
    InvalidLambda,
    SIMPLEX_TOL,
    SpaceMismatch,
)


class ZeroPropensity(ValueError):
    """A known propensity or group probability used by an estimator is not positive."""


class ZeroEstimatedPropensity(ValueError):
    """A cell-frequency propensity estimate used by an estimator is zero."""


@dataclass(frozen=True)
class TrainingRecord:
    """One observation: outcome, covariate level, protected group, treatment (1-based)."""

    y: float
    x: object
    z: object
    d: int


@dataclass(frozen=True, eq=False)
class TrainingSample:
    """A nonempty sample of training records over one covariate space and support.

    Internally stored as columns (outcomes plus integer-coded levels) so that
    fitting and reweighting are vectorized; `records` materializes the
    record view.
    """

    space: CovariateSpace
    support: SupportInterval
    ys: np.ndarray
    xi: np.ndarray
    zi: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=float).ravel()
        xi = np.asarray(self.xi, dtype=np.intp).ravel()
        zi = np.asarray(self.zi, dtype=np.intp).ravel()
        d = np.asarray(self.d, dtype=np.intp).ravel()
        if ys.size == 0:
            raise ValueError("training sample must be nonempty")
        if not (ys.size == xi.size == zi.size == d.size):
            raise ValueError("sample columns must have equal length")
        bad = np.flatnonzero((ys < self.support.a) | (ys > self.support.b) | ~np.isfinite(ys))
        if bad.size:
            raise OutOfSupport(
                f"outcome {float(ys[bad[0]])!r} at row {int(bad[0])} outside "
                f"[{self.support.a}, {self.support.b}]"
            )
        if np.any(xi < 0) or np.any(xi >= len(self.space.x_levels)):
            raise ValueError("x index out of range")
        if np.any(zi < 0) or np.any(zi >= len(self.space.z_levels)):
            raise ValueError("z index out of range")
        bad = np.flatnonzero((d < 1) | (d > self.space.k))
        if bad.size:
            raise ValueError(f"treatment {d[bad[0]]} at row {bad[0]} outside 1..{self.space.k}")
        for name, arr in (("ys", ys), ("xi", xi), ("zi", zi), ("d", d)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.ys.size

    @property
    def records(self) -> tuple[TrainingRecord, ...]:
        xl, zl = self.space.x_levels, self.space.z_levels
        return tuple(
            TrainingRecord(float(y), xl[i], zl[j], int(t))
            for y, i, j, t in zip(self.ys, self.xi, self.zi, self.d)
        )

    @classmethod
    def from_columns(cls, y, x, z, d, support: SupportInterval,
                     space: CovariateSpace | None = None, k: int | None = None) -> "TrainingSample":
        """Build a sample from parallel columns.

        Without an explicit space, x and z levels are ordered by first
        appearance and K defaults to the largest observed treatment index
        (at least 2).
        """
        x = list(x)
        z = list(z)
        d = np.asarray(d, dtype=np.intp)
        if space is None:
            x_levels = tuple(dict.fromkeys(x))
            z_levels = tuple(dict.fromkeys(z))
            if d.size == 0:
                raise ValueError("training sample must be nonempty")
            if np.any(d < 1):
                raise ValueError(f"treatment indices are 1-based, got {d.min()}")
            k_eff = int(k) if k is not None else max(2, int(d.max()))
            space = CovariateSpace(x_levels, z_levels, k_eff)
        elif k is not None and k != space.k:
            raise ValueError("k conflicts with the explicit space")
        try:
            xi = np.array([space.x_index[v] for v in x], dtype=np.intp)
        except KeyError as exc:
            raise ValueError(f"unknown x level {exc.args[0]!r}") from None
        try:
            zi = np.array([space.z_index[v] for v in z], dtype=np.intp)
        except KeyError as exc:
            raise ValueError(f"unknown z level {exc.args[0]!r}") from None
        return cls(space, support, np.asarray(y, dtype=float), xi, zi, d)

    @classmethod
    def from_records(cls, records, support: SupportInterval,
                     space: CovariateSpace | None = None, k: int | None = None) -> "TrainingSample":
        records = list(records)
        return cls.from_columns(
            [r.y for r in records], [r.x for r in records],
            [r.z for r in records], [r.d for r in records],
            support, space=space, k=k,
        )

    def cell_counts(self) -> np.ndarray:
        """Counts per (treatment, x, z) cell, shape (K, |X|, |Z|)."""
        nx, nz = len(self.space.x_levels), len(self.space.z_levels)
        flat = (self.d - 1) * nx * nz + self.xi * nz + self.zi
        return np.bincount(flat, minlength=self.space.k * nx * nz).reshape(
            self.space.k, nx, nz
        )


def fit_plugin(sample: TrainingSample) -> CondCdfArray:
    """Plug-in array: per-cell empirical CDFs and cell frequencies.

    Empty cells get a point mass at the upper support endpoint b.
    """
    space = sample.space
    nx, nz = len(space.x_levels), len(space.z_levels)
    flat = (sample.d - 1) * nx * nz + sample.xi * nz + sample.zi
    order = np.argsort(flat, kind="stable")
    sorted_flat = flat[order]
    sorted_y = sample.ys[order]
    boundaries = np.searchsorted(sorted_flat, np.arange(space.k * nx * nz + 1))
    cdf = {}
    for i in space.treatments:
        for xj, x in enumerate(space.x_levels):
            for zj, z in enumerate(space.z_levels):
                c = (i - 1) * nx * nz + xj * nz + zj
                lo, hi = boundaries[c], boundaries[c + 1]
                if hi > lo:
                    cdf[(i, x, z)] = step_cdf_from_samples(sorted_y[lo:hi], sample.support)
                else:
                    cdf[(i, x, z)] = point_mass(sample.support.b, sample.support)
    pair_counts = np.bincount(sample.xi * nz + sample.zi, minlength=nx * nz)
    pxz = {
        (x, z): pair_counts[xj * nz + zj] / sample.n
        for xj, x in enumerate(space.x_levels)
        for zj, z in enumerate(space.z_levels)
    }
    return CondCdfArray(space, cdf, pxz)


def empirical_pz(sample: TrainingSample) -> dict:
    """Relative frequency of each protected-group level."""
    counts = np.bincount(sample.zi, minlength=len(sample.space.z_levels))
    return {z: counts[j] / sample.n for j, z in enumerate(sample.space.z_levels)}


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Known assignment propensities e(i, x, z) and group probabilities p_Z.

    e maps every (treatment, x, z) cell to a probability in (0, 1], summing to
    one over treatments within each (x, z); pz maps every group to (0, 1] and
    sums to one.
    """

    e: dict
    pz: dict

    def __post_init__(self):
        e = {k: float(v) for k, v in self.e.items()}
        pz = {k: float(v) for k, v in self.pz.items()}
        if any(v <= 0.0 or v > 1.0 for v in e.values()):
            raise ZeroPropensity("propensities must lie in (0, 1]")
        sums = {}
        for (i, x, z), v in e.items():
            sums[(x, z)] = sums.get((x, z), 0.0) + v
        bad = {k: v for k, v in sums.items() if abs(v - 1.0) > SIMPLEX_TOL}
        if bad:
            k, v = next(iter(bad.items()))
            raise ValueError(f"propensities at {k} sum to {v!r}, expected 1")
        if any(v <= 0.0 or v > 1.0 for v in pz.values()):
            raise ZeroPropensity("group probabilities must lie in (0, 1]")
        total = sum(pz.values())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"group probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "pz", pz)


def _require_rule_space(sample: TrainingSample, rule: DecisionRule) -> None:
    if rule.space != sample.space:
        raise SpaceMismatch("rule and sample live on different covariate spaces")


def ipw_group_raw(sample: TrainingSample, rule: DecisionRule, z, prop: PropensityModel) -> MonotoneStep:
    """Pre-projection IPW estimate of the group-z outcome CDF.

    A jump delta_{d_j}(x_j) / (n * e_{d_j}(x_j, z) * p_Z(z)) at each outcome
    y_j of a group-z record; unbiased pointwise for the group CDF but not
    itself a CDF.
    """
    _require_rule_space(sample, rule)
    space = sample.space
    if z not in space.z_index:
        raise ValueError(f"unknown group {z!r}")
    pz = prop.pz.get(z)
    if pz is None or pz <= 0.0:
        raise ZeroPropensity(f"p_Z({z!r}) must be positive")
    mask = sample.zi == space.z_index[z]
    ys = sample.ys[mask]
    d = sample.d[mask]
    xi = sample.xi[mask]
    table = np.zeros((space.k, len(space.x_levels)))
    for i in space.treatments:
        for xj, x in enumerate(space.x_levels):
            table[i - 1, xj] = prop.e.get((i, x, z), 0.0)
    e = table[d - 1, xi]
    if np.any(e <= 0.0):
        j = int(np.flatnonzero(e <= 0.0)[0])
        key = (int(d[j]), space.x_levels[xi[j]], z)
        raise ZeroPropensity(f"propensity e{key} must be positive")
    increments = rule.probs[xi, d - 1] / (sample.n * e * pz)
    return MonotoneStep(sample.support, ys, increments)


def ipw_group_cdf(sample: TrainingSample, rule: DecisionRule, z, prop: PropensityModel) -> StepCdf:
    """IPW estimate of the group-z outcome CDF, projected onto the CDFs on [a, b]."""
    return project_mab(ipw_group_raw(sample, rule, z, prop))


def ipw_objective(
    sample: TrainingSample,
    rule: DecisionRule,
    lam: float,
    t: TargetFunctional,
    s: SimilarityMeasure,
    prop: PropensityModel,
) -> float:
    """Penalized objective with IPW group CDFs and known propensities.

    The population estimate is the p_Z-weighted mixture of the projected
    group estimates.
    """
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda must lie in [0, 1], got {lam!r}")
    groups = {z: ipw_group_cdf(sample, rule, z, prop) for z in sample.space.z_levels}
    missing = [z for z in sample.space.z_levels if z not in prop.pz]
    if missing:
        raise ZeroPropensity(f"p_Z({missing[0]!r}) must be positive")
    weights = np.array([prop.pz[z] for z in sample.space.z_levels])
    weights = weights / weights.sum()
    pop = mixture([(groups[z], w) for z, w in zip(sample.space.z_levels, weights)])
    target = 0.0 if lam == 1.0 else t.value(pop)
    penalty = 0.0
    if lam > 0.0:
        penalty = max(s.value(groups[z], pop) for z in sample.space.z_levels)
    return (1.0 - lam) * target - lam * penalty


def estimated_propensities(sample: TrainingSample) -> tuple[np.ndarray, np.ndarray]:
    """Cell-frequency propensity estimates and group frequencies.

    Returns (e_hat, pz_hat): e_hat[i-1, x, z] = |cell(i,x,z)| / |(x,z)| with
    zero where the (x, z) pair is unobserved, and pz_hat per group level.
    """
    counts = sample.cell_counts()
    pair = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_hat = np.where(pair > 0, counts / np.maximum(pair, 1), 0.0)
    pz_hat = np.bincount(sample.zi, minlength=len(sample.space.z_levels)) / sample.n
    return e_hat, pz_hat


def ipw_objective_estimated(
    sample: TrainingSample,
    rule: DecisionRule,
    lam: float,
    t: TargetFunctional,
    s: SimilarityMeasure,
) -> float:
    """Penalized objective with IPW group CDFs under cell-frequency propensities.

    Groups with zero observed frequency are skipped in the penalty max and
    carry zero weight in the population mixture, matching the plug-in
    convention for empty groups.
    """
    _require_rule_space(sample, rule)
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda must lie in [0, 1], got {lam!r}")
    space = sample.space
    e_hat, pz_hat = estimated_propensities(sample)
    e_rec = e_hat[sample.d - 1, sample.xi, sample.zi]
    pz_rec = pz_hat[sample.zi]
    if np.any(e_rec <= 0.0) or np.any(pz_rec <= 0.0):
        raise ZeroEstimatedPropensity("a used cell has zero estimated propensity")
    base = 1.0 / (sample.n * e_rec * pz_rec)
    groups = {}
    for j, z in enumerate(space.z_levels):
        if pz_hat[j] <= 0.0:
            continue
        mask = sample.zi == j
        increments = rule.probs[sample.xi[mask], sample.d[mask] - 1] * base[mask]
        groups[z] = project_mab(MonotoneStep(sample.support, sample.ys[mask], increments))
    pop = mixture([(groups[z], pz_hat[space.z_index[z]]) for z in groups])
    target = 0.0 if lam == 1.0 else t.value(pop)
    penalty = 0.0
    if lam > 0.0:
        penalty = max(s.value(groups[z], pop) for z in groups)
    return (1.0 - lam) * target - lam * penalty
