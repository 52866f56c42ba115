"""Target functionals and similarity measures on step CDFs.

The targets shipped here are Gini-welfare (mean minus half the mean absolute
difference, all divided by 2), the mean, and quantiles.  Gini-welfare and the
mean are 1-Lipschitz w.r.t. the sup-norm on [0, 1] supports (general supports
scale the constant by b - a); quantiles carry no such certification and are
excluded from the Lipschitz audit.

Similarity measures map pairs of CDFs to [0, inf) and vanish on identical
pairs: two-sided and one-sided Kolmogorov-Smirnov distances, and the absolute
difference of a target functional.

Each functional also evaluates directly on a (grid, cdf-values) pair; the
objective module's hot loop uses that form.  Both forms compute the same
sums over the same atoms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import StepCdf, ks_distance, one_sided_ks, _require_same_support


class InvalidTau(ValueError):
    """Quantile level outside (0, 1)."""


def mean(f: StepCdf) -> float:
    """First moment: sum of point * mass."""
    return float(np.dot(f.points, f.masses))


def _grid_masses(values: np.ndarray) -> np.ndarray:
    return np.diff(values, prepend=0.0)


def _mean_on_grid(grid: np.ndarray, values: np.ndarray) -> float:
    return float(np.dot(_grid_masses(values), grid))


def _mad_half_atoms(points: np.ndarray, masses: np.ndarray) -> float:
    # 1/2 sum_ij m_i m_j |x_i - x_j| via sorted prefix sums: points are sorted,
    # so the double sum collapses to sum_j m_j (x_j M_{<j} - S_{<j}).
    cm = np.cumsum(masses)
    cmx = np.cumsum(masses * points)
    m_below = cm - masses
    s_below = cmx - masses * points
    return float(np.dot(masses, points * m_below - s_below))


def mad_half(f: StepCdf) -> float:
    """Half the mean absolute difference: 1/2 integral integral |x-y| dF dF."""
    return _mad_half_atoms(f.points, f.masses)


def mad_half_naive(f: StepCdf) -> float:
    """O(n^2) double sum; reference oracle for mad_half."""
    diff = np.abs(f.points[:, None] - f.points[None, :])
    return 0.5 * float(f.masses @ diff @ f.masses)


def _mad_half_on_grid(grid: np.ndarray, values: np.ndarray) -> float:
    return _mad_half_atoms(grid, _grid_masses(values))


def gini_welfare(f: StepCdf) -> float:
    """(mean - mad_half) / 2; the welfare measure normalized to be 1-Lipschitz on [0,1]."""
    return (mean(f) - mad_half(f)) / 2.0


def quantile(f: StepCdf, tau: float) -> float:
    """Generalized inverse inf{y : F(y) >= tau}."""
    if not 0.0 < tau < 1.0:
        raise InvalidTau(f"tau must lie in (0, 1), got {tau!r}")
    return f.quantile(tau)


def _quantile_on_grid(grid: np.ndarray, values: np.ndarray, tau: float) -> float:
    idx = min(int(np.searchsorted(values, tau, side="left")), grid.size - 1)
    return float(grid[idx])


@dataclass(frozen=True)
class TargetFunctional:
    """Real-valued functional of a CDF: 'gini-welfare', 'mean', or 'quantile'."""

    kind: str
    tau: float | None = None

    KINDS = ("gini-welfare", "mean", "quantile")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown target functional {self.kind!r}")
        if self.kind == "quantile":
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise InvalidTau(f"quantile target needs tau in (0, 1), got {self.tau!r}")
        elif self.tau is not None:
            raise ValueError(f"{self.kind!r} takes no tau")

    def value(self, f: StepCdf) -> float:
        if self.kind == "gini-welfare":
            return gini_welfare(f)
        if self.kind == "mean":
            return mean(f)
        return quantile(f, self.tau)

    __call__ = value

    def value_on_grid(self, grid: np.ndarray, values: np.ndarray) -> float:
        if self.kind == "gini-welfare":
            return (_mean_on_grid(grid, values) - _mad_half_on_grid(grid, values)) / 2.0
        if self.kind == "mean":
            return _mean_on_grid(grid, values)
        return _quantile_on_grid(grid, values, self.tau)

    def lipschitz_constant(self, support) -> float | None:
        """Certified sup-norm Lipschitz constant, or None (quantile: not certified)."""
        if self.kind == "quantile":
            return None
        return support.width

    @classmethod
    def parse(cls, text: str) -> "TargetFunctional":
        """Parse 'gini-welfare', 'mean', or 'quantile:TAU'."""
        if text.startswith("quantile:"):
            return cls("quantile", tau=float(text.split(":", 1)[1]))
        return cls(text)


@dataclass(frozen=True)
class SimilarityMeasure:
    """Nonnegative dissimilarity of two CDFs; zero on identical pairs."""

    kind: str
    inner: TargetFunctional | None = None

    KINDS = ("ks", "one-sided-ks", "abs-target-diff")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown similarity measure {self.kind!r}")
        if self.kind == "abs-target-diff":
            if self.inner is None:
                raise ValueError("abs-target-diff needs an inner target functional")
        elif self.inner is not None:
            raise ValueError(f"{self.kind!r} takes no inner functional")

    def value(self, f: StepCdf, g: StepCdf) -> float:
        if self.kind == "ks":
            return ks_distance(f, g)
        if self.kind == "one-sided-ks":
            return one_sided_ks(f, g)
        _require_same_support(f, g)
        return abs(self.inner.value(f) - self.inner.value(g))

    __call__ = value

    def value_on_grid(self, grid: np.ndarray, vf: np.ndarray, vg: np.ndarray) -> float:
        # Both CDFs jump only at grid points, so the sup over the line is the
        # max over grid values (left limits are the previous grid values).
        if self.kind == "ks":
            return float(np.abs(vf - vg).max())
        if self.kind == "one-sided-ks":
            return float(max((vf - vg).max(), 0.0))
        return abs(
            self.inner.value_on_grid(grid, vf) - self.inner.value_on_grid(grid, vg)
        )

    @classmethod
    def parse(cls, text: str) -> "SimilarityMeasure":
        """Parse 'ks', 'one-sided-ks', or 'abs-target-diff:TARGET'."""
        if text.startswith("abs-target-diff:"):
            return cls("abs-target-diff", inner=TargetFunctional.parse(text.split(":", 1)[1]))
        return cls(text)


def similarity(s: SimilarityMeasure, f: StepCdf, g: StepCdf) -> float:
    """Dispatch s on a pair of CDFs with a shared support."""
    return s.value(f, g)
