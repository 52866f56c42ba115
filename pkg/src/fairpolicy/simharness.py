"""Monte Carlo replication engine for the closed-form example.

For each (sample size, assignment mechanism) cell and each replication, draw
a fresh training sample, fit the plug-in array, maximize the empirical
objective for every grid lambda, and score the fitted rule's regret against
the analytic oracle: true maximum value minus the true objective at the
estimated rule.  Regret is computed against the closed forms, not a plug-in
estimate of the maximum, because the example makes the population objective
exact.

Replication RNG streams derive from (seed, cell index, replication index),
so runs are deterministic and replications could execute in any order (or in
parallel) without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .estimation import fit_plugin
from .functionals import SimilarityMeasure, TargetFunctional
from .objective import omega
from .optimizer import OptimizerConfig, maximize
from .selection import LambdaGrid, _per_lambda_seed
from .toy import MECHANISMS, ToyParams, toy_max_value, toy_objective, toy_sample, toy_space

_MASK64 = (1 << 64) - 1

GINI = TargetFunctional("gini-welfare")
KS = SimilarityMeasure("ks")


@dataclass(frozen=True)
class SimConfig:
    sample_sizes: tuple[int, ...]
    mechanisms: tuple[str, ...]
    grid: LambdaGrid
    replications: int
    p: float
    seed: int
    optimizer: OptimizerConfig

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        if not self.sample_sizes or any(n < 1 for n in self.sample_sizes):
            raise ValueError("sample_sizes must be positive")
        if not self.mechanisms or any(m not in MECHANISMS for m in self.mechanisms):
            raise ValueError(f"mechanisms must be among {MECHANISMS}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.5 < self.p < 1.0:
            raise ValueError(f"p must lie in (1/2, 1), got {self.p!r}")


@dataclass(frozen=True)
class SimRow:
    """One replication's result at one (n, mechanism, lambda)."""

    n: int
    mechanism: str
    lam: float
    replication: int
    delta_hat: float
    emp_value: float
    regret: float


@dataclass(frozen=True)
class CellAggregate:
    """Mean / standard deviation / median of a metric within one cell."""

    mean: float
    sd: float
    median: float


@dataclass(frozen=True, eq=False)
class SimResult:
    config: SimConfig
    rows: tuple[SimRow, ...]

    def cell_rows(self, n: int, mechanism: str, lam: float) -> list[SimRow]:
        return [
            r for r in self.rows
            if r.n == n and r.mechanism == mechanism and r.lam == lam
        ]

    def aggregates(self) -> dict:
        """Per (n, mechanism, lambda): CellAggregates of regret, delta_hat, emp_value."""
        out = {}
        for n in self.config.sample_sizes:
            for mech in self.config.mechanisms:
                for lam in self.config.grid:
                    rows = self.cell_rows(n, mech, lam)
                    out[(n, mech, lam)] = {
                        name: _aggregate([getattr(r, name) for r in rows])
                        for name in ("regret", "delta_hat", "emp_value")
                    }
        return out

    def mean_regret(self, n: int, mechanism: str, lam: float) -> float:
        return _aggregate([r.regret for r in self.cell_rows(n, mechanism, lam)]).mean


def _aggregate(values) -> CellAggregate:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return CellAggregate(mean=float(arr.mean()), sd=sd, median=float(np.median(arr)))


def regret_toy(delta_hat: float, lam: float, p: float) -> float:
    """True-maximum value minus the true objective at the estimated rule.

    Nonnegative by construction; float residue within -1e-9 is clamped to 0.
    """
    value = toy_max_value(ToyParams(p, lam)) - toy_objective(delta_hat, ToyParams(p, lam))
    if -1e-9 <= value < 0.0:
        return 0.0
    return value


def _replication_seed(seed: int, cell: int, rep: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=(2, cell, rep))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_simulation(cfg: SimConfig) -> SimResult:
    """Replicate sample -> fit -> per-lambda maximize -> oracle regret."""
    space = toy_space()
    rows = []
    cells = [(n, mech) for n in cfg.sample_sizes for mech in cfg.mechanisms]
    for cell_idx, (n, mech) in enumerate(cells):
        for rep in range(cfg.replications):
            sample = toy_sample(n, cfg.p, mech, _replication_seed(cfg.seed, cell_idx, rep))
            arr = fit_plugin(sample)
            for lam_idx, lam in enumerate(cfg.grid):
                opt_cfg = replace(
                    cfg.optimizer,
                    seed=_per_lambda_seed(_replication_seed(cfg.seed, cell_idx, rep), lam_idx),
                )
                result = maximize(lambda rule: omega(rule, arr, lam, GINI, KS), space, opt_cfg)
                delta_hat = float(result.rule.probs[0, 0])
                rows.append(
                    SimRow(
                        n=n,
                        mechanism=mech,
                        lam=lam,
                        replication=rep,
                        delta_hat=delta_hat,
                        emp_value=result.value,
                        regret=regret_toy(delta_hat, lam, cfg.p),
                    )
                )
    return SimResult(config=cfg, rows=tuple(rows))
