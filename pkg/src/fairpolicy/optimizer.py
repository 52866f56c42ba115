"""Derivative-free maximization of rule-valued objectives over products of simplices.

Each covariate row of a decision rule is reparametrized through a softmax map
from K-1 unconstrained coordinates (last coordinate pinned at 0), so every
probe the search makes is a feasible rule; no barrier tuning is needed.
Nelder-Mead (classical coefficients, initial simplex edge 0.5) runs jointly
over all rows while the unconstrained dimension is at most 40, and in cyclic
block-coordinate sweeps over rows above that.

The search starts from the best of `candidate_starts` rules drawn uniformly
from the product of simplices; independent restarts use RNG streams derived
from (seed, restart index), so results are deterministic and restart sets are
prefix-monotone.  The achieved optimization accuracy is best-effort: the true
supremum is unknown, and `converged` only reports the internal ftol
criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .objective import CovariateSpace, DecisionRule

_JOINT_DIM_LIMIT = 40
_INITIAL_EDGE = 0.5
_MAX_BLOCK_SWEEPS = 1000
_MAX_POLISH_ROUNDS = 30
_PROB_FLOOR = 1e-12  # for mapping simplex points back to unconstrained coords
_MASK64 = (1 << 64) - 1


class NonFiniteObjective(ValueError):
    """The objective returned NaN or infinity at a feasible rule."""


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 1
    candidate_starts: int = 50
    max_iters: int = 500
    ftol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.candidate_starts < 1 or self.max_iters < 1:
            raise ValueError("restarts, candidate_starts, and max_iters must be >= 1")
        if not self.ftol > 0:
            raise ValueError("ftol must be positive")


@dataclass(frozen=True, eq=False)
class OptimResult:
    rule: DecisionRule
    value: float
    evaluations: int
    converged: bool


def random_rule(space: CovariateSpace, rng: np.random.Generator) -> DecisionRule:
    """Rule with every row drawn uniformly on the simplex.

    Dirichlet(1, ..., 1) via the exponential-spacings construction: K standard
    exponentials normalized by their sum.
    """
    rows = rng.standard_exponential((len(space.x_levels), space.k))
    rows /= rows.sum(axis=1, keepdims=True)
    return DecisionRule(space, rows)


def _softmax_rows(u: np.ndarray) -> np.ndarray:
    """Map (|X|, K-1) unconstrained coords to simplex rows, last logit pinned at 0."""
    logits = np.concatenate([u, np.zeros((u.shape[0], 1))], axis=1)
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def _to_unconstrained(probs: np.ndarray) -> np.ndarray:
    """Inverse of _softmax_rows up to the probability floor."""
    p = np.maximum(probs, _PROB_FLOOR)
    return np.log(p[:, :-1]) - np.log(p[:, -1:])


class _CountingObjective:
    def __init__(self, obj, space):
        self.obj = obj
        self.space = space
        self.evaluations = 0

    def at_rule(self, rule: DecisionRule) -> float:
        self.evaluations += 1
        value = float(self.obj(rule))
        if not np.isfinite(value):
            raise NonFiniteObjective(f"objective returned {value!r}")
        return value

    def at_u(self, u: np.ndarray) -> float:
        return self.at_rule(DecisionRule(self.space, _softmax_rows(u)))


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    dim = x0.size
    sim = np.tile(x0, (dim + 1, 1))
    for i in range(dim):
        sim[i + 1, i] += _INITIAL_EDGE
    return sim


def _nelder_mead(fun, x0: np.ndarray, max_iters: int, ftol: float):
    res = minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": max_iters,
            "maxfev": 4 * max_iters,  # scipy's default (200 * dim) can bind first
            "fatol": ftol,
            "xatol": 1e-6,
            "initial_simplex": _initial_simplex(x0),
            "adaptive": False,
        },
    )
    return res.x, bool(res.success)


def _maximize_from(counting: _CountingObjective, u0: np.ndarray, cfg: OptimizerConfig):
    """Nelder-Mead ascent from u0; joint when small, block sweeps otherwise.

    The joint search reruns NM from its own endpoint with a fresh initial
    simplex until a round stops improving by more than ftol; a collapsed
    simplex (frequent on kinked objectives) is thereby re-expanded.
    """
    nx, dims = u0.shape

    if nx * dims <= _JOINT_DIM_LIMIT:
        def neg(flat_u):
            return -counting.at_u(flat_u.reshape(nx, dims))

        x = u0.ravel().copy()
        best = -np.inf
        converged = False
        for _ in range(_MAX_POLISH_ROUNDS):
            x, converged = _nelder_mead(neg, x, cfg.max_iters, cfg.ftol)
            value = -neg(x)
            if value - best <= cfg.ftol:
                best = max(best, value)
                break
            best = value
        u = x.reshape(nx, dims)
        return u, best, converged

    u = u0.copy()
    best = counting.at_u(u)
    converged = False
    for _ in range(_MAX_BLOCK_SWEEPS):
        sweep_start = best
        block_converged = True
        for row in range(nx):
            def neg_row(block, row=row):
                trial = u.copy()
                trial[row] = block
                return -counting.at_u(trial)

            x, ok = _nelder_mead(neg_row, u[row].copy(), cfg.max_iters, cfg.ftol)
            block_converged &= ok
            trial = u.copy()
            trial[row] = x
            value = counting.at_u(trial)
            if value > best:
                u, best = trial, value
        if best - sweep_start <= cfg.ftol:
            converged = block_converged
            break
    return u, best, converged


def maximize(obj, space: CovariateSpace, cfg: OptimizerConfig) -> OptimResult:
    """Best-effort maximizer of obj over all decision rules on the space.

    obj must return a finite float for every feasible rule.  Deterministic
    given cfg.seed; restarts with a common seed are prefix-monotone in the
    achieved value.  Ties across restarts go to the lowest restart index.
    """
    counting = _CountingObjective(obj, space)
    best_rule = None
    best_value = -np.inf
    best_converged = False
    for restart in range(cfg.restarts):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed & _MASK64, spawn_key=(restart,))
        )
        start_rule = None
        start_value = -np.inf
        for _ in range(cfg.candidate_starts):
            cand = random_rule(space, rng)
            value = counting.at_rule(cand)
            if value > start_value:
                start_rule, start_value = cand, value
        u0 = _to_unconstrained(start_rule.probs)
        u, value, converged = _maximize_from(counting, u0, cfg)
        if value >= start_value:
            restart_rule, restart_value = DecisionRule(space, _softmax_rows(u)), value
        else:
            # softmax round-trip of the start lost more than the search gained
            restart_rule, restart_value = start_rule, start_value
        if restart_value > best_value:
            best_rule, best_value = restart_rule, restart_value
            best_converged = converged
    value = counting.at_rule(best_rule)
    return OptimResult(
        rule=best_rule, value=value, evaluations=counting.evaluations, converged=best_converged
    )
