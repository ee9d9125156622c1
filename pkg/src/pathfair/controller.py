"""Outer solve loop.

Drives the kernel iterates: residual tracking, learning-rate adaptation by
residual balancing, fairness continuation with the stagnation stop that
certifies max-min, and per-iteration trace capture. Always returns a
projected, feasible allocation.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._reduce import det_diff_norm
from .kernels import SolverState
from .model import InputError, commodity_sums, validate_allocation
from .oracles import default_theta, optimality_from_sums
from .projection import project


class SolverError(RuntimeError):
    """Iterates went non-finite."""


@dataclass
class SolverConfig:
    """Loop knobs.

    alpha_target=None means "continue incrementing alpha until the
    stagnation rule fires", which certifies max-min fairness. adapt turns
    residual balancing off for ablations. reference_sums, when given,
    adds a post-projection optimality column to traces.
    """

    alpha_target: int | None = None
    gamma: float = 1e-3
    beta0: float = 1.0
    residual_ratio: float = 10.0
    beta_scale: float = 2.0
    max_iterations: int = 5000
    beta_min: float = 1e-6
    beta_max: float = 1e6
    adapt: bool = True
    trace: bool = False
    reference_sums: np.ndarray | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError("gamma must be > 0")
        if self.residual_ratio <= 1 or self.beta_scale <= 1:
            raise InputError("residual_ratio and beta_scale must be > 1")
        if not 0 < self.beta_min <= self.beta_max:
            raise InputError("beta bounds must satisfy 0 < beta_min <= beta_max")
        if self.alpha_target is not None and self.alpha_target < 0:
            raise InputError("alpha_target must be >= 0")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Residuals:
    """s tracks rate change, r tracks dual change (both Euclidean, all four
    dual families concatenated). The letters follow the balancing rule's
    convention, which is inverted from the usual ADMM naming."""

    s: float
    r: float


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    alpha: int
    beta: float
    s: float
    r: float
    objective: float
    pct_violated: float
    mean_relative_violation: float
    optimality: float | None


@dataclass(frozen=True)
class SolveResult:
    rates: np.ndarray
    sums: np.ndarray
    iterations: int
    alpha: int
    converged: bool
    runtime_s: float
    trace: tuple[IterationTrace, ...] | None


def initialize_state(instance, config, warm_start=None):
    """Cold start spreads each demand uniformly over its paths; a warm
    start takes the given rates verbatim (y mirrors x either way) and, for
    a finite alpha target, resumes directly at that alpha since the warm
    rates already climbed the continuation ladder."""
    n_paths = instance.num_paths
    if warm_start is not None:
        x = np.ascontiguousarray(warm_start, np.float64)
        if x.shape != (n_paths,):
            raise InputError(f"warm start has {x.shape[0]} rates, expected {n_paths}")
        if not np.all(np.isfinite(x)):
            raise InputError("warm start contains non-finite rates")
        x = x.copy()
        alpha = config.alpha_target if config.alpha_target is not None else 0
    else:
        counts = np.diff(instance.com_path_ptr)
        x = (instance.demand / counts)[instance.path_com]
        alpha = 0
    return SolverState(
        x=x,
        y=x[instance.pair_path],
        dual_demand=np.zeros(instance.num_commodities),
        dual_capacity=np.zeros(instance.num_edges),
        dual_consensus=np.zeros(instance.num_pairs),
        dual_nonneg=np.zeros(n_paths),
        slack_demand=np.zeros(instance.num_commodities),
        slack_capacity=np.zeros(instance.num_edges),
        beta=config.beta0,
        alpha=int(alpha),
        iteration=0,
    )


def compute_residuals(prev_state, next_state):
    s = det_diff_norm(next_state.x, prev_state.x)
    r = float(np.sqrt(
        det_diff_norm(next_state.dual_demand, prev_state.dual_demand) ** 2
        + det_diff_norm(next_state.dual_capacity, prev_state.dual_capacity) ** 2
        + det_diff_norm(next_state.dual_consensus, prev_state.dual_consensus) ** 2
        + det_diff_norm(next_state.dual_nonneg, prev_state.dual_nonneg) ** 2
    ))
    return Residuals(s=s, r=r)


def adapt_beta(beta, residuals, config):
    """Residual balancing: inflate beta by the configured factor when the
    dual-change norm exceeds the ratio times the rate-change norm, deflate
    in the opposite case, clamped to the configured bounds."""
    if residuals.r > config.residual_ratio * residuals.s:
        beta = beta * config.beta_scale
    elif residuals.s > config.residual_ratio * residuals.r:
        beta = beta / config.beta_scale
    return float(min(max(beta, config.beta_min), config.beta_max))


def check_convergence(residuals, gamma):
    return residuals.r <= gamma and residuals.s <= gamma


def advance_alpha(state, config, converged_now, converged_immediately_after_increment):
    """Continuation decision after the convergence check.

    Stop when the finite target is reached, or when the first iteration
    after an increment already satisfies the threshold (no progress was
    needed at the new alpha, so none will be needed at any higher one).
    """
    if not converged_now:
        return "continue"
    if config.alpha_target is not None and state.alpha >= config.alpha_target:
        return "stop"
    if converged_immediately_after_increment:
        return "stop"
    return "increment"


def _trace_row(instance, state, res, sums, config):
    report = validate_allocation(instance, state.x)
    objective = float(np.sum(kernels.utility(np.maximum(sums, 1e-12), state.alpha)))
    optimality = None
    if config.reference_sums is not None:
        projected = project(instance, state.x, state.alpha)
        optimality = optimality_from_sums(
            commodity_sums(instance, projected),
            np.asarray(config.reference_sums, np.float64),
            default_theta(instance),
        )
    return IterationTrace(
        iteration=state.iteration,
        alpha=state.alpha,
        beta=state.beta,
        s=res.s,
        r=res.r,
        objective=objective,
        pct_violated=report.pct_violated,
        mean_relative_violation=report.mean_relative_violation,
        optimality=optimality,
    )


def solve(instance, config=None, warm_start=None):
    """Run the full loop and return a projected, feasible result.

    converged=False means the iteration cap was hit; the returned rates
    are still feasible (projection runs regardless).
    """
    config = config if config is not None else SolverConfig()
    t0 = time.perf_counter()
    state = initialize_state(instance, config, warm_start)
    traces = [] if config.trace else None

    if instance.num_paths == 0:
        return SolveResult(
            rates=np.zeros(0), sums=np.zeros(instance.num_commodities),
            iterations=0, alpha=state.alpha, converged=True,
            runtime_s=time.perf_counter() - t0,
            trace=tuple(traces) if traces is not None else None,
        )

    just_incremented = False
    stopped = False
    # Balancing decisions run on smoothed residuals with a cooldown after
    # each change. The instantaneous norms of an oscillatory transient
    # sweep through both trigger branches every rotation, and reacting to
    # them keeps re-exciting the very transient being measured.
    ema_s = ema_r = -1.0
    ema_w = 0.1
    cooldown = 0
    for it in range(1, config.max_iterations + 1):
        prev = copy.copy(state)  # shallow: kernels return fresh arrays
        dd, dc, dcon, dn = kernels.update_duals(state, instance)
        sd, sc = kernels.update_slacks(state, instance)
        state.dual_demand, state.dual_capacity = dd, dc
        state.dual_consensus, state.dual_nonneg = dcon, dn
        state.slack_demand, state.slack_capacity = sd, sc
        state.y = kernels.update_rate_suggestions(state, instance)
        sums = kernels.solve_commodity_sums(state, instance, state.alpha)
        state.x = kernels.update_rates(state, instance, sums, state.alpha)
        state.iteration = it

        res = compute_residuals(prev, state)
        if not (np.isfinite(res.s) and np.isfinite(res.r)):
            raise SolverError(f"non-finite iterates at iteration {it}")
        converged = check_convergence(res, config.gamma)
        if traces is not None:
            traces.append(_trace_row(instance, state, res, sums, config))

        decision = advance_alpha(state, config, converged, just_incremented)
        if config.adapt:
            if ema_s < 0.0:
                ema_s, ema_r = res.s, res.r
            else:
                ema_s += ema_w * (res.s - ema_s)
                ema_r += ema_w * (res.r - ema_r)
            if cooldown > 0:
                cooldown -= 1
            else:
                new_beta = adapt_beta(state.beta, Residuals(ema_s, ema_r), config)
                if new_beta != state.beta:
                    # The duals are scaled multipliers (true price = beta *
                    # dual), so rescale them to keep the prices continuous.
                    # Otherwise every beta change shifts the dual fixed point
                    # and restarts the transient it was reacting to.
                    f = state.beta / new_beta
                    state.dual_demand = state.dual_demand * f
                    state.dual_capacity = state.dual_capacity * f
                    state.dual_consensus = state.dual_consensus * f
                    state.dual_nonneg = state.dual_nonneg * f
                    state.beta = new_beta
                    cooldown = 10
        just_incremented = False
        if decision == "stop":
            stopped = True
            break
        if decision == "increment":
            state.alpha += 1
            just_incremented = True

    rates = project(instance, state.x, state.alpha)
    return SolveResult(
        rates=rates,
        sums=commodity_sums(instance, rates),
        iterations=state.iteration,
        alpha=state.alpha,
        converged=stopped,
        runtime_s=time.perf_counter() - t0,
        trace=tuple(traces) if traces is not None else None,
    )
