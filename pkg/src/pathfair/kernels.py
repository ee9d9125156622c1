"""Closed-form iterate computations for one solver step.

Each operation is a pure function from (state, instance) to new arrays:
dual updates, slack updates, per-edge rate suggestions, the per-commodity
sum equation, and the rate update. Heavy loops run in numba prange kernels
where every output element is owned by exactly one segment, so results are
bit-identical across thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .model import commodity_sums, edge_loads_from_pairs


class KernelError(RuntimeError):
    """Non-finite coefficients or roots during an iterate computation."""


@dataclass
class SolverState:
    """Mutable iterate arrays plus the scalar knobs the controller drives.

    Array index spaces match the Instance: x per path, y and
    dual_consensus per consensus pair, dual_demand and slack_demand per
    commodity, dual_capacity and slack_capacity per edge, dual_nonneg per
    path.
    """

    x: np.ndarray
    y: np.ndarray
    dual_demand: np.ndarray
    dual_capacity: np.ndarray
    dual_consensus: np.ndarray
    dual_nonneg: np.ndarray
    slack_demand: np.ndarray
    slack_capacity: np.ndarray
    beta: float
    alpha: int
    iteration: int


def utility(sums, alpha):
    """Fairness utility of a commodity sum: S - 1 at alpha=0, log S at
    alpha=1, (S^(1-alpha) - 1)/(1-alpha) otherwise.

    Extended-value convention: -inf for S <= 0 when alpha >= 1. Accepts
    scalars or arrays.
    """
    arr = np.asarray(sums, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if alpha == 0:
        out = arr - 1.0
    else:
        out = np.full(arr.shape, -np.inf)
        pos = arr > 0
        if alpha == 1:
            out[pos] = np.log(arr[pos])
        else:
            out[pos] = (arr[pos] ** (1.0 - alpha) - 1.0) / (1.0 - alpha)
    return float(out[0]) if scalar else out


@njit(parallel=True, cache=True)
def _k_dual_consensus(dual_con, x, pair_path, y, out):
    for p in prange(dual_con.shape[0]):
        v = dual_con[p] + x[pair_path[p]] - y[p]
        out[p] = v if v > 0.0 else 0.0


@njit(parallel=True, cache=True)
def _k_suggest(x, dual_con, dual_cap, capacity, pair_path, edge_pairs,
               edge_pair_ptr, edge_path_count, out_y):
    # Per edge: the quadratic block in y (capacity slack minimized out,
    # leaving a one-sided penalty) is minimized by shifting every pair's
    # target (x + dual_con) down by one shared adjustment, then clamping
    # at zero. The adjustment itself clamps at zero so an uncongested edge
    # exerts no pull on its paths. Each pair belongs to exactly one edge,
    # so out_y is written once, deterministically.
    for e in prange(edge_pair_ptr.shape[0] - 1):
        lo = edge_pair_ptr[e]
        hi = edge_pair_ptr[e + 1]
        if hi == lo:
            continue
        total = 0.0
        for t in range(lo, hi):
            pr = edge_pairs[t]
            total += x[pair_path[pr]] + dual_con[pr]
        adjust = (total + dual_cap[e] - capacity[e]) / (edge_path_count[e] + 1.0)
        if adjust < 0.0:
            adjust = 0.0
        for t in range(lo, hi):
            pr = edge_pairs[t]
            v = x[pair_path[pr]] + dual_con[pr] - adjust
            out_y[pr] = v if v > 0.0 else 0.0


@njit(parallel=True, cache=True)
def _k_path_coeffs(y, dual_con, x_prev, dual_nonneg, hops, pair_ptr,
                   out_k, out_w):
    # The non-negativity force only acts on paths currently below their
    # dual floor; elsewhere it would shrink healthy rates toward zero.
    # Freezing that activity test on the pre-update rates keeps the rate
    # update an exact quadratic minimization.
    for p in prange(pair_ptr.shape[0] - 1):
        acc = 0.0
        for t in range(pair_ptr[p], pair_ptr[p + 1]):
            acc += y[t] - dual_con[t]
        if x_prev[p] < dual_nonneg[p]:
            out_k[p] = acc + dual_nonneg[p]
            out_w[p] = 1.0 / (hops[p] + 1.0)
        else:
            out_k[p] = acc
            out_w[p] = 1.0 / hops[p]


@njit(parallel=True, cache=True)
def _k_com_coeffs(path_k, path_w, com_path_ptr, out_w, out_q):
    for c in prange(com_path_ptr.shape[0] - 1):
        w_sum = 0.0
        qw = 0.0
        for p in range(com_path_ptr[c], com_path_ptr[c + 1]):
            w_sum += path_w[p]
            qw += path_w[p] * path_k[p]
        out_w[c] = w_sum
        out_q[c] = qw


@njit(cache=True)
def _root_scalar(lin, c, q, alpha):
    # Root of f(S) = lin * S - c * S^(-alpha) - Q with lin > 0 and c > 0.
    # f is increasing, and concave for alpha >= 2, so safeguarded Newton
    # with a sign bracket always lands.
    if alpha == 0:
        return (q + c) / lin
    if alpha == 1:
        disc = q * q + 4.0 * lin * c
        sq = np.sqrt(disc)
        if q >= 0.0:
            return (q + sq) / (2.0 * lin)
        return (2.0 * c) / (sq - q)
    a = float(alpha)
    tol_f = 1e-10 * max(1.0, abs(q))
    lo = 1e-12
    hi = q / lin
    if hi < 1.0:
        hi = 1.0
    f_hi = lin * hi - c * hi ** (-a) - q
    while f_hi < 0.0:
        hi *= 2.0
        f_hi = lin * hi - c * hi ** (-a) - q
    s = hi
    for _ in range(200):
        f = lin * s - c * s ** (-a) - q
        if f >= 0.0:
            hi = s
        else:
            lo = s
        fp = lin + a * c * s ** (-a - 1.0)
        t = s - f / fp
        if not (lo < t < hi):
            t = 0.5 * (lo + hi)
        # Stop on both a small residual and a small step; the residual
        # alone does not pin the root tightly enough when |Q| is large.
        if abs(f) <= tol_f and abs(t - s) <= 1e-12 * max(1.0, abs(s)):
            return s
        s = t
    return s


@njit(parallel=True, cache=True)
def _k_roots(w_sum, q_base, d_eff, beta, alpha, out_s):
    # Demand pressure is one-sided: first solve the sum equation with no
    # demand term, and accept that root when it leaves the commodity at or
    # below its effective demand. Otherwise the demand force is engaged and
    # the full equation applies. The crossover is continuous, so the rate
    # update can rebuild the same branch from the returned sum alone.
    for c in prange(w_sum.shape[0]):
        w = w_sum[c]
        cc = w / beta
        s = _root_scalar(1.0, cc, q_base[c], alpha)
        if s > d_eff[c]:
            s = _root_scalar(1.0 + w, cc, q_base[c] + w * d_eff[c], alpha)
        out_s[c] = s


@njit(parallel=True, cache=True)
def _k_rates(path_k, path_w, com_term, path_com, out_x):
    for p in prange(path_k.shape[0]):
        out_x[p] = path_w[p] * (path_k[p] + com_term[path_com[p]])


def solve_sum_equation(w_sum, beta, q, alpha):
    """Scalar commodity-sum root of (1+W) S - (W/beta) S^(-alpha) - Q = 0:
    closed form at alpha 0 and 1, safeguarded Newton-bisection on
    [1e-12, hi] above that."""
    w = float(w_sum)
    return float(_root_scalar(1.0 + w, w / float(beta), float(q), int(alpha)))


def update_duals(state, instance):
    """One unit-step dual ascent on all four families, from the previous
    iteration's x and y. Returns (demand, capacity, consensus, nonneg)."""
    sums = commodity_sums(instance, state.x)
    loads = edge_loads_from_pairs(instance, state.y)
    dd = np.maximum(state.dual_demand + (sums - instance.demand), 0.0)
    dc = np.maximum(state.dual_capacity + (loads - instance.capacity), 0.0)
    dcon = np.empty_like(state.dual_consensus)
    _k_dual_consensus(state.dual_consensus, state.x, instance.pair_path, state.y, dcon)
    dn = np.maximum(state.dual_nonneg - state.x, 0.0)
    return dd, dc, dcon, dn


def update_slacks(state, instance):
    """Slack values absorbing the current inequality gaps, computed from
    the same pre-iteration snapshot as update_duals.

    The rate and suggestion updates minimize over the slacks analytically,
    so these arrays are bookkeeping: they track how far each commodity sits
    below its demand and each edge below its capacity, shifted by the
    scaled dual, and are reported in the state for inspection.
    """
    sums = commodity_sums(instance, state.x)
    loads = edge_loads_from_pairs(instance, state.y)
    sd = np.maximum(state.dual_demand / state.beta + (instance.demand - sums), 0.0)
    sc = np.maximum(state.dual_capacity / state.beta + (instance.capacity - loads), 0.0)
    return sd, sc


def update_rate_suggestions(state, instance):
    """Per-edge suggested rates y.

    For each edge the quadratic block in y (one-sided capacity pressure
    plus consensus pressure) has a closed-form minimizer: every pair's
    target x + dual_consensus shifted down by one shared per-edge
    adjustment max(0, (total + dual_capacity - capacity) / (n_e + 1)),
    then clamped non-negative. Reads the current x and the
    already-advanced duals.
    """
    out = np.empty(instance.num_pairs)
    _k_suggest(
        state.x, state.dual_consensus, state.dual_capacity,
        instance.capacity, instance.pair_path, instance.edge_pairs,
        instance.edge_pair_ptr, instance.edge_path_count.astype(np.float64),
        out,
    )
    return out


def _coefficients(state, instance):
    path_k = np.empty(instance.num_paths)
    path_w = np.empty(instance.num_paths)
    _k_path_coeffs(state.y, state.dual_consensus, state.x, state.dual_nonneg,
                   instance.hops.astype(np.float64), instance.pair_ptr,
                   path_k, path_w)
    w_sum = np.empty(instance.num_commodities)
    q = np.empty(instance.num_commodities)
    _k_com_coeffs(path_k, path_w, instance.com_path_ptr, w_sum, q)
    return path_k, path_w, w_sum, q


def solve_commodity_sums(state, instance, alpha):
    """Per-commodity sums from the summed stationarity equation."""
    _, _, w_sum, q = _coefficients(state, instance)
    bad = ~(np.isfinite(w_sum) & np.isfinite(q))
    if bad.any():
        c = int(np.flatnonzero(bad)[0])
        com = instance.commodities[c]
        raise KernelError(f"non-finite sum coefficients for commodity {com.key}")
    d_eff = instance.demand - state.dual_demand
    out = np.empty(instance.num_commodities)
    _k_roots(w_sum, q, d_eff, float(state.beta), int(alpha), out)
    if not np.all(np.isfinite(out)):
        c = int(np.flatnonzero(~np.isfinite(out))[0])
        com = instance.commodities[c]
        raise KernelError(f"non-finite sum root for commodity {com.key}")
    return out


def update_rates(state, instance, sums, alpha):
    """Closed-form rate update; by construction the new rates of each
    commodity add up to its solved sum."""
    path_k, path_w, _, _ = _coefficients(state, instance)
    gain = sums ** (-float(alpha)) / state.beta if alpha else np.ones_like(sums) / state.beta
    # One-sided demand pressure, continuous at the crossover, matching the
    # branch the sum solve selected.
    over = np.maximum(sums - (instance.demand - state.dual_demand), 0.0)
    com_term = gain - over
    out = np.empty(instance.num_paths)
    _k_rates(path_k, path_w, com_term, instance.path_com, out)
    return out
