"""Shared builders and independent numerical oracles for the test suite."""

import numpy as np

from pathfair.kernels import SolverState, utility
from pathfair.model import (
    Commodity,
    PathSet,
    build_instance,
    build_topology,
    commodity_sums,
    edge_loads,
)


def make_instance(edges, commodities):
    """Build an Instance from (src, dst, cap, weight[, undirected]) edge rows
    and (src, dst, demand, [paths-as-edge-id-tuples]) commodity rows."""
    topo = build_topology(edges)
    coms = [Commodity(s, d, dem) for s, d, dem, _ in commodities]
    ps = PathSet.from_lists([paths for _, _, _, paths in commodities])
    return build_instance(topo, coms, ps)


def single_bottleneck(cap=10.0, demand=20.0):
    return make_instance(
        [("A", "B", cap, 1)],
        [("A", "B", demand, [(0,)])],
    )


def shared_edge(n=2, cap=10.0, demand=20.0):
    """n single-path commodities funneled through one capacity-cap edge."""
    edges = [(f"s{i}", "M", 10 * n * max(cap, demand), 1) for i in range(n)]
    edges.append(("M", "T", cap, 1))
    coms = [(f"s{i}", "T", demand, [(i, n)]) for i in range(n)]
    return make_instance(edges, coms)


def chain(demand=100.0):
    """Two edges in series, commodities over each edge and over both."""
    return make_instance(
        [("A", "B", 10, 1), ("B", "C", 5, 1)],
        [
            ("A", "B", demand, [(0,)]),
            ("A", "C", demand, [(0, 1)]),
            ("B", "C", demand, [(1,)]),
        ],
    )


def diamond(demand=20.0, cap_top=4.0, cap_bottom=8.0):
    """One commodity with two disjoint two-hop paths."""
    return make_instance(
        [
            ("A", "T", cap_top, 1),
            ("T", "B", cap_top, 1),
            ("A", "U", cap_bottom, 1),
            ("U", "B", cap_bottom, 1),
        ],
        [("A", "B", demand, [(0, 1), (2, 3)])],
    )


def random_state(instance, rng, beta=1.0, alpha=0, rate_scale=5.0, dual_scale=1.0,
                 nonneg_floor=False):
    """SolverState with random non-negative arrays.

    dual_nonneg stays zero unless nonneg_floor is set, because the
    non-negativity force has a frozen activity test that the stationarity
    oracle can only evaluate cleanly away from its switching surface.
    """
    x = rng.uniform(0.0, rate_scale, instance.num_paths)
    dn = np.zeros(instance.num_paths)
    if nonneg_floor:
        dn = rng.uniform(0.0, dual_scale, instance.num_paths)
    return SolverState(
        x=x,
        y=rng.uniform(0.0, rate_scale, instance.num_pairs),
        dual_demand=rng.uniform(0.0, dual_scale, instance.num_commodities),
        dual_capacity=rng.uniform(0.0, dual_scale, instance.num_edges),
        dual_consensus=rng.uniform(0.0, dual_scale, instance.num_pairs),
        dual_nonneg=dn,
        slack_demand=rng.uniform(0.0, dual_scale, instance.num_commodities),
        slack_capacity=rng.uniform(0.0, dual_scale, instance.num_edges),
        beta=beta,
        alpha=alpha,
        iteration=0,
    )


def bisect_root(w_sum, beta, q, alpha, tol=1e-12):
    """Pure-bisection root of (1+W)S - (W/beta)S^(-alpha) - Q = 0 on
    (0, inf); independent of the production Newton path."""
    lin = 1.0 + w_sum
    c = w_sum / beta

    def f(s):
        return lin * s - c * s ** (-float(alpha)) - q if alpha else lin * s - c - q

    lo, hi = 1e-300, max(1.0, q / lin)
    while f(hi) < 0.0:
        hi *= 2.0
    for _ in range(20000):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _relu(v):
    return np.maximum(v, 0.0)


def rate_block_objective(instance, state, x, alpha):
    """The x-block objective the rate update minimizes, with the slack
    variables optimized out: exact utility, one-sided demand and
    non-negativity penalties, and consensus quadratics. Scaled by beta so
    the utility term carries 1/beta."""
    x = np.asarray(x, np.float64)
    sums = commodity_sums(instance, x)
    val = -np.sum(utility(sums, alpha)) / state.beta
    val += 0.5 * np.sum(_relu(sums - (instance.demand - state.dual_demand)) ** 2)
    diff = x[instance.pair_path] - state.y + state.dual_consensus
    val += 0.5 * np.sum(diff ** 2)
    val += 0.5 * np.sum(_relu(state.dual_nonneg - x) ** 2)
    return float(val)


def suggestion_block_objective(instance, state, y):
    """The y-block objective the suggestion update minimizes: one-sided
    capacity pressure plus consensus pull toward x + dual_consensus."""
    y = np.asarray(y, np.float64)
    loads = np.zeros(instance.num_edges)
    np.add.at(loads, instance.pair_edge, y)
    val = 0.5 * np.sum(_relu(state.dual_capacity + loads - instance.capacity) ** 2)
    target = state.x[instance.pair_path] + state.dual_consensus
    val += 0.5 * np.sum((y - target) ** 2)
    return float(val)


def feasible(instance, rates, tol=1e-9):
    sums = commodity_sums(instance, rates)
    loads = edge_loads(instance, rates)
    return (
        np.all(rates >= -tol)
        and np.all(sums <= instance.demand + tol)
        and np.all(loads <= instance.capacity + tol)
    )
