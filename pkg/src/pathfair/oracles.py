"""Reference allocations and evaluation metrics.

Progressive-filling baselines, an exhaustive grid oracle for tiny
instances, a proportional-fairness stationarity check, and the optimality
and drift-adjusted-optimality scores used to grade solver output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import utility
from .model import InputError, commodity_sums, edge_loads

# Relative threshold for "this edge or demand is exhausted" while filling.
_SAT = 1e-12


class OracleDomainError(ValueError):
    """The oracle cannot serve this instance (for example, multipath input
    to the single-path max-min reference)."""


@dataclass(frozen=True, eq=False)
class Allocation:
    """Per-path rates with derived per-commodity sums and a provenance label."""

    rates: np.ndarray
    sums: np.ndarray
    label: str = ""

    @classmethod
    def from_rates(cls, instance, rates, label=""):
        rates = np.ascontiguousarray(rates, np.float64)
        return cls(rates=rates, sums=commodity_sums(instance, rates), label=label)


@dataclass(frozen=True)
class MetricConfig:
    """theta floors the reference sums in optimality ratios; None derives
    it from the instance (1e-6 times the largest demand)."""

    theta: float | None = None

    def resolve_theta(self, instance):
        return self.theta if self.theta is not None else default_theta(instance)


def default_theta(instance):
    dmax = float(instance.demand.max()) if instance.num_commodities else 0.0
    return 1e-6 * (dmax if dmax > 0 else 1.0)


def exact_maxmin_singlepath(instance, label="maxmin-singlepath"):
    """Exact max-min fair allocation for single-path-per-commodity
    instances by progressive filling: raise every unfrozen commodity
    equally, freeze at demand or when the path hits a saturated edge."""
    counts = np.diff(instance.com_path_ptr)
    if np.any(counts != 1):
        raise OracleDomainError("max-min oracle requires exactly one path per commodity")
    n = instance.num_commodities
    x = np.zeros(instance.num_paths)
    frozen = np.zeros(n, dtype=bool)
    active_path = instance.com_path_ptr[:-1].astype(np.int64)  # the only path

    for _ in range(2 * (n + instance.num_edges) + 4):
        loads = edge_loads(instance, x)
        sums = commodity_sums(instance, x)
        headroom = instance.capacity - loads
        saturated = headroom <= _SAT * np.maximum(instance.capacity, 1.0)

        frozen |= sums >= instance.demand - _SAT * np.maximum(instance.demand, 1.0)
        for c in np.flatnonzero(~frozen):
            edges = instance.path_edges(active_path[c])
            if saturated[edges].any():
                frozen[c] = True
        live = np.flatnonzero(~frozen)
        if live.size == 0:
            break

        on_edge = np.zeros(instance.num_edges)
        for c in live:
            on_edge[instance.path_edges(active_path[c])] += 1.0
        step = float(np.min(instance.demand[live] - sums[live]))
        used = on_edge > 0
        if used.any():
            step = min(step, float(np.min(headroom[used] / on_edge[used])))
        if step <= 0:
            continue
        x[active_path[live]] += step
    return Allocation.from_rates(instance, x, label)


def waterfill_baseline(instance, k=1, label="waterfill"):
    """Synchronous waterfilling over each commodity's first k paths.

    Every unfrozen commodity raises its active path at equal speed; when
    that path hits a saturated edge the commodity advances to its next
    in-order path among the first k (freezing when none is left), and it
    freezes for good when its demand is met.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    n = instance.num_commodities
    x = np.zeros(instance.num_paths)
    frozen = np.zeros(n, dtype=bool)
    # Index of the active path within each commodity's list.
    slot = np.zeros(n, dtype=np.int64)
    limit = np.minimum(np.diff(instance.com_path_ptr), k)

    for _ in range(2 * (int(limit.sum()) + instance.num_edges) + 4):
        loads = edge_loads(instance, x)
        sums = commodity_sums(instance, x)
        headroom = instance.capacity - loads
        saturated = headroom <= _SAT * np.maximum(instance.capacity, 1.0)

        frozen |= sums >= instance.demand - _SAT * np.maximum(instance.demand, 1.0)
        for c in np.flatnonzero(~frozen):
            while slot[c] < limit[c]:
                p = instance.com_path_ptr[c] + slot[c]
                if saturated[instance.path_edges(p)].any():
                    slot[c] += 1
                else:
                    break
            if slot[c] >= limit[c]:
                frozen[c] = True
        live = np.flatnonzero(~frozen)
        if live.size == 0:
            break

        active = instance.com_path_ptr[live] + slot[live]
        on_edge = np.zeros(instance.num_edges)
        for p in active:
            on_edge[instance.path_edges(p)] += 1.0
        step = float(np.min(instance.demand[live] - sums[live]))
        used = on_edge > 0
        if used.any():
            step = min(step, float(np.min(headroom[used] / on_edge[used])))
        if step <= 0:
            continue
        x[active] += step
    return Allocation.from_rates(instance, x, label)


def _grid_axes(instance, grid_step):
    caps = np.full(instance.num_paths, np.inf)
    for p in range(instance.num_paths):
        edges = instance.path_edges(p)
        if edges.size:
            caps[p] = instance.capacity[edges].min()
    upper = np.minimum(instance.demand[instance.path_com], caps)
    counts = np.floor(upper / grid_step + 1e-9).astype(np.int64) + 1
    return [np.arange(c) * grid_step for c in counts]


def exact_bruteforce_tiny(instance, alpha, grid_step, max_points=20_000_000):
    """Exhaustive grid search over feasible rate vectors.

    alpha=None means max-min: lexicographic maximization of the sorted
    vector of demand-capped sums. Finite alpha maximizes total utility.
    Only meant for instances with at most 6 paths.
    """
    if instance.num_paths > 6:
        raise InputError("grid oracle limited to 6 paths")
    if grid_step <= 0:
        raise InputError("grid_step must be > 0")
    if alpha is not None and alpha < 0:
        raise InputError("alpha must be None (max-min) or >= 0")
    if instance.num_paths == 0:
        return Allocation.from_rates(instance, np.zeros(0), label="grid")

    axes = _grid_axes(instance, grid_step)
    counts = np.array([len(a) for a in axes], dtype=np.int64)
    total = int(np.prod(counts))
    if total > max_points:
        raise InputError(f"instance too large for grid oracle: {total} grid points")

    n_paths = instance.num_paths
    com_mat = np.zeros((n_paths, instance.num_commodities))
    com_mat[np.arange(n_paths), instance.path_com] = 1.0
    edge_mat = np.zeros((n_paths, instance.num_edges))
    edge_mat[instance.pair_path, instance.pair_edge] = 1.0

    strides = np.ones(n_paths, dtype=np.int64)
    for i in range(n_paths - 2, -1, -1):
        strides[i] = strides[i + 1] * counts[i + 1]

    best_key = None
    best_rates = None
    chunk = 200_000
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total), dtype=np.int64)
        rates = np.empty((flat.size, n_paths))
        for i in range(n_paths):
            rates[:, i] = axes[i][(flat // strides[i]) % counts[i]]
        sums = rates @ com_mat
        loads = rates @ edge_mat
        ok = np.all(sums <= instance.demand + 1e-9, axis=1)
        ok &= np.all(loads <= instance.capacity + 1e-9, axis=1)
        if not ok.any():
            continue
        rates, sums = rates[ok], sums[ok]
        if alpha is None:
            key = np.sort(np.minimum(sums, instance.demand), axis=1)
            cand = np.lexsort(key.T[::-1])[-1]
            cand = int(np.flatnonzero((key == key[cand]).all(axis=1))[0])
            cand_key = tuple(key[cand])
        else:
            obj = utility(sums, alpha).sum(axis=1)
            cand = int(np.argmax(obj))
            cand_key = (float(obj[cand]),)
        if best_key is None or cand_key > best_key:
            best_key = cand_key
            best_rates = rates[cand].copy()
    return Allocation.from_rates(instance, best_rates, label="grid")


@dataclass(frozen=True)
class KKTReport:
    max_residual: float
    failing_path: int | None


def kkt_check_proportional(instance, allocation, tol=1e-2):
    """No-ascent check for proportional fairness: every commodity short of
    its demand must have all paths crossing an edge with capacity slack at
    most tol. Returns (passed, report) with the largest offending
    min-slack and the path achieving it."""
    slack = instance.capacity - edge_loads(instance, allocation.rates)
    worst = 0.0
    worst_path = None
    for c in np.flatnonzero(allocation.sums < instance.demand - tol):
        for p in instance.commodity_paths(c):
            min_slack = float(slack[instance.path_edges(p)].min())
            if min_slack > worst:
                worst = min_slack
                worst_path = int(p)
    passed = worst <= tol
    return passed, KKTReport(max_residual=worst, failing_path=None if passed else worst_path)


def optimality_from_sums(sums, reference_sums, theta):
    if theta <= 0:
        raise InputError("theta must be > 0")
    sums = np.asarray(sums, np.float64)
    reference_sums = np.asarray(reference_sums, np.float64)
    if sums.shape != reference_sums.shape:
        raise InputError("commodity sets differ between allocation and reference")
    if sums.size == 0:
        return 1.0
    ratios = np.minimum(sums / np.maximum(reference_sums, theta), 1.0)
    return float(ratios.mean())


def optimality_metric(allocation, reference, theta):
    """Mean over commodities of min(served / max(reference, theta), 1)."""
    return optimality_from_sums(allocation.sums, reference.sums, theta)


def dao_carry_rates(rates, drifted_instance, tol=1e-9):
    """Apply a stale allocation to drifted conditions.

    Commodity sums above the new demand scale down proportionally; then
    overloaded edges, worst first, scale all their paths by capacity over
    load until feasible. With zero drift nothing triggers and the rates
    come back bit-identical.
    """
    inst = drifted_instance
    x = np.ascontiguousarray(rates, np.float64).copy()
    sums = commodity_sums(inst, x)
    for c in np.flatnonzero(sums > inst.demand + tol):
        lo, hi = int(inst.com_path_ptr[c]), int(inst.com_path_ptr[c + 1])
        x[lo:hi] *= inst.demand[c] / sums[c]
    if inst.num_edges == 0:
        return x
    for _ in range(4 * inst.num_edges + 4):
        over = edge_loads(inst, x) - inst.capacity
        e = int(np.argmax(over))
        if over[e] <= tol:
            break
        load = over[e] + inst.capacity[e]
        factor = inst.capacity[e] / load
        lo, hi = int(inst.edge_pair_ptr[e]), int(inst.edge_pair_ptr[e + 1])
        paths = np.unique(inst.pair_path[inst.edge_pairs[lo:hi]])
        x[paths] *= factor
    return x


def dao_evaluate(allocation, drifted_instance, drifted_reference, theta):
    """Drift-adjusted optimality: carry the stale allocation into the
    drifted state, then score it against the reference solved there."""
    carried = dao_carry_rates(allocation.rates, drifted_instance)
    return optimality_from_sums(
        commodity_sums(drifted_instance, carried), drifted_reference.sums, theta
    )
