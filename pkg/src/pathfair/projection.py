"""Feasibility projection.

Three trimming phases: clamp negatives, resolve per-commodity demand
excess, then resolve per-edge overloads. Trim order is fairness-aware:
paths serving larger commodity sums and crossing more violated edges give
up rate first. Re-summation uses the same deterministic reduction as the
validator, so "feasible" here and there agree bitwise.
"""

from __future__ import annotations

import numpy as np

from ._reduce import _sum_gather_range, _sum_range, segment_sums
from .model import FEAS_TOL, InputError, commodity_sums, edge_loads

# A single trim pass can leave one-ulp residue after re-summation; a few
# repeats always clear it at realistic magnitudes.
_MAX_PASSES = 16


def score_paths(instance, rates, alpha):
    """Trim priority: (commodity sum)^alpha times the number of violated
    edges on the path. At alpha=0 the score is just the violation count."""
    rates = np.ascontiguousarray(rates, np.float64)
    sums = np.maximum(commodity_sums(instance, rates), 0.0)
    loads = edge_loads(instance, rates)
    violated = (loads - instance.capacity) > FEAS_TOL
    per_pair = violated[instance.pair_edge].astype(np.float64)
    counts = np.empty(instance.num_paths)
    segment_sums(per_pair, instance.pair_ptr, counts)
    return np.power(sums[instance.path_com], float(alpha)) * counts


def _trim_slice(x, order, target_excess, resum):
    # Repeatedly walk the priority order until the re-summed excess is
    # gone; each pass trims at most the remaining excess.
    excess = target_excess
    for _ in range(_MAX_PASSES):
        for p in order:
            if excess <= 0.0:
                break
            d = x[p] if x[p] < excess else excess
            x[p] -= d
            excess -= d
        excess = resum()
        if excess <= 0.0:
            return


def project(instance, rates, alpha):
    """Return trimmed, exactly feasible rates (never raises on violations;
    trimming to zero is always available)."""
    x = np.ascontiguousarray(rates, np.float64).copy()
    if x.shape != (instance.num_paths,):
        raise InputError(f"rates length {x.shape} does not match {instance.num_paths} paths")
    if not np.all(np.isfinite(x)):
        raise InputError("projection input contains non-finite rates")
    np.maximum(x, 0.0, out=x)
    if instance.num_paths == 0:
        return x

    ptr = instance.com_path_ptr
    scores = score_paths(instance, x, alpha)
    for c in range(instance.num_commodities):
        lo, hi = int(ptr[c]), int(ptr[c + 1])
        demand = instance.demand[c]
        excess = _sum_range(x, lo, hi) - demand
        if excess <= 0.0:
            continue
        # Stable argsort on the negated scores: descending score, ties by
        # ascending path index.
        order = lo + np.argsort(-scores[lo:hi], kind="stable")
        _trim_slice(x, order, excess, lambda: _sum_range(x, lo, hi) - demand)

    loads = edge_loads(instance, x)
    over = loads - instance.capacity
    violated = np.flatnonzero(over > 0.0)
    if violated.size:
        pair_vals = x[instance.pair_path]
        scores = score_paths(instance, x, alpha)
        epp = instance.edge_pair_ptr
        for e in violated[np.argsort(-over[violated], kind="stable")]:
            lo, hi = int(epp[e]), int(epp[e + 1])
            cap = instance.capacity[e]

            def resum():
                return _sum_gather_range(pair_vals, instance.edge_pairs, lo, hi) - cap

            excess = resum()
            if excess <= 0.0:
                continue
            paths = instance.pair_path[instance.edge_pairs[lo:hi]]
            order = paths[np.argsort(-scores[paths], kind="stable")]
            for _ in range(_MAX_PASSES):
                for p in order:
                    if excess <= 0.0:
                        break
                    d = x[p] if x[p] < excess else excess
                    if d > 0.0:
                        x[p] -= d
                        excess -= d
                        pair_vals[instance.pair_ptr[p]:instance.pair_ptr[p + 1]] = x[p]
                excess = resum()
                if excess <= 0.0:
                    break
    return x
