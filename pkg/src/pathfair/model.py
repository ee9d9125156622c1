"""Problem representation and validation.

Topology, commodities and path sets are validated into an immutable
Instance whose flat integer index spaces (paths, edges, consensus pairs)
are what the iterate kernels, the projection and the validator all run on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ._reduce import gather_segment_sums, segment_sums

FEAS_TOL = 1e-9


class InputError(ValueError):
    """Invalid topology, demand, or path input."""


@dataclass(frozen=True, eq=False)
class Topology:
    """Directed capacitated graph.

    Edge order is load order with undirected rows already expanded
    (reverse edge immediately after its forward edge); path files index
    edges by that order.
    """

    nodes: tuple[str, ...]
    edge_src: np.ndarray
    edge_dst: np.ndarray
    capacity: np.ndarray
    weight: np.ndarray

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return int(self.edge_src.shape[0])

    def node_index(self):
        """Name -> dense node id."""
        return {name: i for i, name in enumerate(self.nodes)}

    def edge_index(self):
        """(src name, dst name) -> edge id."""
        return {
            (self.nodes[self.edge_src[e]], self.nodes[self.edge_dst[e]]): e
            for e in range(self.num_edges)
        }

    def edge_names(self, e):
        return self.nodes[self.edge_src[e]], self.nodes[self.edge_dst[e]]


def build_topology(rows):
    """Build a Topology from (src, dst, capacity_mbps, weight[, undirected]) rows.

    Raises InputError on self-loops, duplicate directed edges, negative or
    non-finite capacities, or non-positive weights.
    """
    expanded = []
    for n, row in enumerate(rows):
        if len(row) == 4:
            src, dst, cap, w = row
            undirected = False
        elif len(row) == 5:
            src, dst, cap, w, undirected = row
        else:
            raise InputError(f"edge row {n}: expected 4 or 5 fields, got {len(row)}")
        src, dst = str(src), str(dst)
        cap, w = float(cap), float(w)
        if src == dst:
            raise InputError(f"edge row {n}: self-loop {src!r}")
        if not np.isfinite(cap) or cap < 0:
            raise InputError(f"edge row {n}: capacity must be finite and >= 0, got {cap}")
        if not np.isfinite(w) or w <= 0:
            raise InputError(f"edge row {n}: weight must be finite and > 0, got {w}")
        expanded.append((src, dst, cap, w))
        if undirected:
            expanded.append((dst, src, cap, w))

    seen = set()
    for src, dst, _, _ in expanded:
        if (src, dst) in seen:
            raise InputError(f"duplicate edge {src!r} -> {dst!r}")
        seen.add((src, dst))

    names = sorted({n for e in expanded for n in e[:2]})
    index = {name: i for i, name in enumerate(names)}
    m = len(expanded)
    edge_src = np.fromiter((index[e[0]] for e in expanded), np.int64, m)
    edge_dst = np.fromiter((index[e[1]] for e in expanded), np.int64, m)
    capacity = np.fromiter((e[2] for e in expanded), np.float64, m)
    weight = np.fromiter((e[3] for e in expanded), np.float64, m)
    return Topology(tuple(names), edge_src, edge_dst, capacity, weight)


@dataclass(frozen=True)
class Commodity:
    src: str
    dst: str
    demand: float

    def __post_init__(self):
        if self.src == self.dst:
            raise InputError(f"commodity {self.src!r} -> {self.dst!r}: src == dst")
        d = float(self.demand)
        if not np.isfinite(d) or d < 0:
            raise InputError(f"commodity {self.src!r} -> {self.dst!r}: bad demand {self.demand}")
        object.__setattr__(self, "demand", d)

    @property
    def key(self):
        return f"{self.src}→{self.dst}"


@dataclass(frozen=True)
class PathSet:
    """paths[c][i] is the i-th path of commodity c as a tuple of edge ids."""

    paths: tuple[tuple[tuple[int, ...], ...], ...]

    @classmethod
    def from_lists(cls, lists):
        return cls(tuple(tuple(tuple(int(e) for e in p) for p in per_com) for per_com in lists))


@dataclass(frozen=True, eq=False)
class Instance:
    """Flat-indexed problem instance.

    Index spaces: commodities (retained only), paths (commodity-major,
    input order), edges (topology order), and consensus pairs, one per
    (edge, path) incidence, laid out path-major so pair_ptr slices them
    per path. edge_pairs regroups the same pair ids per edge.
    """

    topology: Topology
    commodities: tuple[Commodity, ...]
    kept_rows: np.ndarray       # index into the pre-drop commodity list
    demand: np.ndarray          # per retained commodity
    capacity: np.ndarray        # per edge; drifted variants replace this
    com_path_ptr: np.ndarray
    path_com: np.ndarray
    pair_ptr: np.ndarray
    pair_edge: np.ndarray
    pair_path: np.ndarray
    edge_pair_ptr: np.ndarray
    edge_pairs: np.ndarray
    hops: np.ndarray            # edges per path
    edge_path_count: np.ndarray  # paths per edge

    @property
    def num_commodities(self):
        return int(self.demand.shape[0])

    @property
    def num_paths(self):
        return int(self.path_com.shape[0])

    @property
    def num_edges(self):
        return int(self.capacity.shape[0])

    @property
    def num_pairs(self):
        return int(self.pair_edge.shape[0])

    def path_edges(self, p):
        return self.pair_edge[self.pair_ptr[p]:self.pair_ptr[p + 1]]

    def commodity_paths(self, c):
        return range(int(self.com_path_ptr[c]), int(self.com_path_ptr[c + 1]))


def _check_path(topology, com, path, node_index, c, i):
    if len(path) == 0:
        raise InputError(f"commodity {com.key}, path {i}: empty path")
    m = topology.num_edges
    for e in path:
        if not 0 <= e < m:
            raise InputError(f"commodity {com.key}, path {i}: edge id {e} out of range")
    src_id = node_index[com.src]
    dst_id = node_index[com.dst]
    if topology.edge_src[path[0]] != src_id:
        raise InputError(f"commodity {com.key}, path {i}: does not start at {com.src!r}")
    if topology.edge_dst[path[-1]] != dst_id:
        raise InputError(f"commodity {com.key}, path {i}: does not end at {com.dst!r}")
    visited = [int(topology.edge_src[path[0]])]
    for a, b in zip(path, path[1:]):
        if topology.edge_dst[a] != topology.edge_src[b]:
            raise InputError(f"commodity {com.key}, path {i}: edges {a} and {b} are not adjacent")
    for e in path:
        visited.append(int(topology.edge_dst[e]))
    if len(set(visited)) != len(visited):
        raise InputError(f"commodity {com.key}, path {i}: repeated node, path not simple")


def build_instance(topology, commodities, path_set):
    """Validate inputs and assemble the flat index structure.

    Commodities with zero demand or no paths are dropped; path ordering is
    preserved from the input. kept_rows records each retained commodity's
    position in the original list so drifted demand vectors can be aligned.
    """
    commodities = tuple(commodities)
    if len(path_set.paths) != len(commodities):
        raise InputError(
            f"path set covers {len(path_set.paths)} commodities, expected {len(commodities)}"
        )
    node_index = topology.node_index()
    for com in commodities:
        if com.src not in node_index or com.dst not in node_index:
            raise InputError(f"commodity {com.key}: unknown node")
    for c, (com, paths) in enumerate(zip(commodities, path_set.paths)):
        for i, path in enumerate(paths):
            _check_path(topology, com, path, node_index, c, i)

    kept = [c for c, com in enumerate(commodities)
            if com.demand > 0 and len(path_set.paths[c]) > 0]
    kept_commodities = tuple(commodities[c] for c in kept)
    kept_paths = [path_set.paths[c] for c in kept]

    nk = len(kept)
    counts = np.fromiter((len(p) for p in kept_paths), np.int64, nk)
    com_path_ptr = np.zeros(nk + 1, np.int64)
    np.cumsum(counts, out=com_path_ptr[1:])
    num_paths = int(com_path_ptr[-1])

    path_com = np.repeat(np.arange(nk, dtype=np.int64), counts)
    flat_paths = [p for per_com in kept_paths for p in per_com]
    hops = np.fromiter((len(p) for p in flat_paths), np.int64, num_paths)
    pair_ptr = np.zeros(num_paths + 1, np.int64)
    np.cumsum(hops, out=pair_ptr[1:])
    num_pairs = int(pair_ptr[-1])
    if num_pairs:
        pair_edge = np.concatenate([np.asarray(p, np.int64) for p in flat_paths])
    else:
        pair_edge = np.zeros(0, np.int64)
    pair_path = np.repeat(np.arange(num_paths, dtype=np.int64), hops)

    m = topology.num_edges
    edge_path_count = np.bincount(pair_edge, minlength=m).astype(np.int64)
    edge_pair_ptr = np.zeros(m + 1, np.int64)
    np.cumsum(edge_path_count, out=edge_pair_ptr[1:])
    # Stable sort by edge keeps pair ids ascending within each edge.
    edge_pairs = np.argsort(pair_edge, kind="stable").astype(np.int64)

    return Instance(
        topology=topology,
        commodities=kept_commodities,
        kept_rows=np.asarray(kept, np.int64),
        demand=np.fromiter((c.demand for c in kept_commodities), np.float64, nk),
        capacity=topology.capacity.copy(),
        com_path_ptr=com_path_ptr,
        path_com=path_com,
        pair_ptr=pair_ptr,
        pair_edge=pair_edge,
        pair_path=pair_path,
        edge_pair_ptr=edge_pair_ptr,
        edge_pairs=edge_pairs,
        hops=hops,
        edge_path_count=edge_path_count,
    )


def with_conditions(instance, capacity=None, demand=None):
    """Same index structure, replaced capacities and/or demands.

    Zero demands are kept (not re-dropped) so iterate arrays and metrics
    stay aligned across drifted network states.
    """
    cap = instance.capacity
    if capacity is not None:
        cap = np.ascontiguousarray(capacity, np.float64)
        if cap.shape != instance.capacity.shape:
            raise InputError("capacity vector length mismatch")
        if not np.all(np.isfinite(cap)) or np.any(cap < 0):
            raise InputError("capacities must be finite and >= 0")
    dem = instance.demand
    if demand is not None:
        dem = np.ascontiguousarray(demand, np.float64)
        if dem.shape != instance.demand.shape:
            raise InputError("demand vector length mismatch")
        if not np.all(np.isfinite(dem)) or np.any(dem < 0):
            raise InputError("demands must be finite and >= 0")
    return dataclasses.replace(instance, capacity=cap, demand=dem)


def commodity_sums(instance, rates):
    """Per-commodity rate sums with the deterministic reduction."""
    rates = np.ascontiguousarray(rates, np.float64)
    out = np.empty(instance.num_commodities)
    segment_sums(rates, instance.com_path_ptr, out)
    return out


def edge_loads(instance, rates):
    """Per-edge loads of a per-path rate vector."""
    rates = np.ascontiguousarray(rates, np.float64)
    pair_vals = rates[instance.pair_path]
    out = np.empty(instance.num_edges)
    gather_segment_sums(pair_vals, instance.edge_pairs, instance.edge_pair_ptr, out)
    return out


def edge_loads_from_pairs(instance, pair_values):
    """Per-edge sums of a per-consensus-pair vector (used for y)."""
    pair_values = np.ascontiguousarray(pair_values, np.float64)
    out = np.empty(instance.num_edges)
    gather_segment_sums(pair_values, instance.edge_pairs, instance.edge_pair_ptr, out)
    return out


@dataclass(frozen=True)
class ViolationReport:
    """Constraint residuals of a rate vector against an instance."""

    feasible: bool
    edge_overload: np.ndarray
    commodity_excess: np.ndarray
    negative_count: int
    worst_negative: float
    pct_violated: float
    mean_relative_violation: float


def validate_allocation(instance, rates, tol=FEAS_TOL):
    """Exact constraint residuals; feasible iff all within tol (absolute)."""
    rates = np.ascontiguousarray(rates, np.float64)
    if rates.shape != (instance.num_paths,):
        raise InputError(
            f"rates length {rates.shape} does not match {instance.num_paths} paths"
        )
    loads = edge_loads(instance, rates)
    sums = commodity_sums(instance, rates)
    overload = np.maximum(loads - instance.capacity, 0.0)
    excess = np.maximum(sums - instance.demand, 0.0)
    neg = rates < -tol

    bad_e = overload > tol
    bad_c = excess > tol
    n_viol = int(bad_e.sum()) + int(bad_c.sum()) + int(neg.sum())
    total = instance.num_edges + instance.num_commodities + instance.num_paths
    pct = 100.0 * n_viol / total if total else 0.0

    rel = []
    if bad_e.any():
        rel.append(overload[bad_e] / np.maximum(instance.capacity[bad_e], 1e-12))
    if bad_c.any():
        rel.append(excess[bad_c] / np.maximum(instance.demand[bad_c], 1e-12))
    mean_rel = float(np.mean(np.concatenate(rel))) if rel else 0.0

    return ViolationReport(
        feasible=n_viol == 0,
        edge_overload=overload,
        commodity_excess=excess,
        negative_count=int(neg.sum()),
        worst_negative=float((-rates[neg]).max()) if neg.any() else 0.0,
        pct_violated=pct,
        mean_relative_violation=mean_rel,
    )
