"""Data ingestion, instance generation, drift streams, and the experiment
runner behind the CLI.

File formats: topology and demand CSVs with '#' comments, a JSON paths file
keyed "src→dst" with 0-based edge ids (topology row order after undirected
expansion), and a JSON snapshot array of overrides relative to the base
files.
"""

from __future__ import annotations

import csv
import itertools
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .controller import SolverConfig, solve
from .model import (Commodity, InputError, PathSet, build_instance,
                    build_topology, with_conditions)
from .oracles import (Allocation, OracleDomainError, default_theta,
                      dao_evaluate, exact_maxmin_singlepath,
                      optimality_metric, waterfill_baseline)

ARROW = "→"

_TRUE = {"1", "true", "yes", "y"}
_FALSE = {"0", "false", "no", "n", ""}


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, [t.strip() for t in line.split(",")]


def parse_topology(path):
    """Load a `src,dst,capacity_mbps,weight[,undirected]` CSV."""
    rows = []
    for lineno, parts in _data_lines(path):
        if parts[0] == "src":
            continue  # header
        if len(parts) not in (4, 5):
            raise InputError(f"{path}:{lineno}: expected 4 or 5 fields")
        try:
            cap, w = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        row = [parts[0], parts[1], cap, w]
        if len(parts) == 5:
            token = parts[4].lower()
            if token in _TRUE:
                row.append(True)
            elif token in _FALSE:
                row.append(False)
            else:
                raise InputError(f"{path}:{lineno}: bad undirected flag {parts[4]!r}")
        rows.append(tuple(row))
    return build_topology(rows)


def parse_demands(path, topology=None):
    """Load a `src,dst,demand_mbps` CSV into a commodity list."""
    known = set(topology.nodes) if topology is not None else None
    commodities = []
    for lineno, parts in _data_lines(path):
        if parts[0] == "src":
            continue
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields")
        try:
            commodities.append(Commodity(parts[0], parts[1], float(parts[2])))
        except (ValueError, InputError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if known is not None and (parts[0] not in known or parts[1] not in known):
            raise InputError(f"{path}:{lineno}: unknown node in demand row")
    return commodities


def _split_key(key):
    if ARROW not in key:
        raise InputError(f"bad commodity key {key!r} (expected src{ARROW}dst)")
    src, _, dst = key.partition(ARROW)
    return src, dst


def parse_paths(path, commodities):
    """Load the JSON paths map, aligned to the commodity list order.

    Commodities without an entry get an empty path list (and are then
    dropped at build time); keys naming no known commodity are an error.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: paths file must be a JSON object")
    index = {(c.src, c.dst): i for i, c in enumerate(commodities)}
    lists = [[] for _ in commodities]
    for key, paths in data.items():
        pair = _split_key(key)
        if pair not in index:
            raise InputError(f"{path}: key {key!r} matches no commodity")
        if not isinstance(paths, list) or not all(isinstance(p, list) for p in paths):
            raise InputError(f"{path}: entry {key!r} must be a list of edge-id lists")
        lists[index[pair]] = paths
    return PathSet.from_lists(lists)


def parse_inputs(topology_file, demands_file, paths_file=None):
    topology = parse_topology(topology_file)
    commodities = parse_demands(demands_file, topology)
    paths = parse_paths(paths_file, commodities) if paths_file else None
    return topology, commodities, paths


def _route_graph(topology):
    g = nx.DiGraph()
    g.add_nodes_from(topology.nodes)
    for e in range(topology.num_edges):
        if topology.capacity[e] > 0:  # failed links carry no paths
            u, v = topology.edge_names(e)
            g.add_edge(u, v, weight=float(topology.weight[e]), eid=e)
    return g


def _edge_ids(graph, node_path):
    return tuple(graph[u][v]["eid"] for u, v in itertools.pairwise(node_path))


def k_shortest_paths(topology, commodities, k=4):
    """Up to k loopless shortest paths per commodity, ordered by (total
    weight, edge-id tuple). Unreachable pairs get zero paths."""
    if k < 1:
        raise InputError("k must be >= 1")
    graph = _route_graph(topology)
    weights = topology.weight
    if k == 1:
        # One Dijkstra tree per distinct source instead of one Yen run per
        # commodity; same result, much cheaper on all-pairs demand sets.
        trees = {}
        lists = []
        for com in commodities:
            if com.src not in trees:
                trees[com.src] = nx.single_source_dijkstra(graph, com.src, weight="weight")[1]
            node_path = trees[com.src].get(com.dst)
            lists.append([] if node_path is None else [_edge_ids(graph, node_path)])
        return PathSet.from_lists(lists)

    lists = []
    for com in commodities:
        try:
            generator = nx.shortest_simple_paths(graph, com.src, com.dst, weight="weight")
            candidates = []
            for node_path in generator:
                eids = _edge_ids(graph, node_path)
                w = float(sum(weights[e] for e in eids))
                if len(candidates) >= k:
                    kth = sorted(c[0] for c in candidates)[k - 1]
                    if w > kth:
                        break
                candidates.append((w, eids))
                if len(candidates) >= k + 16:  # tie capture, bounded
                    break
            candidates.sort(key=lambda c: (c[0], c[1]))
            lists.append([eids for _, eids in candidates[:k]])
        except nx.NetworkXNoPath:
            lists.append([])
    return PathSet.from_lists(lists)


def gravity_demands(topology, total_volume):
    """Demand matrix from the gravity model with node weight = incident
    capacity; all ordered pairs, diagonal excluded, sums to total_volume."""
    if topology.num_nodes < 2:
        raise InputError("gravity model needs at least 2 nodes")
    if total_volume <= 0:
        raise InputError("total_volume must be > 0")
    w = np.zeros(topology.num_nodes)
    np.add.at(w, topology.edge_src, topology.capacity)
    np.add.at(w, topology.edge_dst, topology.capacity)
    z = float(w.sum() ** 2 - (w ** 2).sum())
    if z <= 0:
        raise InputError("gravity model undefined: no positive capacity")
    out = []
    for i, src in enumerate(topology.nodes):
        for j, dst in enumerate(topology.nodes):
            if i != j:
                out.append(Commodity(src, dst, total_volume * w[i] * w[j] / z))
    return out


def random_topology(num_nodes, seed, extra_edge_fraction=0.5,
                    capacity_range=(50.0, 200.0), weight_range=(1.0, 10.0)):
    """Ring plus random chords, all links undirected with per-link uniform
    capacity and weight. Node names are zero-padded so sorted order equals
    numeric order."""
    if num_nodes < 2:
        raise InputError("need at least 2 nodes")
    rng = np.random.default_rng(seed)
    width = len(str(num_nodes - 1))
    names = [f"n{i:0{width}d}" for i in range(num_nodes)]

    pairs = []
    seen = set()
    for i in range(num_nodes):
        a, b = i, (i + 1) % num_nodes
        key = (min(a, b), max(a, b))
        if key not in seen:
            seen.add(key)
            pairs.append(key)
    want = int(round(extra_edge_fraction * num_nodes))
    attempts = 0
    added = 0
    while added < want and attempts < 50 * max(want, 1):
        attempts += 1
        a, b = rng.integers(0, num_nodes, 2)
        if a == b:
            continue
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key in seen:
            continue
        seen.add(key)
        pairs.append(key)
        added += 1

    rows = []
    for a, b in pairs:
        cap = float(rng.uniform(*capacity_range))
        wgt = float(rng.uniform(*weight_range))
        rows.append((names[a], names[b], cap, wgt, True))
    return build_topology(rows)


@dataclass(frozen=True)
class Snapshot:
    """Full network state at a point in time: per-base-commodity demands
    and per-edge capacities."""

    t_seconds: float
    demands: np.ndarray
    capacities: np.ndarray


@dataclass(frozen=True)
class DriftEvent:
    t_seconds: float
    target: str  # "capacity" or "demand"
    index: int
    value: float


@dataclass(frozen=True)
class DriftStream:
    base: Snapshot
    events: tuple[DriftEvent, ...]


def base_snapshot(topology, commodities, t_seconds=0.0):
    return Snapshot(
        t_seconds=float(t_seconds),
        demands=np.array([c.demand for c in commodities], np.float64),
        capacities=topology.capacity.copy(),
    )


def parse_snapshots(path, topology, commodities):
    """Materialize the snapshot JSON (override entries relative to the base
    inputs, each entry independent) into full Snapshot states."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise InputError(f"{path}: snapshots file must be a non-empty JSON array")
    com_index = {(c.src, c.dst): i for i, c in enumerate(commodities)}
    edge_index = topology.edge_index()
    base = base_snapshot(topology, commodities)
    snaps = []
    prev_t = -np.inf
    for entry in data:
        t = float(entry["t_seconds"])
        if t <= prev_t:
            raise InputError(f"{path}: snapshot timestamps must be strictly increasing")
        prev_t = t
        demands = base.demands.copy()
        capacities = base.capacities.copy()
        for key, value in entry.get("demands", {}).items():
            pair = _split_key(key)
            if pair not in com_index:
                raise InputError(f"{path}: demand override {key!r} matches no commodity")
            value = float(value)
            if not np.isfinite(value) or value < 0:
                raise InputError(f"{path}: demand override {key!r} must be finite and >= 0")
            demands[com_index[pair]] = value
        for key, value in entry.get("capacities", {}).items():
            pair = _split_key(key)
            if pair not in edge_index:
                raise InputError(f"{path}: capacity override {key!r} matches no edge")
            value = float(value)
            if not np.isfinite(value) or value < 0:
                raise InputError(f"{path}: capacity override {key!r} must be finite and >= 0")
            capacities[edge_index[pair]] = value
        snaps.append(Snapshot(t, demands, capacities))
    return snaps


def make_drift_stream(snapshots):
    """Uniformly spread the changed values of each consecutive snapshot
    pair over the interval between them, strictly inside it; ties at equal
    timestamps keep (target, index) order. Replaying all events of an
    interval reproduces the later snapshot exactly."""
    if not snapshots:
        raise InputError("need at least one snapshot")
    events = []
    for a, b in itertools.pairwise(snapshots):
        if b.t_seconds <= a.t_seconds:
            raise InputError("snapshot timestamps must be strictly increasing")
        changes = []
        for i in np.flatnonzero(a.capacities != b.capacities):
            changes.append(("capacity", int(i), float(b.capacities[i])))
        for i in np.flatnonzero(a.demands != b.demands):
            changes.append(("demand", int(i), float(b.demands[i])))
        changes.sort(key=lambda c: (c[0], c[1]))
        span = b.t_seconds - a.t_seconds
        n = len(changes)
        for i, (target, index, value) in enumerate(changes):
            t = a.t_seconds + span * (i + 1) / (n + 1)
            events.append(DriftEvent(t, target, index, value))
    return DriftStream(base=snapshots[0], events=tuple(events))


def state_at(stream, base, t):
    """The base snapshot with every event in (base.t, t] applied."""
    demands = base.demands.copy()
    capacities = base.capacities.copy()
    for ev in stream.events:
        if ev.t_seconds > t:
            break
        if ev.t_seconds <= base.t_seconds:
            continue
        if ev.target == "demand":
            demands[ev.index] = ev.value
        else:
            capacities[ev.index] = ev.value
    return Snapshot(float(t), demands, capacities)


def format_value(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_allocation_csv(path, instance, allocation, meta=None):
    """`path_id,commodity,rate_mbps` rows plus a footer comment with solve
    metadata (objective, iterations, runtime and friends)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("path_id,commodity,rate_mbps\n")
        for p in range(instance.num_paths):
            com = instance.commodities[instance.path_com[p]]
            fh.write(f"{p},{com.key},{format_value(float(allocation.rates[p]))}\n")
        if meta:
            tokens = " ".join(f"{k}={format_value(v)}" for k, v in meta.items())
            fh.write(f"# {tokens}\n")


def read_allocation_rates(path, instance):
    """Rates vector from an allocation CSV, validated against the instance."""
    rates = np.full(instance.num_paths, np.nan)
    for lineno, parts in _data_lines(path):
        if parts[0] == "path_id":
            continue
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields")
        try:
            p, rate = int(parts[0]), float(parts[2])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if not 0 <= p < instance.num_paths:
            raise InputError(f"{path}:{lineno}: path_id {p} out of range")
        rates[p] = rate
    if np.isnan(rates).any():
        raise InputError(f"{path}: missing rates for some paths")
    return rates


def read_allocation_sums(path):
    """Commodity -> summed rate from an allocation CSV, standalone (no
    instance needed); used by the metrics subcommand."""
    sums = {}
    for lineno, parts in _data_lines(path):
        if parts[0] == "path_id":
            continue
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields")
        try:
            sums[parts[1]] = sums.get(parts[1], 0.0) + float(parts[2])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    return sums


DEFAULT_EXPERIMENT = {
    "paths": {"k": 4},
    "snapshots": None,
    "solvers": ["pathfair", "waterfill"],
    "reference": "maxmin-singlepath",
    "alpha_target": None,
    "gamma": 1e-3,
    "beta0": 1.0,
    "max_iterations": 5000,
    "adapt_beta": True,
    "warm_start": "none",
    "theta": None,
    "dao_horizon_s": None,
    "deterministic": False,
    "trace": False,
}

REPORT_COLUMNS = ("snapshot", "solver", "runtime_s", "iterations",
                  "optimality", "dao", "total_flow_mbps")


def _materialize_topology(spec, base_dir):
    if isinstance(spec, str):
        return parse_topology(base_dir / spec)
    if isinstance(spec, dict) and "random" in spec:
        return random_topology(**spec["random"])
    raise InputError("config: topology must be a file name or {\"random\": {...}}")


def _materialize_demands(spec, topology, base_dir):
    if isinstance(spec, str):
        return parse_demands(base_dir / spec, topology)
    if isinstance(spec, dict) and "gravity" in spec:
        return gravity_demands(topology, **spec["gravity"])
    raise InputError("config: demands must be a file name or {\"gravity\": {...}}")


def _materialize_paths(spec, topology, commodities, base_dir):
    if isinstance(spec, str):
        return parse_paths(base_dir / spec, commodities)
    if isinstance(spec, dict) and "k" in spec:
        return k_shortest_paths(topology, commodities, int(spec["k"]))
    raise InputError("config: paths must be a file name or {\"k\": n}")


def _run_named_solver(name, instance, cfg, warm_rates):
    if name == "pathfair":
        solver_config = SolverConfig(
            alpha_target=cfg["alpha_target"],
            gamma=cfg["gamma"],
            beta0=cfg["beta0"],
            max_iterations=cfg["max_iterations"],
            adapt=cfg["adapt_beta"],
            trace=cfg["trace"],
        )
        result = solve(instance, solver_config, warm_start=warm_rates)
        alloc = Allocation.from_rates(instance, result.rates, "pathfair")
        return alloc, result.iterations, result.runtime_s, result.trace
    if name == "waterfill":
        t0 = time.perf_counter()
        alloc = waterfill_baseline(instance)
        return alloc, 0, time.perf_counter() - t0, None
    if name == "maxmin-singlepath":
        t0 = time.perf_counter()
        alloc = exact_maxmin_singlepath(instance)
        return alloc, 0, time.perf_counter() - t0, None
    raise InputError(f"unknown solver {name!r}")


def run_experiment(config, out_dir):
    """Per snapshot: build the drifted instance, run every configured
    solver, score optimality against the reference and DAO against the
    state after the solve horizon; write report.csv (and traces when
    enabled) under out_dir and return the rows.

    In deterministic mode the runtime column is pinned to 0.0 and the DAO
    horizon comes from dao_horizon_s, so identical configs reproduce
    byte-identical CSVs.
    """
    base_dir = Path(".")
    if not isinstance(config, dict):
        config_path = Path(config)
        base_dir = config_path.parent
        with open(config_path, encoding="utf-8") as fh:
            config = json.load(fh)
    cfg = {**DEFAULT_EXPERIMENT, **config}
    for key in ("topology", "demands"):
        if key not in cfg:
            raise InputError(f"config: missing {key!r}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    topology = _materialize_topology(cfg["topology"], base_dir)
    commodities = _materialize_demands(cfg["demands"], topology, base_dir)
    path_set = _materialize_paths(cfg["paths"], topology, commodities, base_dir)
    instance0 = build_instance(topology, commodities, path_set)

    if cfg["snapshots"]:
        snapshots = parse_snapshots(base_dir / cfg["snapshots"], topology, commodities)
    else:
        snapshots = [base_snapshot(topology, commodities)]
    stream = make_drift_stream(snapshots)

    theta = cfg["theta"] if cfg["theta"] is not None else default_theta(instance0)
    solver_names = sorted(set(cfg["solvers"]))
    warm = {}
    rows = []
    for si, snap in enumerate(snapshots):
        inst = with_conditions(
            instance0,
            capacity=snap.capacities,
            demand=snap.demands[instance0.kept_rows],
        )
        try:
            reference, _, _, _ = _run_named_solver(cfg["reference"], inst, cfg, None)
        except OracleDomainError as exc:
            print(f"snapshot {si}: reference out of domain ({exc}); rows skipped",
                  file=sys.stderr)
            continue
        for name in solver_names:
            warm_rates = warm.get(name) if cfg["warm_start"] == "previous" else None
            try:
                alloc, iterations, runtime, trace = _run_named_solver(
                    name, inst, cfg, warm_rates)
            except OracleDomainError as exc:
                print(f"snapshot {si}: solver {name} out of domain ({exc}); row skipped",
                      file=sys.stderr)
                continue
            warm[name] = alloc.rates

            if cfg["deterministic"]:
                horizon = cfg["dao_horizon_s"] or 0.0
            else:
                horizon = cfg["dao_horizon_s"] if cfg["dao_horizon_s"] is not None else runtime
            drifted = state_at(stream, snap, snap.t_seconds + horizon)
            dinst = with_conditions(
                instance0,
                capacity=drifted.capacities,
                demand=drifted.demands[instance0.kept_rows],
            )
            dref, _, _, _ = _run_named_solver(cfg["reference"], dinst, cfg, None)
            rows.append({
                "snapshot": si,
                "solver": name,
                "runtime_s": 0.0 if cfg["deterministic"] else runtime,
                "iterations": iterations,
                "optimality": optimality_metric(alloc, reference, theta),
                "dao": dao_evaluate(alloc, dinst, dref, theta),
                "total_flow_mbps": float(np.sum(alloc.sums)),
            })
            if trace is not None:
                _write_trace(out_dir / f"trace_s{si}_{name}.csv", trace)

    report = out_dir / "report.csv"
    with open(report, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(format_value(row[c]) for c in REPORT_COLUMNS) + "\n")
    return rows


def _write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration,alpha,beta,residual_s,residual_r,objective,"
                 "pct_violated,mean_relative_violation,optimality\n")
        for row in trace:
            opt = "" if row.optimality is None else format_value(row.optimality)
            fh.write(",".join([
                str(row.iteration), str(row.alpha), format_value(row.beta),
                format_value(row.s), format_value(row.r), format_value(row.objective),
                format_value(row.pct_violated),
                format_value(row.mean_relative_violation), opt,
            ]) + "\n")
