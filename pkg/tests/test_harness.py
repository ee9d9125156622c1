import json

import numpy as np
import pytest

from pathfair.harness import (
    DEFAULT_EXPERIMENT,
    REPORT_COLUMNS,
    base_snapshot,
    format_value,
    gravity_demands,
    k_shortest_paths,
    make_drift_stream,
    parse_demands,
    parse_inputs,
    parse_paths,
    parse_snapshots,
    parse_topology,
    random_topology,
    read_allocation_rates,
    read_allocation_sums,
    run_experiment,
    state_at,
    write_allocation_csv,
)
from pathfair.model import Commodity, InputError, build_instance, build_topology
from pathfair.oracles import Allocation


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


TOPO_CSV = """\
src,dst,capacity_mbps,weight,undirected
# backbone
A,B,10,1,true
B,C,5,2,false
"""


def test_parse_topology(tmp_path):
    topo = parse_topology(write(tmp_path, "topo.csv", TOPO_CSV))
    # The undirected A-B row expands to both directions, B->C stays one-way.
    assert topo.num_edges == 3
    assert topo.edge_names(0) == ("A", "B")
    assert topo.edge_names(1) == ("B", "A")
    assert topo.edge_names(2) == ("B", "C")
    assert topo.capacity == pytest.approx([10.0, 10.0, 5.0])


@pytest.mark.parametrize("row,frag", [
    ("A,B,10", "expected 4 or 5 fields"),
    ("A,B,ten,1", ":3:"),
    ("A,B,10,1,sideways", "bad undirected flag"),
])
def test_parse_topology_errors_carry_line_numbers(tmp_path, row, frag):
    p = write(tmp_path, "topo.csv", f"src,dst,capacity_mbps,weight\n# x\n{row}\n")
    with pytest.raises(InputError, match=frag):
        parse_topology(p)


def test_parse_demands(tmp_path):
    topo = parse_topology(write(tmp_path, "topo.csv", TOPO_CSV))
    coms = parse_demands(write(tmp_path, "dem.csv", "src,dst,demand_mbps\nA,C,7.5\n"), topo)
    assert [(c.src, c.dst, c.demand) for c in coms] == [("A", "C", 7.5)]
    with pytest.raises(InputError, match="unknown node"):
        parse_demands(write(tmp_path, "d2.csv", "A,Z,1\n"), topo)
    with pytest.raises(InputError, match=":1:"):
        parse_demands(write(tmp_path, "d3.csv", "A,A,1\n"), topo)


def test_parse_paths(tmp_path):
    coms = [Commodity("A", "C", 5.0), Commodity("B", "C", 5.0)]
    p = write(tmp_path, "paths.json", json.dumps({"A→C": [[0, 2]]}))
    ps = parse_paths(p, coms)
    assert ps.paths == (((0, 2),), ())
    bad = write(tmp_path, "bad.json", json.dumps({"C→A": [[0]]}))
    with pytest.raises(InputError, match="matches no commodity"):
        parse_paths(bad, coms)
    with pytest.raises(InputError, match="src"):
        parse_paths(write(tmp_path, "b2.json", json.dumps({"AC": [[0]]})), coms)


def test_parse_inputs_paths_optional(tmp_path):
    t = write(tmp_path, "t.csv", TOPO_CSV)
    d = write(tmp_path, "d.csv", "A,C,3\n")
    topo, coms, ps = parse_inputs(t, d)
    assert ps is None
    assert topo.num_edges == 3 and len(coms) == 1


def line3():
    return build_topology([("A", "B", 10, 1), ("B", "C", 5, 1)])


def test_ksp_line_topology_single_route():
    ps = k_shortest_paths(line3(), [Commodity("A", "C", 1.0)], k=4)
    assert ps.paths == (((0, 1),),)


def test_ksp_tie_break_is_lexicographic():
    topo = build_topology([
        ("A", "T", 1, 1), ("T", "B", 1, 1),
        ("A", "U", 1, 1), ("U", "B", 1, 1),
    ])
    ps = k_shortest_paths(topo, [Commodity("A", "B", 1.0)], k=2)
    assert ps.paths == (((0, 1), (2, 3)),)


def test_ksp_k1_matches_shortest():
    topo = random_topology(12, seed=5)
    coms = [Commodity(topo.nodes[0], topo.nodes[i], 1.0) for i in range(1, 12)]
    one = k_shortest_paths(topo, coms, k=1)
    four = k_shortest_paths(topo, coms, k=4)
    for a, b in zip(one.paths, four.paths):
        assert a[0] == b[0]


def test_ksp_skips_unreachable_and_dead_links():
    topo = build_topology([("A", "B", 10, 1), ("C", "D", 0.0, 1)])
    ps = k_shortest_paths(topo, [Commodity("A", "B", 1.0), Commodity("C", "D", 1.0)], k=2)
    assert ps.paths == (((0,),), ())
    with pytest.raises(InputError):
        k_shortest_paths(topo, [], k=0)


def test_gravity_two_nodes_split_evenly():
    topo = build_topology([("A", "B", 10, 1, True)])
    coms = gravity_demands(topo, 6.0)
    assert [(c.src, c.dst) for c in coms] == [("A", "B"), ("B", "A")]
    assert [c.demand for c in coms] == pytest.approx([3.0, 3.0])


def test_gravity_weight_pattern():
    # Incident-capacity weights (2, 2, 4) reproduce the 1:2 pattern.
    topo = build_topology([("A", "C", 1, 1, True), ("B", "C", 1, 1, True)])
    coms = gravity_demands(topo, 8.0)
    got = [c.demand for c in coms]
    assert got == pytest.approx([0.8, 1.6, 0.8, 1.6, 1.6, 1.6])
    assert sum(got) == pytest.approx(8.0, rel=1e-9)


def test_gravity_zero_weight_node_gets_nothing():
    topo = build_topology([("A", "B", 10, 1, True), ("B", "Z", 0.0, 1, True)])
    coms = gravity_demands(topo, 5.0)
    for c in coms:
        if "Z" in (c.src, c.dst):
            assert c.demand == 0.0
    assert sum(c.demand for c in coms) == pytest.approx(5.0)


def test_gravity_rejects_bad_inputs():
    topo = build_topology([("A", "B", 10, 1, True)])
    with pytest.raises(InputError):
        gravity_demands(topo, 0.0)
    single = build_topology([("A", "B", 10, 1)])
    assert single.num_nodes == 2  # two nodes is the minimum, not an error
    with pytest.raises(InputError):
        gravity_demands(build_topology([("A", "B", 0.0, 1)]), 5.0)


def test_random_topology_is_deterministic_and_connected():
    a = random_topology(20, seed=3)
    b = random_topology(20, seed=3)
    assert a.nodes == b.nodes
    assert np.array_equal(a.capacity, b.capacity)
    assert np.array_equal(a.edge_src, b.edge_src)
    c = random_topology(20, seed=4)
    assert not np.array_equal(a.capacity, c.capacity)
    # Ring backbone: every node has degree >= 2 (undirected edges count once).
    deg = np.zeros(20)
    np.add.at(deg, a.edge_src, 0.5)
    np.add.at(deg, a.edge_dst, 0.5)
    assert np.all(deg >= 2)
    assert a.nodes == tuple(sorted(a.nodes))
    with pytest.raises(InputError):
        random_topology(1, seed=0)


def drift_fixture(tmp_path):
    topo = parse_topology(write(tmp_path, "topo.csv", TOPO_CSV))
    coms = [Commodity("A", "C", 8.0), Commodity("B", "C", 4.0)]
    snap_json = [
        {"t_seconds": 0.0},
        {"t_seconds": 60.0,
         "capacities": {"A→B": 6.0, "B→C": 4.0},
         "demands": {"A→C": 9.0, "B→C": 5.0}},
    ]
    snaps = parse_snapshots(write(tmp_path, "snaps.json", json.dumps(snap_json)), topo, coms)
    return topo, coms, snaps


def test_parse_snapshots_overrides_base(tmp_path):
    topo, coms, snaps = drift_fixture(tmp_path)
    assert len(snaps) == 2
    assert snaps[0].demands == pytest.approx([8.0, 4.0])
    assert snaps[0].capacities == pytest.approx([10.0, 10.0, 5.0])
    # Overrides are relative to the base inputs, per entry.
    assert snaps[1].demands == pytest.approx([9.0, 5.0])
    assert snaps[1].capacities == pytest.approx([6.0, 10.0, 4.0])


def test_parse_snapshots_errors(tmp_path):
    topo = parse_topology(write(tmp_path, "topo.csv", TOPO_CSV))
    coms = [Commodity("A", "C", 8.0)]

    def load(entries):
        p = write(tmp_path, "s.json", json.dumps(entries))
        return parse_snapshots(p, topo, coms)

    with pytest.raises(InputError, match="strictly increasing"):
        load([{"t_seconds": 5.0}, {"t_seconds": 5.0}])
    with pytest.raises(InputError, match="no commodity"):
        load([{"t_seconds": 0.0, "demands": {"C→A": 1.0}}])
    with pytest.raises(InputError, match="no edge"):
        load([{"t_seconds": 0.0, "capacities": {"A→C": 1.0}}])
    with pytest.raises(InputError, match="finite"):
        load([{"t_seconds": 0.0, "demands": {"A→C": -1.0}}])
    with pytest.raises(InputError, match="non-empty"):
        load([])


def test_drift_events_spread_uniformly(tmp_path):
    _, _, snaps = drift_fixture(tmp_path)
    stream = make_drift_stream(snaps)
    assert len(stream.events) == 4
    assert [e.t_seconds for e in stream.events] == pytest.approx(
        [60 * i / 5 for i in (1, 2, 3, 4)])
    # Capacity changes sort ahead of demand changes, index ascending.
    assert [(e.target, e.index) for e in stream.events] == [
        ("capacity", 0), ("capacity", 2), ("demand", 0), ("demand", 1)]


def test_drift_stream_replay_reaches_next_snapshot(tmp_path):
    _, _, snaps = drift_fixture(tmp_path)
    stream = make_drift_stream(snaps)
    final = state_at(stream, snaps[0], snaps[1].t_seconds)
    assert np.array_equal(final.demands, snaps[1].demands)
    assert np.array_equal(final.capacities, snaps[1].capacities)


def test_state_at_prefixes(tmp_path):
    _, _, snaps = drift_fixture(tmp_path)
    stream = make_drift_stream(snaps)
    before = state_at(stream, snaps[0], 1.0)
    assert np.array_equal(before.capacities, snaps[0].capacities)
    mid = state_at(stream, snaps[0], 60 * 2 / 5)
    assert mid.capacities == pytest.approx([6.0, 10.0, 4.0])
    assert mid.demands == pytest.approx(snaps[0].demands)
    past = state_at(stream, snaps[0], 1e9)
    assert np.array_equal(past.demands, snaps[1].demands)


def test_empty_drift_stream(tmp_path):
    topo = parse_topology(write(tmp_path, "topo.csv", TOPO_CSV))
    coms = [Commodity("A", "C", 8.0)]
    stream = make_drift_stream([base_snapshot(topo, coms)])
    assert stream.events == ()
    with pytest.raises(InputError):
        make_drift_stream([])


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(1.0 / 3.0) == "0.3333333333"
    assert format_value(7) == "7"
    assert format_value("x") == "x"


def test_allocation_csv_round_trip(tmp_path):
    topo = line3()
    coms = [Commodity("A", "C", 9.0), Commodity("B", "C", 2.0)]
    from pathfair.model import PathSet
    inst = build_instance(topo, coms, PathSet.from_lists([[(0, 1)], [(1,)]]))
    alloc = Allocation.from_rates(inst, np.array([3.125, 1.875]))
    out = tmp_path / "alloc.csv"
    write_allocation_csv(out, inst, alloc, meta={"iterations": 12, "runtime_s": 0.5})
    text = out.read_text()
    assert text.startswith("path_id,commodity,rate_mbps\n")
    assert "# iterations=12 runtime_s=0.5" in text

    rates = read_allocation_rates(out, inst)
    assert rates == pytest.approx(alloc.rates, rel=1e-9)
    sums = read_allocation_sums(out)
    assert sums == {"A→C": pytest.approx(3.125), "B→C": pytest.approx(1.875)}

    (tmp_path / "short.csv").write_text("path_id,commodity,rate_mbps\n0,A→C,1.0\n")
    with pytest.raises(InputError, match="missing rates"):
        read_allocation_rates(tmp_path / "short.csv", inst)
    (tmp_path / "oob.csv").write_text("path_id,commodity,rate_mbps\n9,A→C,1.0\n")
    with pytest.raises(InputError, match="out of range"):
        read_allocation_rates(tmp_path / "oob.csv", inst)


def experiment_config(**over):
    cfg = {
        "topology": {"random": {"num_nodes": 6, "seed": 2}},
        "demands": {"gravity": {"total_volume": 120.0}},
        "paths": {"k": 1},
        "solvers": ["pathfair", "waterfill"],
        "reference": "maxmin-singlepath",
        "alpha_target": 0,
        "max_iterations": 2000,
        "deterministic": True,
        "dao_horizon_s": 0.0,
    }
    cfg.update(over)
    return cfg


def test_experiment_rows_and_zero_drift_identity(tmp_path):
    rows = run_experiment(experiment_config(), tmp_path / "out")
    assert [r["solver"] for r in rows] == ["pathfair", "waterfill"]
    for row in rows:
        assert row["runtime_s"] == 0.0
        assert 0.0 < row["optimality"] <= 1.0
        # No drift events and a zero horizon: DAO must equal optimality.
        assert row["dao"] == row["optimality"]
        assert row["total_flow_mbps"] > 0.0
    report = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert report[0] == ",".join(REPORT_COLUMNS)
    assert len(report) == 3


def test_experiment_is_byte_reproducible(tmp_path):
    run_experiment(experiment_config(), tmp_path / "a")
    run_experiment(experiment_config(), tmp_path / "b")
    assert (tmp_path / "a" / "report.csv").read_bytes() == \
        (tmp_path / "b" / "report.csv").read_bytes()


def test_experiment_traces_and_snapshot_files(tmp_path):
    topo_csv = "src,dst,capacity_mbps,weight,undirected\nA,B,10,1,true\n"
    write(tmp_path, "topo.csv", topo_csv)
    write(tmp_path, "dem.csv", "src,dst,demand_mbps\nA,B,20\n")
    snaps = [{"t_seconds": 0.0}, {"t_seconds": 30.0, "capacities": {"A→B": 5.0}}]
    write(tmp_path, "snaps.json", json.dumps(snaps))
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({
        "topology": "topo.csv",
        "demands": "dem.csv",
        "paths": {"k": 1},
        "snapshots": "snaps.json",
        "solvers": ["pathfair"],
        "reference": "maxmin-singlepath",
        "alpha_target": 0,
        "deterministic": True,
        "dao_horizon_s": 0.0,
        "trace": True,
    }))
    rows = run_experiment(cfg_path, tmp_path / "out")
    assert len(rows) == 2
    assert (tmp_path / "out" / "trace_s0_pathfair.csv").exists()
    header = (tmp_path / "out" / "trace_s0_pathfair.csv").read_text().splitlines()[0]
    assert header.split(",")[0] == "iteration"
    # Capacity drops to 5 at the second snapshot; the solve tracks it.
    assert rows[1]["total_flow_mbps"] == pytest.approx(5.0, abs=0.2)


def test_experiment_missing_keys(tmp_path):
    with pytest.raises(InputError, match="missing 'topology'"):
        run_experiment({"demands": {"gravity": {"total_volume": 1.0}}}, tmp_path)
    with pytest.raises(InputError, match="unknown solver"):
        run_experiment(experiment_config(solvers=["simplex"]), tmp_path)


def test_default_experiment_is_complete():
    assert DEFAULT_EXPERIMENT["solvers"] == ["pathfair", "waterfill"]
    assert DEFAULT_EXPERIMENT["reference"] == "maxmin-singlepath"
    for key in ("alpha_target", "gamma", "beta0", "max_iterations",
                "adapt_beta", "warm_start", "theta", "deterministic"):
        assert key in DEFAULT_EXPERIMENT
