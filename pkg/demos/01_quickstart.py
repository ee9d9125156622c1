"""
Allocating traffic on a small WAN
=================================

Build a four-node network by hand, describe three traffic demands with
their candidate paths, and let the solver drive the allocation to the
max-min fair point. Everything prints as it goes; run with

    python3 demos/01_quickstart.py
"""

import numpy as np

from pathfair import Commodity, PathSet, SolverConfig, build_topology, build_instance
from pathfair import commodity_sums, edge_loads, solve
from pathfair.oracles import exact_bruteforce_tiny, default_theta, optimality_from_sums

# 1. The network. Rows are (src, dst, capacity_mbps, weight); a fifth
# True adds the reverse edge too. Edge ids are assigned in row order,
# with the reverse edge directly after its forward twin.
topo = build_topology([
    ("sea", "chi", 10.0, 1.0),
    ("sea", "den", 8.0, 1.0),
    ("den", "chi", 8.0, 1.0),
    ("chi", "nyc", 12.0, 1.0),
    ("den", "nyc", 6.0, 1.0),
])
print(f"topology: {topo.num_nodes} nodes, {topo.num_edges} directed edges")

# 2. The demands, each with its admissible paths as tuples of edge ids.
# sea->nyc may ride the northern route (sea-chi-nyc) or detour through
# den; chi->nyc and den->nyc are single-path.
coms = [
    Commodity("sea", "nyc", 9.0),
    Commodity("chi", "nyc", 7.0),
    Commodity("den", "nyc", 5.0),
]
paths = PathSet.from_lists([
    [(0, 3), (1, 2, 3), (1, 4)],
    [(3,)],
    [(4,)],
])
inst = build_instance(topo, coms, paths)
print(f"instance: {inst.num_commodities} commodities over {inst.num_paths} paths")

# 3. Solve. With no alpha_target the controller walks the fairness
# parameter upward until an increment stops changing the answer, which
# certifies the max-min point.
res = solve(inst, SolverConfig())
print(f"\nconverged={res.converged} after {res.iterations} iterations "
      f"(stopped at alpha={res.alpha}, {res.runtime_s:.2f} s)")

for c in range(inst.num_commodities):
    src, dst = coms[c].src, coms[c].dst
    rates = [f"{res.rates[p]:.3f}" for p in range(inst.num_paths)
             if inst.path_com[p] == c]
    print(f"  {src}->{dst}: total {res.sums[c]:.3f} of {coms[c].demand:g} "
          f"demanded, per path [{', '.join(rates)}]")

# 4. Sanity: loads respect capacities and sums match the rate vector.
loads = edge_loads(inst, res.rates)
print("\nedge loads / capacities:")
for e in range(inst.num_edges):
    s, d = topo.edge_names(e)
    print(f"  {s}->{d}: {loads[e]:6.3f} / {topo.capacity[e]:g}")
assert np.all(loads <= inst.capacity + 1e-9)
assert np.allclose(commodity_sums(inst, res.rates), res.sums)

# 5. How fair is it? Compare against the exhaustive grid oracle run in
# max-min mode. The grid is coarse (half a megabit) to keep the
# enumeration around a million points.
ref = exact_bruteforce_tiny(inst, None, grid_step=0.5)
opt = optimality_from_sums(res.sums, ref.sums, default_theta(inst))
print(f"\nmax-min optimality vs grid oracle: {opt:.4f}")
print(f"oracle commodity totals: {np.round(ref.sums, 3)}")
