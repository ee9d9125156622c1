"""Fair multipath traffic allocation.

A splitting solver for alpha-fair rate allocation over fixed path sets,
with closed-form block updates, an adaptive penalty weight, and a fairness
continuation schedule that lands on max-min. Ships with exact reference
oracles, baselines, feasibility projection, instance generators, and a
config-driven experiment harness.
"""

from ._reduce import get_threads, set_threads
from .controller import (IterationTrace, Residuals, SolveResult, SolverConfig,
                         SolverError, solve)
from .harness import (DriftEvent, DriftStream, Snapshot, base_snapshot,
                      gravity_demands, k_shortest_paths, make_drift_stream,
                      parse_demands, parse_inputs, parse_paths,
                      parse_snapshots, parse_topology, random_topology,
                      read_allocation_rates, read_allocation_sums,
                      run_experiment, state_at, write_allocation_csv)
from .kernels import KernelError, SolverState, solve_sum_equation, utility
from .model import (Commodity, InputError, Instance, PathSet, Topology,
                    ViolationReport, build_instance, build_topology,
                    commodity_sums, edge_loads, validate_allocation,
                    with_conditions)
from .oracles import (Allocation, KKTReport, MetricConfig, OracleDomainError,
                      dao_evaluate, default_theta, exact_bruteforce_tiny,
                      exact_maxmin_singlepath, kkt_check_proportional,
                      optimality_from_sums, optimality_metric,
                      waterfill_baseline)
from .projection import project, score_paths

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "Commodity",
    "DriftEvent",
    "DriftStream",
    "InputError",
    "Instance",
    "IterationTrace",
    "KKTReport",
    "KernelError",
    "MetricConfig",
    "OracleDomainError",
    "PathSet",
    "Residuals",
    "Snapshot",
    "SolveResult",
    "SolverConfig",
    "SolverError",
    "SolverState",
    "Topology",
    "ViolationReport",
    "base_snapshot",
    "build_instance",
    "build_topology",
    "commodity_sums",
    "dao_evaluate",
    "default_theta",
    "edge_loads",
    "exact_bruteforce_tiny",
    "exact_maxmin_singlepath",
    "get_threads",
    "gravity_demands",
    "k_shortest_paths",
    "kkt_check_proportional",
    "make_drift_stream",
    "optimality_from_sums",
    "optimality_metric",
    "parse_demands",
    "parse_inputs",
    "parse_paths",
    "parse_snapshots",
    "parse_topology",
    "project",
    "random_topology",
    "read_allocation_rates",
    "read_allocation_sums",
    "run_experiment",
    "score_paths",
    "set_threads",
    "solve",
    "solve_sum_equation",
    "state_at",
    "utility",
    "validate_allocation",
    "waterfill_baseline",
    "with_conditions",
    "write_allocation_csv",
]
