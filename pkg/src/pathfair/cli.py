"""Command-line front end.

Exit codes: 0 on success, 2 on bad input (parse errors, unknown files,
oracle domain errors), 3 when a solve finishes without converging but
still emits a feasible allocation.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import harness
from ._reduce import set_threads
from .controller import SolverConfig, solve
from .kernels import utility
from .model import InputError, build_instance, commodity_sums
from .oracles import (OracleDomainError, default_theta, exact_bruteforce_tiny,
                      exact_maxmin_singlepath, waterfill_baseline)


def _alpha_target(text):
    if text == "maxmin":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not an integer or 'maxmin'") from None
    if value < 0:
        raise argparse.ArgumentTypeError("alpha target must be >= 0")
    return value


def _add_instance_args(p, with_k=True):
    p.add_argument("--topology", required=True, help="topology CSV")
    p.add_argument("--demands", required=True, help="demands CSV")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--paths", help="paths JSON file")
    if with_k:
        group.add_argument("--k", type=int, default=4,
                           help="paths per commodity when --paths is absent")


def _load_instance(args, k=None):
    topology, commodities, paths = harness.parse_inputs(
        args.topology, args.demands, getattr(args, "paths", None))
    if paths is None:
        paths = harness.k_shortest_paths(
            topology, commodities, k if k is not None else args.k)
    return build_instance(topology, commodities, paths)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pathfair",
        description="Fair multipath rate allocation: solver, oracles, "
                    "generators, and experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the decomposition solver")
    _add_instance_args(p)
    p.add_argument("--alpha-target", type=_alpha_target, default=None,
                   metavar="N|maxmin",
                   help="fairness level; 'maxmin' (default) continues until "
                        "the max-min stop rule fires")
    p.add_argument("--gamma", type=float, default=1e-3, help="residual tolerance")
    p.add_argument("--beta0", type=float, default=1.0, help="initial penalty weight")
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--no-adapt", action="store_true",
                   help="disable penalty weight adaptation")
    p.add_argument("--warm-start", metavar="FILE",
                   help="allocation CSV used as the starting point")
    p.add_argument("--trace", metavar="FILE", help="write per-iteration trace CSV")
    p.add_argument("--out", metavar="FILE", help="allocation CSV (default stdout)")
    p.add_argument("--threads", type=int, help="kernel thread count")

    p = sub.add_parser("gen-demands", help="gravity-model demand matrix")
    p.add_argument("--topology", required=True)
    p.add_argument("--total-volume", type=float, required=True)
    p.add_argument("--out", metavar="FILE", help="demands CSV (default stdout)")

    p = sub.add_parser("gen-paths", help="k-shortest path sets")
    p.add_argument("--topology", required=True)
    p.add_argument("--demands", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--out", metavar="FILE", help="paths JSON (default stdout)")

    p = sub.add_parser("experiment", help="run a config-driven experiment")
    p.add_argument("--config", required=True, help="experiment JSON")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("oracle", help="reference allocations")
    _add_instance_args(p)
    p.add_argument("--method", required=True,
                   choices=("waterfill", "maxmin-singlepath", "grid"))
    p.add_argument("--alpha", type=float, default=1.0,
                   help="fairness level for the grid method")
    p.add_argument("--grid-step", type=float,
                   help="grid resolution (default 1%% of max demand)")
    p.add_argument("--out", metavar="FILE", help="allocation CSV (default stdout)")

    p = sub.add_parser("metrics", help="score an allocation against a reference")
    p.add_argument("--alloc", required=True, help="allocation CSV")
    p.add_argument("--ref", required=True, help="reference allocation CSV")
    p.add_argument("--theta", type=float,
                   help="small-demand floor (default 1e-6 of the largest "
                        "reference commodity total)")

    return parser


def _emit(path, writer):
    """Run writer(file_path); path=None streams the result to stdout."""
    if path is not None:
        writer(path)
        return
    with tempfile.NamedTemporaryFile("w+", suffix=".csv", delete=False) as tmp:
        tmp_path = Path(tmp.name)
    try:
        writer(tmp_path)
        sys.stdout.write(tmp_path.read_text(encoding="utf-8"))
    finally:
        tmp_path.unlink(missing_ok=True)


def _cmd_solve(args):
    if args.threads:
        set_threads(args.threads)
    instance = _load_instance(args)
    config = SolverConfig(
        alpha_target=args.alpha_target,
        gamma=args.gamma,
        beta0=args.beta0,
        max_iterations=args.max_iterations,
        adapt=not args.no_adapt,
        trace=bool(args.trace),
    )
    warm = None
    if args.warm_start:
        warm = harness.read_allocation_rates(args.warm_start, instance)
    result = solve(instance, config, warm_start=warm)
    sums = commodity_sums(instance, result.rates)
    alloc = harness.Allocation.from_rates(instance, result.rates, "pathfair")
    meta = {
        "objective": float(np.sum(utility(np.maximum(sums, 1e-12), result.alpha))),
        "alpha": result.alpha,
        "iterations": result.iterations,
        "runtime_s": result.runtime_s,
        "converged": result.converged,
    }
    _emit(args.out, lambda p: harness.write_allocation_csv(p, instance, alloc, meta))
    if args.trace:
        harness._write_trace(args.trace, result.trace)
    if not result.converged:
        print("warning: iteration budget exhausted before convergence; "
              "emitted allocation is feasible but may be short of optimal",
              file=sys.stderr)
        return 3
    return 0


def _cmd_gen_demands(args):
    topology = harness.parse_topology(args.topology)
    commodities = harness.gravity_demands(topology, args.total_volume)

    def writer(path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("src,dst,demand_mbps\n")
            for c in commodities:
                fh.write(f"{c.src},{c.dst},{harness.format_value(c.demand)}\n")

    _emit(args.out, writer)
    return 0


def _cmd_gen_paths(args):
    topology = harness.parse_topology(args.topology)
    commodities = harness.parse_demands(args.demands, topology)
    path_set = harness.k_shortest_paths(topology, commodities, args.k)
    data = {
        c.key: [list(p) for p in path_set.paths[i]]
        for i, c in enumerate(commodities)
    }

    def writer(path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, ensure_ascii=False)
            fh.write("\n")

    _emit(args.out, writer)
    return 0


def _cmd_experiment(args):
    harness.run_experiment(args.config, args.out_dir)
    return 0


def _cmd_oracle(args):
    instance = _load_instance(args)
    if args.method == "waterfill":
        alloc = waterfill_baseline(instance)
    elif args.method == "maxmin-singlepath":
        alloc = exact_maxmin_singlepath(instance)
    else:
        step = args.grid_step
        if step is None:
            step = 0.01 * max((c.demand for c in instance.commodities), default=1.0)
        alloc = exact_bruteforce_tiny(instance, args.alpha, step)
    _emit(args.out, lambda p: harness.write_allocation_csv(p, instance, alloc))
    return 0


def _cmd_metrics(args):
    alloc_sums = harness.read_allocation_sums(args.alloc)
    ref_sums = harness.read_allocation_sums(args.ref)
    if not ref_sums:
        raise InputError(f"{args.ref}: no commodities in reference")
    theta = args.theta
    if theta is None:
        theta = max(1e-6 * max(ref_sums.values()), 1e-6)
    if theta <= 0:
        raise InputError("theta must be > 0")
    keys = sorted(ref_sums)
    ratios = [
        min(alloc_sums.get(key, 0.0) / max(ref_sums[key], theta), 1.0)
        for key in keys
    ]
    print(f"optimality={np.mean(ratios):.10g}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "gen-demands": _cmd_gen_demands,
    "gen-paths": _cmd_gen_paths,
    "experiment": _cmd_experiment,
    "oracle": _cmd_oracle,
    "metrics": _cmd_metrics,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, OracleDomainError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
