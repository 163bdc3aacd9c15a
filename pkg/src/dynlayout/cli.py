"""Command-line entry point: ``dynlayout [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench import bench_matching, compare_convergence
from .dynamics import PhysicsParams
from .engine import Engine, RunConfig
from .graph import GraphError, read_events
from .integrate import IntegrationError
from .scenarios import linear_schedule, scenario_cube, scenario_gnp, scenario_tree

EXIT_INPUT = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynlayout", description=__doc__)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--integrator", choices=("euler", "rk4"), default="rk4")
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--phi", type=float, default=0.1)
    ap.add_argument("--theta", type=float, default=0.7)
    ap.add_argument("--barnes-hut", action="store_true", help="approximate repulsion with a Barnes-Hut tree")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, choices=(2, 3), default=3)
    ap.add_argument("--K", type=float, default=1.0)
    ap.add_argument("--f0", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--damping", type=float, default=2.0)
    ap.add_argument("--frame-damping", type=float, default=2.0)
    ap.add_argument("--gravity", type=float, default=0.0)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--events", metavar="FILE", help="JSON Lines edit stream ('-' for stdin)")
    src.add_argument("--scenario", choices=("cube", "gnp", "tree"))
    ap.add_argument("--size", type=int, default=10, help="scenario size (cube side, gnp n, tree count)")
    ap.add_argument("--random-init", action="store_true", help="randomize positions after the first batch")
    ap.add_argument("--events-per-step", type=int, default=1)
    ap.add_argument("--frames", metavar="OUT")
    ap.add_argument("--frame-stride", type=int, default=1)
    ap.add_argument("--no-diagnostics", action="store_true", help="omit V and T from frames")
    ap.add_argument("--steps", type=int, default=10_000, help="step budget")
    ap.add_argument("--bench-matching", action="store_true")
    ap.add_argument("--bench-sizes", default="1000,10000,100000")
    ap.add_argument("--bench-degrees", default="2,3,4")
    ap.add_argument("--compare-convergence", action="store_true")
    ap.add_argument("--compare-seeds", default="0")
    ap.add_argument("--check-equilibrium", type=float, metavar="TOL")
    ap.add_argument("--report", metavar="FILE", help="write the JSON report here instead of stdout")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> RunConfig:
    params = PhysicsParams(
        K=args.K, f0=args.f0, eps=args.eps, damping=args.damping,
        damping_alpha=args.frame_damping, damping_beta=args.frame_damping, phi=args.phi,
        gravity=args.gravity, dim=args.dim, theta=args.theta, barnes_hut=args.barnes_hut,
    )
    return RunConfig(
        levels=args.levels, integrator=args.integrator, dt=args.dt, params=params, seed=args.seed,
        max_steps=args.steps, frame_stride=args.frame_stride, events_per_step=args.events_per_step,
        instrument=True, diagnostics=not args.no_diagnostics,
    )


def load_events(args):
    if args.scenario == "cube":
        return scenario_cube(args.size)
    if args.scenario == "gnp":
        return scenario_gnp(args.size, linear_schedule(100.0, 4.0 / args.size), duration=100.0, seed=args.seed)
    if args.scenario == "tree":
        return scenario_tree(args.size, seed=args.seed)
    if args.events:
        if args.events == "-":
            return read_events(sys.stdin)
        with open(args.events) as fh:
            return read_events(fh)
    return []


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        if args.bench_matching:
            sizes = [int(s) for s in args.bench_sizes.split(",")]
            degrees = [int(s) for s in args.bench_degrees.split(",")]
            report = bench_matching(sizes, degrees, seed=args.seed)
        else:
            events = load_events(args)
            if args.compare_convergence:
                seeds = [int(s) for s in args.compare_seeds.split(",")]
                report = compare_convergence(config, events, seeds)
            else:
                report = run(config, events, args)
    except (GraphError, OSError) as exc:
        print(f"dynlayout: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationError, AssertionError, ValueError) as exc:
        print(f"dynlayout: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = json.dumps(report, indent=2)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def run(config: RunConfig, events, args) -> dict:
    engine = Engine(config)
    if args.random_init:
        first = [e for e in events if e.t is None or e.t <= 0]
        engine.apply(first)
        engine.randomize()
        events = [e for e in events if not (e.t is None or e.t <= 0)]
    if args.frames:
        with open(args.frames, "w") as fh:
            return engine.run(events, fh, args.check_equilibrium)
    return engine.run(events, None, args.check_equilibrium)


if __name__ == "__main__":
    sys.exit(main())
