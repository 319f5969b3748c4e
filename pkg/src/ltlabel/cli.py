"""Command-line interface: ``ltlabel <command> ...``.

Exit codes: 0 success (or an undetermined verdict), 1 formula syntax error,
2 I/O or usage error, 3 bad prefix found, 4 no safe path.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_PARSE, EXIT_IO, EXIT_BAD_PREFIX, EXIT_NO_PATH = 0, 1, 2, 3, 4


def _ints(text: str) -> list[int]:
    return [int(float(t)) for t in text.split(",") if t.strip()]


def _box(text: str) -> tuple[str, list[float]]:
    name, _, coords = text.partition(":")
    vals = [float(v) for v in coords.split(",")]
    if not name or len(vals) != 6:
        raise argparse.ArgumentTypeError("expected NAME:x0,x1,y0,y1,t0,t1")
    return name, vals


def read_trace(path: str, alphabet) -> list[int]:
    """One step per line, comma-separated proposition names; an empty line is the empty set."""
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [alphabet.symbol(n.strip() for n in line.split(",") if n.strip()) for line in lines]


# --------------------------------------------------------------------------
# commands


def cmd_monitor(args) -> int:
    from .buchi import build_monitor, run_monitor
    from .ltl import Alphabet, LtlSyntaxError, parse_ltl

    try:
        alphabet = Alphabet(args.props.split(",")) if args.props else None
        f = parse_ltl(args.formula, alphabet)
    except LtlSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    alphabet = alphabet or Alphabet(sorted(_names(f)))
    try:
        trace = read_trace(args.trace, alphabet)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyError as exc:
        print(f"error: trace uses {exc.args[0]}", file=sys.stderr)
        return EXIT_IO
    verdict = run_monitor(build_monitor(f, alphabet), trace)
    print(verdict)
    return EXIT_BAD_PREFIX if verdict.is_bad else EXIT_OK


def _names(f) -> set[str]:
    from .ltl import propositions_of

    return {p.name for p in propositions_of(f)}


def cmd_build(args) -> int:
    from .abstraction import AbstractionConfig, build_abstraction
    from .bench import bench_config, default_grid

    if args.edges:
        cfg = bench_config(args.edges, grid=default_grid(args.depth))
    else:
        cfg = AbstractionConfig.from_dict(args.abstraction or {})
    overrides = {
        "n_vertices": args.vertices,
        "n_neighbors": args.neighbors,
        "n_roots": args.roots,
        "loop_radius": args.loop_radius,
    }
    cfg = AbstractionConfig.from_dict({**cfg.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    system = build_abstraction(cfg, seed=args.seed)
    system.save(args.out)
    err = system.endpoint_error()
    print(
        json.dumps(
            {"out": str(args.out), "vertices": system.n_vertices, "edges": system.n_edges,
             "max_endpoint_error": float(err.max()) if err.size else 0.0}
        )
    )
    return EXIT_OK


def cmd_label(args) -> int:
    from .abstraction import TransitionSystem, sweep_system
    from .bench import ScenarioConfig, default_grid, generate_scenario
    from .labeling import DensePropMatrix, label_all
    from .workspace import GridSpec, rasterize_boxes

    system = TransitionSystem.load(args.system)
    grid = GridSpec.from_json(Path(args.grid).read_text()) if args.grid else default_grid(args.depth)
    if args.box:
        props: dict[str, list] = {}
        for name, vals in args.box:
            props.setdefault(name, []).append(np.reshape(vals, (3, 2)))
        bitsets = {n: rasterize_boxes(b, grid) for n, b in props.items()}
    else:
        bitsets = generate_scenario(ScenarioConfig(seed=args.seed), grid, args.query)
    M = sweep_system(system, None, grid)
    L = label_all(M, DensePropMatrix.from_bitsets(bitsets), workers=args.workers)
    L.save(args.out)
    counts = dict(zip(L.names, (int(c) for c in L.data.sum(axis=0))))
    print(json.dumps({"out": str(args.out), "edges": L.shape[0], "labeled": counts}))
    return EXIT_OK


def cmd_plan(args) -> int:
    from .buchi import build_monitor
    from .labeling import LabeledGraph
    from .ltl import LtlSyntaxError, parse_ltl
    from .planner import build_product, shortest_safe_path, split_lane_example

    if args.demo:
        graph, formula, start, goal = split_lane_example()
    else:
        if not args.graph:
            print("error: --graph or --demo is required", file=sys.stderr)
            return EXIT_IO
        graph = LabeledGraph.from_json_dict(json.loads(Path(args.graph).read_text()))
        formula, start, goal = None, 0, set()
    formula = args.formula or formula or "true"
    start = args.start if args.start is not None else start
    goal = set(args.goal) if args.goal else goal
    if not goal:
        print("error: --goal is required", file=sys.stderr)
        return EXIT_IO
    try:
        monitor = build_monitor(parse_ltl(formula, graph.alphabet), graph.alphabet)
    except LtlSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    product = build_product(graph, monitor, start)
    if args.dot:
        Path(args.dot).write_text(product.to_dot())
    path = shortest_safe_path(product, goal)
    if path is None:
        print(json.dumps({"path": None}))
        return EXIT_NO_PATH
    print(path.to_json(graph))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ScenarioConfig, build_presets, default_grid, fit_scaling, run_benchmark

    grid = default_grid(args.depth)
    scenario = ScenarioConfig(seed=args.seed)
    presets = build_presets(args.sizes, args.seed, scenario, grid)
    report = run_benchmark(presets, scenario, grid, queries=args.queries, workers=args.workers)
    Path(args.out).write_text(report.to_csv())
    print(report.to_csv(), end="")
    if len(report.sizes) >= 3:
        for name, fit in fit_scaling(report).items():
            print(f"# {name}: slope {fit.slope:.3e} ms/transition, max relative residual {fit.max_residual:.3f}")
    for (n, name), bw in report.bandwidth_estimate.items():
        print(f"# {n} {name}: ~{bw / 1e9:.2f} GB/s index stream (CPU estimate, not comparable to GPU figures)")
    return EXIT_OK


def cmd_bernoulli(args) -> int:
    from .bench import bernoulli_experiment

    r = bernoulli_experiment(args.p_mot, args.p_pred, args.trials, args.n, args.seed)
    print(f"empirical mean {r.mean:.3f}  prediction {r.prediction:.1f}  relative error {r.relative_error:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="ltlabel", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help, formatter_class=fmt)
        p.add_argument("--config", help="JSON file of option values; explicit flags win")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("monitor", cmd_monitor, "Check a finite trace against an LTL safety formula")
    p.add_argument("formula", help="LTL formula, e.g. 'G (a -> X !a)'")
    p.add_argument("trace", help="trace file: one step per line, comma-separated names")
    p.add_argument("--props", default=None, help="comma-separated proposition names (default: those in the formula)")

    p = add("build", cmd_build, "Build a transition system and write it to a file")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")
    p.add_argument("--out", default="system.ltts", help="output file")
    p.add_argument("--edges", type=int, default=None, help="build a benchmark preset with this many transitions")
    p.add_argument("--depth", type=int, default=21, help="grid depth used for preset bounds")
    p.add_argument("--vertices", type=int, default=None, help="vertex budget")
    p.add_argument("--neighbors", type=int, default=None, help="primitives tried per vertex")
    p.add_argument("--roots", type=int, default=None, help="roots sampled per growth round")
    p.add_argument("--loop-radius", type=float, default=None, help="place roots near a loop of this radius")
    p.add_argument("--abstraction", type=json.loads, default=None, help="JSON object of roadmap settings")

    p = add("label", cmd_label, "Label every transition of a system")
    p.add_argument("--system", required=True, help="transition system file")
    p.add_argument("--out", default="labels.csv", help="output (.csv, otherwise packed binary)")
    p.add_argument("--grid", default=None, help="grid JSON file (default: loop workspace)")
    p.add_argument("--depth", type=int, default=21, help="grid depth for the default workspace")
    p.add_argument("--box", type=_box, action="append", default=None,
                   help="proposition box NAME:x0,x1,y0,y1,t0,t1 (repeatable); default: scenario propositions")
    p.add_argument("--seed", type=int, default=0, help="scenario seed")
    p.add_argument("--query", type=int, default=0, help="scenario query index")
    p.add_argument("--workers", type=int, default=None, help="worker threads")

    p = add("plan", cmd_plan, "Cheapest path that keeps a safety monitor alive")
    p.add_argument("--graph", default=None, help="labeled graph JSON")
    p.add_argument("--demo", action="store_true", help="use the built-in split-lane example")
    p.add_argument("--formula", default=None, help="safety formula")
    p.add_argument("--start", type=int, default=None, help="start vertex")
    p.add_argument("--goal", type=_ints, default=None, help="comma-separated goal vertices")
    p.add_argument("--dot", default=None, help="write the product graph in DOT format")

    p = add("bench", cmd_bench, "Time labeling over scenario queries for several system sizes")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")
    p.add_argument("--sizes", type=_ints, default=[10000, 20000, 40000, 80000], help="transition counts")
    p.add_argument("--depth", type=int, default=21, help="grid depth")
    p.add_argument("--queries", type=int, default=150, help="queries per size")
    p.add_argument("--workers", type=int, default=None, help="worker threads")
    p.add_argument("--out", default="bench.csv", help="CSV report")

    p = add("bernoulli", cmd_bernoulli, "Monte-Carlo check of the early-exit scan length")
    p.add_argument("p_pred", type=float, help="proposition occupancy probability")
    p.add_argument("p_mot", type=float, help="swept-volume occupancy probability")
    p.add_argument("--trials", type=int, default=100_000, help="number of rows")
    p.add_argument("--n", type=int, default=None, help="row length (default: 20x the prediction)")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    return parser, subs


def main(argv=None) -> int:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = set(doc) - known
        if unknown:
            print(f"error: unknown config keys {sorted(unknown)}", file=sys.stderr)
            return EXIT_IO
        sp.set_defaults(**doc)
        args = parser.parse_args(argv)
    if args.command in ("build", "bench") and args.seed is None:
        parser.error(f"{args.command} requires --seed")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
