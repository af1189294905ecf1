"""Command-line front end.

Subcommands: decompose, solve-cp, round, experiment, verify. Exit codes:
0 all checks pass, 1 a check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .cp import build_spanner_instance
from .decomposition import (
    PaddedParams,
    clustering_csv,
    sample_decomposition_centralized,
    sample_decomposition_distributed,
    validate_clustering,
)
from .distributed import SolverConfig, concentration_report, solve_distributed
from .graphs import read_graph
from .harness import (
    ExperimentConfig,
    generate_graph,
    generate_instance,
    run_experiment,
)
from .lp import check_feasibility, solve_global_oracle
from .rounding import output_csv, round_spanner, verify_stretch


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="graph file (overrides --gen)")
    p.add_argument("--gen", default="gnp", choices=("gnp", "cycle", "grid", "file"))
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--problem", default="directed-spanner",
                   choices=("directed-spanner", "low-degree-spanner", "dsn", "raw-cp"))
    p.add_argument("--objective", help="linear-sum | max-degree[:mode] | p-norm:<p>")


def _config(args) -> ExperimentConfig:
    gen = "file" if args.graph else args.gen
    return ExperimentConfig(
        problem=args.problem, gen=gen, n=args.n, p=args.p, k=args.k,
        epsilon=args.epsilon, trials=args.trials, seed=args.seed,
        out=args.out, graph_path=args.graph, objective=args.objective,
    )


def cmd_decompose(args) -> int:
    config = _config(args)
    g = read_graph(args.graph) if args.graph else generate_graph(config, args.seed)
    params = PaddedParams(k=args.k, epsilon=args.epsilon, n=g.n)
    failures = 0
    for trial in range(max(1, args.trials)):
        seed = args.seed + trial
        central = sample_decomposition_centralized(g, params, seed, permutation="ids")
        dist, transcript = sample_decomposition_distributed(g, params, seed)
        try:
            validate_clustering(g, params, dist)
        except Exception as exc:  # noqa: BLE001 - report and count
            print(f"trial {trial}: invariant violation: {exc}")
            failures += 1
            continue
        if not np.array_equal(central.assignment, dist.assignment):
            print(f"trial {trial}: distributed != centralized assignment")
            failures += 1
            continue
        print(f"trial {trial}: clusters={len(dist.centers)} "
              f"rounds={transcript.rounds_elapsed}")
        if args.out:
            path = args.out if args.trials <= 1 else f"{args.out}.{trial}"
            with open(path, "w", encoding="ascii", newline="\n") as fh:
                fh.write(clustering_csv(dist))
    return 1 if failures else 0


def cmd_solve_cp(args) -> int:
    config = _config(args)
    g, instance = generate_instance(config, args.seed)
    run = solve_distributed(instance, SolverConfig(epsilon=args.epsilon, seed=args.seed))
    oracle = solve_global_oracle(instance)
    rep = concentration_report(run, instance)
    feas = check_feasibility(instance, run.solution.x)
    ratio = run.solution.value / oracle.value if oracle.value > 0 else 1.0
    print(f"n={g.n} m={g.m} D={instance.D} t={len(run.records)}")
    print(f"CP*={oracle.value:.6f} g(x~)={run.solution.value:.6f} ratio={ratio:.6f}")
    print(f"rounds={run.transcript.rounds_elapsed} "
          f"concentration={rep.pass_fraction:.3f} feasible={feas.feasible}")
    ok = ratio <= 1 + args.epsilon + 1e-6 and (not rep.all_pass or feas.feasible)
    return 0 if ok else 1


def cmd_round(args) -> int:
    config = _config(args)
    g, instance = generate_instance(config, args.seed)
    oracle = solve_global_oracle(instance)
    depth = args.k if config.problem != "dsn" else instance.D
    out = round_spanner(g, oracle.x, depth, args.seed)
    ok, violated = verify_stretch(g, out.edges, instance)
    print(f"|E_out|={len(out.edges)} roots={len(out.roots)} stretch_ok={ok}")
    if violated:
        print(f"violated demands: {violated[:10]}")
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(output_csv(g, out))
    return 0 if ok else 1


def cmd_experiment(args) -> int:
    config = _config(args)
    report = run_experiment(config)
    agg = report.aggregates()
    for key in sorted(agg):
        print(f"{key}: {agg[key]}")
    bad = [r for r in report.final_rows()
           if r.ratio > 1 + config.epsilon + 1e-6]
    return 1 if bad else 0


def cmd_verify(args) -> int:
    if not args.graph:
        print("error: verify needs --graph", file=sys.stderr)
        return 2
    g = read_graph(args.graph)
    if args.problem == "directed-spanner":
        instance = build_spanner_instance(g, args.k)
    else:
        config = _config(args)
        _, instance = generate_instance(config, args.seed)
    with open(args.edges, "r", encoding="ascii") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    # accept either the graph file format (with header) or bare `u v` pairs
    if lines and len(lines[0]) == 3 and lines[0][2] in ("directed", "undirected"):
        lines = lines[1:]
    chosen = [g.edge_index[(int(a), int(b))] for a, b, *_ in lines]
    ok, violated = verify_stretch(g, chosen, instance)
    print(f"checked {len(instance.demands)} demands; "
          f"{'all satisfied' if ok else f'{len(violated)} violated'}")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="padspan",
        description="Padded decompositions, distributed network-design CP "
                    "solving, and spanner rounding at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("decompose", cmd_decompose),
        ("solve-cp", cmd_solve_cp),
        ("round", cmd_round),
        ("experiment", cmd_experiment),
        ("verify", cmd_verify),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "verify":
            p.add_argument("--edges", required=True, help="edge list file to verify")
        p.set_defaults(fn=fn)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
