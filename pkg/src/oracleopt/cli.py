"""Command-line entry point: run experiments, generate instances, verify certificates.

Exit codes: 0 on a converged run (or a passing verification), 2 when the
iteration cap was hit, 1 on error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import combinatorial as comb
from .certificates import certificate_from_text, verify_certificate
from .harness import load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oracle-opt",
        description="Iterative linear optimization over separation oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configured experiment")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--problem", choices=("matching", "stableset", "synthetic-ball", "synthetic-polytope"))
    run.add_argument("--method", choices=("polar", "general", "cutloop"))
    run.add_argument("--frequency", type=int)
    run.add_argument("--init", choices=("standard", "optimal"))
    run.add_argument("--initial-constraints", dest="initial_constraints", choices=("upper_bound", "basic"))
    run.add_argument("--iters", type=int)
    run.add_argument("--stop", choices=("auto", "lp1pct", "gap", "cap"))
    run.add_argument("--epsilon", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--nodes", type=int)
    run.add_argument("--triangles", type=int)
    run.add_argument("--density", type=float)
    run.add_argument("--dim", type=int)
    run.add_argument("--radius", type=float)
    run.add_argument("--center-offset", dest="center_offset", type=float)
    run.add_argument("--max-set-size", dest="max_set_size", type=int)
    run.add_argument("--graph", dest="graph_file")

    gen = sub.add_parser("gen", help="generate a triangle-union instance")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--triangles", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    ver = sub.add_parser("verify", help="verify a serialized certificate")
    ver.add_argument("--certificate", required=True)
    ver.add_argument("--instance", help="DIMACS graph the certificate refers to")
    ver.add_argument("--problem", choices=("matching", "stableset"), default="matching")
    return parser


def _cmd_run(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "problem",
            "method",
            "frequency",
            "init",
            "initial_constraints",
            "iters",
            "stop",
            "epsilon",
            "seed",
            "out",
            "nodes",
            "triangles",
            "density",
            "dim",
            "radius",
            "center_offset",
            "max_set_size",
            "graph_file",
        )
        if getattr(args, key, None) is not None
    }
    config = load_config(args.config, overrides)
    summary, trace_path = run_experiment(config)
    status = "converged" if summary.converged else "iteration cap hit"
    print(
        f"{summary.problem} {summary.method} seed={summary.seed}: "
        f"{summary.iterations} iterations, value {summary.gamma:.6g}, "
        f"bound {summary.bound:.6g} ({status})"
    )
    if trace_path:
        print(f"trace: {trace_path}")
    return 0 if summary.converged else 2


def _cmd_gen(args) -> int:
    graph = comb.generate_triangle_instance(args.nodes, args.triangles, args.seed)
    text = comb.to_dimacs(graph, comments=[f"seed={args.seed} triangles={args.triangles}"])
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"wrote {graph.n_nodes} nodes, {graph.n_edges} edges to {args.out}")
    return 0


def _row_matches_instance(name: str, cons, graph: comb.Graph, problem: str) -> bool:
    """Structural validity of a named certificate row for the given instance."""
    kind, _, payload = name.partition(":")
    if kind == "zero":
        return bool(np.allclose(cons.a, 0.0) and abs(cons.b - 1.0) <= 1e-9)
    if kind == "ub":
        j = int(payload)
        dim = graph.n_edges if problem == "matching" else graph.n_nodes
        e = np.zeros(dim)
        e[j] = 1.0
        return bool(np.allclose(cons.a, e, atol=1e-9) and abs(cons.b - 1.0) <= 1e-9)
    if kind == "degree" and problem == "matching":
        ref = comb.degree_constraint(graph, int(payload))
        return bool(np.allclose(cons.a, ref.a, atol=1e-9) and abs(cons.b - ref.b) <= 1e-9)
    if kind == "oddset" and problem == "matching":
        nodes = [int(v) for v in payload.split("|")]
        if len(nodes) < 3 or len(nodes) % 2 == 0:
            return False
        ref = comb.oddset_constraint(graph, nodes)
        return bool(np.allclose(cons.a, ref.a, atol=1e-9) and abs(cons.b - ref.b) <= 1e-9)
    if kind == "clique" and problem == "stableset":
        nodes = [int(v) for v in payload.split("|")]
        adj = graph.adjacency()
        if not all(adj[u, v] for u in nodes for v in nodes if u != v):
            return False
        ref = comb.clique_constraint(graph, nodes)
        return bool(np.allclose(cons.a, ref.a, atol=1e-9) and abs(cons.b - ref.b) <= 1e-9)
    if kind == "edge" and problem == "stableset":
        u, v = (int(s) for s in payload.split("|"))
        if (min(u, v), max(u, v)) not in graph.edges:
            return False
        ref = np.zeros(graph.n_nodes)
        ref[u] = ref[v] = 1.0
        return bool(np.allclose(cons.a, ref, atol=1e-9) and abs(cons.b - 1.0) <= 1e-9)
    return False


def _cmd_verify(args) -> int:
    with open(args.certificate, encoding="utf-8") as fh:
        cert = certificate_from_text(fh.read())
    report = verify_certificate(cert)
    ok = report.passed
    print(f"aggregation checks: {'pass' if ok else 'FAIL ' + ','.join(report.failures())}")

    if args.instance:
        with open(args.instance, encoding="utf-8") as fh:
            graph = comb.parse_dimacs(fh.read())
        bad = [
            cons.name
            for cons, mult in cert.rows
            if abs(mult) > 1e-12
            and not _row_matches_instance(cons.name, cons, graph, args.problem)
        ]
        if bad:
            ok = False
            print(f"rows not valid for the instance: {', '.join(bad)}")
        else:
            print("all used rows are valid for the instance")
    print(f"claimed bound: {cert.claimed_bound:.17g}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_verify(args)
    except Exception as exc:  # surface a clean message, reserve 1 for errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
