"""Command-line interface.

Subcommands: gen, solve, ratio, sweep, audit, verify-hardness.
Exit codes: 0 pass, 1 validation error, 2 acceptance/audit failure,
3 resource cap hit.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .csp_core import (
    Constraint,
    CspInstance,
    ResourceCapError,
    eval_value,
    instance_to_json,
    load_edge_list,
    load_instance,
    save_instance,
)
from .dp_mechanisms import RngStream
from .generators import (
    GenSpec,
    gen_random_kxor,
    gen_single_constraint,
    gen_triangle_free_graph,
)
from .harness import (
    ALGORITHMS,
    AUDIT_MECHANISMS,
    ExperimentConfig,
    audit,
    audit_csv_row,
    estimate_ratio,
    sweep,
    verify_hardness,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FAILURE = 2
EXIT_RESOURCE = 3


def _load_problem(path: str):
    if path.endswith(".edges") or path.endswith(".txt"):
        return load_edge_list(path)
    return load_instance(path)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--eps", type=float, nargs="+", default=[1.0])
    parser.add_argument("--alpha", type=float, default=0.0)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--instance", type=str, default=None)


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        merged = {
            "algorithm": doc.get("algorithm", args.algorithm),
            "eps": tuple(doc.get("eps", args.eps)),
            "trials": doc.get("trials", args.trials),
            "seed": doc.get("seed", args.seed),
            "alpha": doc.get("alpha", args.alpha),
        }
        if "instance" in doc and not args.instance:
            args.instance = doc["instance"]
        return ExperimentConfig(**merged)
    return ExperimentConfig(
        algorithm=args.algorithm,
        eps=tuple(args.eps),
        trials=args.trials,
        seed=args.seed,
        alpha=args.alpha,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privcsp",
        description="Differentially private Max-CSP / Max-Cut experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance file")
    p_gen.add_argument(
        "--kind",
        required=True,
        choices=[
            "kxor",
            "even_cycle",
            "complete_bipartite",
            "random_bipartite",
            "single",
        ],
    )
    p_gen.add_argument("--n", type=int, default=8)
    p_gen.add_argument("--m", type=int, default=8)
    p_gen.add_argument("--k", type=int, default=2)
    p_gen.add_argument("--a", type=int, default=3)
    p_gen.add_argument("--b", type=int, default=3)
    p_gen.add_argument("--sign", type=int, default=1, choices=[-1, 1])
    p_gen.add_argument("--scope", type=int, nargs="+", default=[0, 1])
    p_gen.add_argument("--triangle-free", action="store_true")
    p_gen.add_argument("--max-degree", type=int, default=None)
    _add_common(p_gen)

    p_solve = sub.add_parser("solve", help="run an algorithm once")
    p_solve.add_argument("--algorithm", required=True, choices=sorted(ALGORITHMS))
    p_solve.add_argument("--config", type=str, default=None)
    _add_common(p_solve)

    for name in ("ratio", "sweep"):
        p = sub.add_parser(name, help=f"{name} experiment")
        p.add_argument("--algorithm", required=True, choices=sorted(ALGORITHMS))
        p.add_argument("--config", type=str, default=None)
        _add_common(p)

    p_audit = sub.add_parser("audit", help="empirical privacy audit")
    p_audit.add_argument(
        "--mechanism", required=True, choices=sorted(AUDIT_MECHANISMS)
    )
    _add_common(p_audit)

    p_hard = sub.add_parser("verify-hardness", help="hard-family checks")
    p_hard.add_argument("--n", type=int, default=8)
    p_hard.add_argument("--size", type=int, default=3)
    _add_common(p_hard)

    return parser


def _cmd_gen(args) -> int:
    if args.kind == "kxor":
        spec = GenSpec(
            n=args.n,
            m=args.m,
            k=args.k,
            seed=args.seed,
            triangle_free=args.triangle_free,
            max_degree=args.max_degree,
        )
        problem = gen_random_kxor(spec)
    elif args.kind == "even_cycle":
        problem = gen_triangle_free_graph("even_cycle", args.n)
    elif args.kind == "complete_bipartite":
        problem = gen_triangle_free_graph("complete_bipartite", args.a, args.b)
    elif args.kind == "random_bipartite":
        problem = gen_triangle_free_graph(
            "random_bipartite", args.a, args.b, args.m, seed=args.seed
        )
    else:
        problem = gen_single_constraint(
            args.n, Constraint(scope=tuple(args.scope), b=args.sign)
        )
    if args.out:
        save_instance(problem, args.out)
        kind = "graph" if not isinstance(problem, CspInstance) else problem.kind
        print(f"wrote {args.out}: n={problem.n}, m={problem.m}, kind={kind}")
    else:
        print(instance_to_json(problem))
    return EXIT_OK


def _cmd_solve(args) -> int:
    if not args.instance:
        raise ValueError("solve requires --instance")
    problem = _load_problem(args.instance)
    from .harness import _wants_graph

    runner, want_graph = ALGORITHMS[args.algorithm]
    prob = _wants_graph(problem, want_graph)
    gen = RngStream(args.seed, 0).generator()
    x = np.asarray(runner(prob, args.eps[0], args.alpha, gen))
    print(
        json.dumps(
            {
                "algorithm": args.algorithm,
                "eps": args.eps[0],
                "assignment": [int(v) for v in x],
                "value": eval_value(prob, x),
            }
        )
    )
    return EXIT_OK


def _cmd_ratio(args, use_sweep: bool) -> int:
    config = _config_from_args(args)
    if not args.instance:
        raise ValueError("this command requires --instance (or a config file naming one)")
    problem = _load_problem(args.instance)
    report = sweep(config, problem) if use_sweep else estimate_ratio(config, problem)
    text = report.csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def _cmd_audit(args) -> int:
    report, ok = audit(args.mechanism, args.eps[0], args.trials, args.seed)
    header = "mechanism,eps,trials,eps_hat,ci_lo,ci_hi,coarsening"
    row = audit_csv_row(args.mechanism, args.eps[0], report)
    text = header + "\n" + row + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    if not ok:
        print(
            f"AUDIT FAILURE: ci lower bound {report.ci_lower:.4g} exceeds "
            f"eps {args.eps[0]:.4g}",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_verify_hardness(args) -> int:
    report = verify_hardness(args.n, args.eps[0], args.size, args.seed)
    print(
        json.dumps(
            {
                "n": report.n,
                "eps": report.epsilon,
                "requested": report.requested,
                "generated": report.generated,
                "generation_complete": report.generation_complete,
                "separation_ok": report.separation_ok,
                "counterexample": report.counterexample,
                "opt_ok": report.opt_ok,
            }
        )
    )
    if not report.generation_complete:
        print("generation shortfall: family smaller than requested", file=sys.stderr)
        return EXIT_FAILURE
    if not (report.separation_ok and report.opt_ok):
        print("hardness verification failed", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "ratio":
            return _cmd_ratio(args, use_sweep=False)
        if args.command == "sweep":
            return _cmd_ratio(args, use_sweep=True)
        if args.command == "audit":
            return _cmd_audit(args)
        if args.command == "verify-hardness":
            return _cmd_verify_hardness(args)
        raise ValueError(f"unknown command {args.command!r}")
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
