"""Experiment orchestration: ratio estimation, epsilon sweeps, privacy
audits, and hardness verification.

Trials run sequentially with per-trial stream ids 0..trials-1, so a
fixed (config, seed) reproduces identical results; the CSV determinism
contract covers every column except wall_ms.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import algo_csp, algo_maxcut
from .csp_core import (
    Constraint,
    CspInstance,
    WeightedGraph,
    cut_value,
    eval_value,
    graph_to_instance,
    instance_to_graph,
    mu,
)
from .dp_mechanisms import RngStream, em_over_assignments, randomized_response
from .oracles import (
    AuditReport,
    brute_force_opt,
    empirical_epsilon,
)

CSV_COLUMNS = (
    "algorithm,eps,alpha,n,m,trials,mean_val,se,opt,ratio,advantage,"
    "seed,config_hash,wall_ms"
)

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ReportRow",
    "ExperimentReport",
    "ALGORITHMS",
    "estimate_ratio",
    "sweep",
    "audit",
    "AUDIT_MECHANISMS",
    "verify_hardness",
]


def _wants_graph(problem, want_graph: bool):
    """Converts between the Max-Cut views as required by an algorithm."""
    if want_graph and isinstance(problem, CspInstance):
        return instance_to_graph(problem)
    if not want_graph and isinstance(problem, WeightedGraph):
        return graph_to_instance(problem)
    return problem


def _run_em_baseline(problem, eps, alpha, gen):
    if isinstance(problem, WeightedGraph):
        deg = problem.degree_counts()
        n = problem.n
    else:
        from .csp_core import degrees

        deg = degrees(problem)
        n = problem.n
    covered = np.flatnonzero(deg > 0)
    x = (2 * gen.integers(0, 2, size=n) - 1).astype(np.int8)
    if covered.size:
        x[covered] = em_over_assignments(problem, covered.tolist(), eps, 1.0, gen)
    return x


def _run_random_baseline(problem, eps, alpha, gen):
    return (2 * gen.integers(0, 2, size=problem.n) - 1).astype(np.int8)


# id -> (runner(problem, eps, alpha, gen) -> assignment, wants_graph)
ALGORITHMS: dict[str, tuple[Callable, bool]] = {
    "alg1": (
        lambda p, e, a, g: algo_csp.alg1_triangle_free_bounded(p, e, g),
        False,
    ),
    "alg2": (lambda p, e, a, g: algo_csp.alg2_partition_kxor(p, e, g), False),
    "alg3": (lambda p, e, a, g: algo_csp.alg3_dp_advrand(p, e, g), False),
    "alg_oddk": (lambda p, e, a, g: algo_csp.alg_oddk_unbounded(p, e, g), False),
    "shearer": (lambda p, e, a, g: algo_maxcut.shearer_baseline(p, g), True),
    "dp_shearer": (lambda p, e, a, g: algo_maxcut.dp_shearer(p, e, g), True),
    "alg5": (lambda p, e, a, g: algo_maxcut.dp_maxcut_unbounded(p, e, g), True),
    "alg6": (lambda p, e, a, g: algo_maxcut.dp_maxcut_general(p, e, a, g), True),
    "em_baseline": (_run_em_baseline, False),
    "random_baseline": (_run_random_baseline, False),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an algorithm, an instance, an epsilon grid."""

    algorithm: str
    eps: tuple[float, ...]
    trials: int
    seed: int
    alpha: float = 0.0
    opt_cap: int = 26

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; "
                f"known: {sorted(ALGORITHMS)}"
            )
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.eps) == 0:
            raise ValueError("epsilon grid must be nonempty")

    def config_hash(self, problem) -> str:
        from .csp_core import instance_to_json

        blob = json.dumps(
            {
                "algorithm": self.algorithm,
                "eps": list(self.eps),
                "trials": self.trials,
                "seed": self.seed,
                "alpha": self.alpha,
                "instance": instance_to_json(problem),
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ReportRow:
    algorithm: str
    eps: float
    alpha: float
    n: int
    m: int
    trials: int
    mean_val: float
    se: float
    opt: float | None
    ratio: float | None
    advantage: float
    seed: int
    config_hash: str
    wall_ms: float

    def csv(self) -> str:
        def fmt(x) -> str:
            if x is None:
                return ""
            if isinstance(x, float):
                return f"{x:.17g}"
            return str(x)

        return ",".join(
            fmt(v)
            for v in (
                self.algorithm,
                self.eps,
                self.alpha,
                self.n,
                self.m,
                self.trials,
                self.mean_val,
                self.se,
                self.opt,
                self.ratio,
                self.advantage,
                self.seed,
                self.config_hash,
                self.wall_ms,
            )
        )


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]
    spearman_advantage_eps: float | None = None

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_COLUMNS + "\n")
        for row in self.rows:
            buf.write(row.csv() + "\n")
        if self.spearman_advantage_eps is not None:
            buf.write(f"# spearman(advantage, eps) = "
                      f"{self.spearman_advantage_eps:.17g}\n")
        return buf.getvalue()


def _baseline_value(problem) -> float:
    """Expected value of a uniform assignment: mu times total weight."""
    if isinstance(problem, WeightedGraph):
        return 0.5 * sum(w for _, _, w in problem.edges)
    return mu(problem) * problem.m


def _run_one_eps(
    config: ExperimentConfig, problem, eps: float, opt: float | None, chash: str
) -> ReportRow:
    runner, want_graph = ALGORITHMS[config.algorithm]
    prob = _wants_graph(problem, want_graph)
    t0 = time.perf_counter()
    values = np.empty(config.trials)
    for t in range(config.trials):
        gen = RngStream(config.seed, t).generator()
        x = runner(prob, eps, config.alpha, gen)
        values[t] = eval_value(prob, np.asarray(x))
    wall_ms = (time.perf_counter() - t0) * 1000.0
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(config.trials)) if config.trials > 1 else 0.0
    size = problem.m
    return ReportRow(
        algorithm=config.algorithm,
        eps=eps,
        alpha=config.alpha,
        n=problem.n,
        m=size,
        trials=config.trials,
        mean_val=mean,
        se=se,
        opt=opt,
        ratio=(mean / opt) if opt else None,
        advantage=mean - _baseline_value(problem),
        seed=config.seed,
        config_hash=chash,
        wall_ms=wall_ms,
    )


def estimate_ratio(config: ExperimentConfig, problem) -> ExperimentReport:
    """Monte-Carlo value estimation over the epsilon grid, with the exact
    optimum and approximation ratio when the instance is small enough."""
    _wants_graph(problem, ALGORITHMS[config.algorithm][1])  # validate kind early
    opt: float | None = None
    if problem.n <= config.opt_cap:
        opt = brute_force_opt(problem, cap=config.opt_cap)[0]
    chash = config.config_hash(problem)
    rows = tuple(_run_one_eps(config, problem, e, opt, chash) for e in config.eps)
    return ExperimentReport(rows=rows)


def sweep(config: ExperimentConfig, problem) -> ExperimentReport:
    """estimate_ratio plus a monotone-trend summary of advantage vs eps."""
    report = estimate_ratio(config, problem)
    spearman = None
    if len(report.rows) >= 2:
        adv = [r.advantage for r in report.rows]
        eps = [r.eps for r in report.rows]
        spearman = float(stats.spearmanr(eps, adv).statistic)
    return ExperimentReport(rows=report.rows, spearman_advantage_eps=spearman)


def _neighboring_delta(a, b) -> int:
    """Number of constraints/edges by which two instances differ."""
    if isinstance(a, WeightedGraph) != isinstance(b, WeightedGraph):
        raise ValueError("pair must share a representation")
    if isinstance(a, WeightedGraph):
        items_a = sorted((min(u, v), max(u, v), w) for u, v, w in a.edges)
        items_b = sorted((min(u, v), max(u, v), w) for u, v, w in b.edges)
    else:
        items_a = sorted((c.scope, c.b, c.table) for c in a.constraints)
        items_b = sorted((c.scope, c.b, c.table) for c in b.constraints)
    from collections import Counter

    ca, cb = Counter(items_a), Counter(items_b)
    return sum((ca - cb).values()) + sum((cb - ca).values())


def _coarsen_default(problem_n: int):
    """Identity bucketing up to 5 variables, (cut value, side of vertex 0)
    beyond that; coarsening only lowers the estimate (post-processing)."""
    if problem_n <= 5:
        return None
    return lambda out: (int(np.sum(out)), int(out[0]))


def _audit_randomized_response(epsilon: float, trials: int, rng) -> AuditReport:
    def mech(bit, gen, t):
        return randomized_response(np.full(t, bit, dtype=np.int64), epsilon, gen)

    return empirical_epsilon(
        mech, 1, -1, trials, rng, coarsening_label="identity"
    )


def _audit_dp_shearer(epsilon: float, trials: int, rng) -> AuditReport:
    g_edge = WeightedGraph(n=2, edges=((0, 1, 1.0),))
    g_none = WeightedGraph(n=2, edges=())
    assert _neighboring_delta(g_edge, g_none) == 1

    def mech(graph, gen, t):
        return [tuple(r) for r in algo_maxcut.dp_shearer_batch(graph, epsilon, gen, t)]

    return empirical_epsilon(
        mech, g_edge, g_none, trials, rng, coarsening_label="full-output"
    )


def _audit_alg1(epsilon: float, trials: int, rng) -> AuditReport:
    inst_a = CspInstance(
        n=4, constraints=(Constraint(scope=(0, 1), b=1),), kind="kxor"
    )
    inst_b = CspInstance(n=4, constraints=(), kind="kxor")
    assert _neighboring_delta(inst_a, inst_b) == 1

    def mech(inst, gen, t):
        return [tuple(r) for r in algo_csp.alg1_batch(inst, epsilon, gen, t)]

    return empirical_epsilon(
        mech, inst_a, inst_b, trials, rng, coarsening_label="full-output"
    )


def _audit_em(epsilon: float, trials: int, rng) -> AuditReport:
    inst_a = CspInstance(
        n=3,
        constraints=(Constraint(scope=(0, 1), b=1),),
        kind="kxor",
    )
    inst_b = CspInstance(
        n=3,
        constraints=(Constraint(scope=(0, 1), b=1), Constraint(scope=(1, 2), b=1)),
        kind="kxor",
    )
    assert _neighboring_delta(inst_a, inst_b) == 1

    def mech(inst, gen, t):
        from .dp_mechanisms import em_over_assignments_batch

        return [
            tuple(r)
            for r in em_over_assignments_batch(inst, [0, 1, 2], epsilon, 1.0, gen, t)
        ]

    return empirical_epsilon(
        mech, inst_a, inst_b, trials, rng, coarsening_label="full-output"
    )


AUDIT_MECHANISMS: dict[str, Callable] = {
    "randomized_response": _audit_randomized_response,
    "dp_shearer": _audit_dp_shearer,
    "alg1": _audit_alg1,
    "em": _audit_em,
}


def audit(mechanism: str, epsilon: float, trials: int, seed: int) -> tuple[AuditReport, bool]:
    """Runs the built-in neighboring-pair audit for a mechanism id.

    Returns (report, ok); ok is False when the confidence interval's
    lower bound exceeds the configured epsilon, the privacy-violation
    signal.
    """
    if mechanism not in AUDIT_MECHANISMS:
        raise ValueError(
            f"unknown audit mechanism {mechanism!r}; known: {sorted(AUDIT_MECHANISMS)}"
        )
    report = AUDIT_MECHANISMS[mechanism](epsilon, trials, RngStream(seed, 0))
    return report, report.ci_lower <= epsilon


def audit_csv_row(mechanism: str, epsilon: float, report: AuditReport) -> str:
    return (
        f"{mechanism},{epsilon:.17g},{report.trials},{report.epsilon_hat:.17g},"
        f"{report.ci_lower:.17g},{report.ci_upper:.17g},{report.coarsening}"
    )


@dataclass(frozen=True)
class HardnessReport:
    n: int
    epsilon: float
    requested: int
    generated: int
    generation_complete: bool
    separation_ok: bool
    counterexample: tuple[int, int, int] | None
    opt_ok: bool


def verify_hardness(n: int, epsilon: float, size: int, seed: int) -> HardnessReport:
    """Generates the hard family and checks the separation property and
    the exact optimum of each member graph."""
    from .generators import gen_hard_family
    from .oracles import verify_packing_separation

    family, complete = gen_hard_family(n, epsilon, size, seed)
    ok, counterexample = verify_packing_separation(family)
    opt_ok = True
    expected = n * family.degree / 2.0
    for i in range(len(family.supports)):
        opt, _ = brute_force_opt(family.graph(i))
        if not math.isclose(opt, expected, rel_tol=1e-9, abs_tol=1e-12):
            opt_ok = False
            break
    return HardnessReport(
        n=n,
        epsilon=epsilon,
        requested=size,
        generated=len(family.supports),
        generation_complete=complete,
        separation_ok=ok,
        counterexample=counterexample,
        opt_ok=opt_ok,
    )
