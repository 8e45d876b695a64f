"""Exact and brute-force reference computations.

Everything here is an independent check on the sampled mechanisms and
algorithms: exhaustive optima, exact medians with randomized tie bias,
the binomial-plus-discrete-Laplace at-threshold probability, exact
exponential-mechanism weights, empirical privacy estimation, and the
hard-family separation check.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .csp_core import (
    Constraint,
    CspInstance,
    ResourceCapError,
    WeightedGraph,
    assignment_blocks,
    compile_values,
    mu,
)

BRUTE_FORCE_CAP = 26
MEDIAN_ENUMERATION_CAP = 22
PACKING_CAP = 24
EM_DISTRIBUTION_CAP = 1 << 20

__all__ = [
    "AuditReport",
    "BucketRow",
    "AdversarialReport",
    "PackingFamily",
    "brute_force_opt",
    "exact_median_theta",
    "threshold_pmf",
    "at_threshold_prob",
    "exact_em_distribution",
    "wilson_interval",
    "empirical_epsilon",
    "adversarial_single_constraint",
    "verify_packing_separation",
]


def brute_force_opt(
    problem: CspInstance | WeightedGraph, cap: int = BRUTE_FORCE_CAP
) -> tuple[float, np.ndarray]:
    """Exact maximum value and a first-found argmax assignment.

    For graphs, the search space is halved by pinning the last vertex to
    side -1 (cut values are invariant under a global flip).
    """
    n = problem.n
    if n > cap:
        raise ResourceCapError(f"brute_force_opt: n = {n} exceeds cap {cap}")
    halve = isinstance(problem, WeightedGraph) and n >= 1
    search_vars = list(range(n - 1 if halve else n))
    evaluate = compile_values(problem, list(range(n)))
    best_val = -np.inf
    best_row: np.ndarray | None = None
    if not search_vars:
        row = np.full(n, -1, dtype=np.int8)
        return float(evaluate(row[None, :])[0]), row
    for _, block in assignment_blocks(len(search_vars)):
        if halve:
            full = np.concatenate(
                [block, np.full((block.shape[0], 1), -1, dtype=np.int8)], axis=1
            )
        else:
            full = block
        vals = evaluate(full)
        idx = int(np.argmax(vals))
        if vals[idx] > best_val:
            best_val = float(vals[idx])
            best_row = full[idx].copy()
    return best_val, best_row


def _constraint_q_pmf(c: Constraint, j: int) -> dict[Fraction, Fraction]:
    """Exact pmf of the centered-predicate derivative at j under a uniform
    assignment of the remaining scope variables."""
    others = [i for i in c.scope if i != j]
    if c.is_xor and len(others) >= 1:
        return {Fraction(1, 2): Fraction(1, 2), Fraction(-1, 2): Fraction(1, 2)}
    if c.is_xor:
        return {Fraction(c.b, 2): Fraction(1)}
    pmf: dict[Fraction, Fraction] = {}
    weight = Fraction(1, 2 ** len(others))
    for mask in range(2 ** len(others)):
        vals_p, vals_m = [], []
        bit = 0
        for i in c.scope:
            if i == j:
                vals_p.append(1)
                vals_m.append(-1)
            else:
                v = 1 if (mask >> bit) & 1 else -1
                vals_p.append(v)
                vals_m.append(v)
                bit += 1
        q = Fraction(c.evaluate_local(vals_p) - c.evaluate_local(vals_m), 2)
        pmf[q] = pmf.get(q, Fraction(0)) + weight
    return pmf


def _convolve(a: dict[Fraction, Fraction], b: dict[Fraction, Fraction]) -> dict[Fraction, Fraction]:
    out: dict[Fraction, Fraction] = {}
    for va, pa in a.items():
        for vb, pb in b.items():
            key = va + vb
            out[key] = out.get(key, Fraction(0)) + pa * pb
    return out


def _sum_q_pmf(
    active_constraints: Sequence[Constraint], j: int, cap: int
) -> dict[Fraction, Fraction]:
    """Exact pmf of the summed derivative at j over uniform fixed variables.

    Per-constraint convolution when the fixed scopes are pairwise disjoint
    (guaranteed on triangle-free instances); otherwise joint enumeration
    over the union, capped at `cap` variables.
    """
    others = [tuple(i for i in c.scope if i != j) for c in active_constraints]
    disjoint = True
    seen: set[int] = set()
    for o in others:
        if any(i in seen for i in o):
            disjoint = False
            break
        seen.update(o)
    if disjoint:
        pmf: dict[Fraction, Fraction] = {Fraction(0): Fraction(1)}
        for c in active_constraints:
            pmf = _convolve(pmf, _constraint_q_pmf(c, j))
        return pmf
    union = sorted(set(i for o in others for i in o))
    if len(union) > cap:
        raise ResourceCapError(
            f"exact_median_theta: joint support {len(union)} exceeds cap {cap}"
        )
    pmf = {}
    weight = Fraction(1, 2 ** len(union))
    pos = {i: t for t, i in enumerate(union)}
    for mask in range(2 ** len(union)):
        fixed = {i: (1 if (mask >> pos[i]) & 1 else -1) for i in union}
        total = Fraction(0)
        for c in active_constraints:
            vals_p, vals_m = [], []
            for i in c.scope:
                if i == j:
                    vals_p.append(1)
                    vals_m.append(-1)
                else:
                    vals_p.append(fixed[i])
                    vals_m.append(fixed[i])
            total += Fraction(c.evaluate_local(vals_p) - c.evaluate_local(vals_m), 2)
        pmf[total] = pmf.get(total, Fraction(0)) + weight
    return pmf


def exact_median_theta(
    active_constraints: Sequence[Constraint],
    j: int,
    cap: int = MEDIAN_ENUMERATION_CAP,
) -> tuple[float, float]:
    """Median of the summed derivative at j, plus the tie bias that makes the
    three-way sign comparison exactly unbiased.

    Returns (theta, gamma): compare the realized sum s against theta and
    output +1 if s > theta, -1 if s < theta, and +1 with probability gamma
    on a tie. Then Pr[+1] = 1/2 exactly. An empty active set yields
    (0, 1/2), a fair coin.
    """
    if not active_constraints:
        return 0.0, 0.5
    pmf = _sum_q_pmf(active_constraints, j, cap)
    support = sorted(pmf)
    cdf = Fraction(0)
    theta = support[-1]
    for v in support:
        cdf += pmf[v]
        if cdf >= Fraction(1, 2):
            theta = v
            break
    above = sum((p for v, p in pmf.items() if v > theta), Fraction(0))
    at = pmf[theta]
    gamma = (Fraction(1, 2) - above) / at
    assert Fraction(0) <= gamma <= Fraction(1)
    return float(theta), float(gamma)


def _discrete_laplace_pmf(epsilon: float, tail: float = 1e-15) -> tuple[np.ndarray, np.ndarray]:
    """Truncated, renormalized pmf of the integer Laplace law at epsilon.

    Truncates where the two-sided tail mass drops below `tail` and
    redistributes the removed mass proportionally.
    """
    q = math.exp(-epsilon)
    zmax = max(1, math.ceil(math.log(2.0 / (tail * (1.0 + q))) / epsilon))
    z = np.arange(-zmax, zmax + 1)
    pmf = (1.0 - q) / (1.0 + q) * q ** np.abs(z)
    return z, pmf / pmf.sum()


def threshold_pmf(d: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact pmf of Bin(d-1, 1/2) plus independent integer Laplace noise.

    Returns (support, probabilities) with the noise truncated at total tail
    mass 1e-15 and renormalized.
    """
    if d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    z, zp = _discrete_laplace_pmf(epsilon)
    x = np.arange(d)
    xp = stats.binom.pmf(x, d - 1, 0.5)
    support = np.arange(z[0] + x[0], z[-1] + x[-1] + 1)
    probs = np.convolve(zp, xp)
    assert probs.shape == support.shape
    return support, probs


def at_threshold_prob(d: int, epsilon: float) -> float:
    """Probability that the noisy binomial sits exactly at ceil((d-1)/2)."""
    support, probs = threshold_pmf(d, epsilon)
    target = -(-(d - 1) // 2)
    return float(probs[np.searchsorted(support, target)])


def exact_em_distribution(
    scores: Sequence[float], epsilon: float, sensitivity: float
) -> np.ndarray:
    """Normalized exponential-mechanism weight vector for the given scores."""
    s = np.asarray([float(v) for v in scores], dtype=np.float64)
    if s.size == 0:
        raise ValueError("candidate set must be nonempty")
    if s.size > EM_DISTRIBUTION_CAP:
        raise ResourceCapError(f"candidate count {s.size} exceeds cap {EM_DISTRIBUTION_CAP}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    logw = (epsilon / (2.0 * sensitivity)) * s
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def wilson_interval(hits: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = hits / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class BucketRow:
    """Per-bucket audit evidence."""

    label: str
    hits_a: int
    hits_b: int
    log_ratio: float | None
    reliable: bool
    lower_bound_only: bool
    lower_bound: float | None = None


@dataclass(frozen=True)
class AuditReport:
    """Empirical privacy estimate over a bucketed output space."""

    epsilon_hat: float
    ci_lower: float
    ci_upper: float
    trials: int
    coarsening: str
    buckets: tuple[BucketRow, ...] = field(repr=False, default=())

    def __post_init__(self) -> None:
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if not self.ci_lower <= self.epsilon_hat <= self.ci_upper:
            raise ValueError("audit interval must bracket the point estimate")


def empirical_epsilon(
    mechanism: Callable,
    input_a,
    input_b,
    trials: int,
    rng,
    coarsen: Callable | None = None,
    coarsening_label: str = "identity",
    confidence: float = 0.95,
    min_hits: int = 100,
    max_buckets: int = 64,
) -> AuditReport:
    """Estimates the worst-case output log-likelihood ratio between two inputs.

    `mechanism(input, generator, trials)` must return an iterable of
    per-trial outputs; `coarsen` maps each output to a hashable bucket
    label (identity with tuple conversion when omitted). The estimate is
    the max over buckets observed on both sides of |ln(p_a / p_b)|, with
    a confidence interval propagated from per-side Wilson intervals of
    the maximizing bucket. Buckets seen on one side only are reported as
    lower-bound-only evidence, never as an infinite estimate; buckets
    with fewer than `min_hits` on either side are flagged unreliable.
    """
    from .dp_mechanisms import as_generator

    if trials <= 0:
        raise ValueError("trials must be positive")

    def bucketize(out) -> object:
        if coarsen is not None:
            return coarsen(out)
        if isinstance(out, np.ndarray):
            return tuple(out.tolist())
        return out

    gen = as_generator(rng)
    counts_a = Counter(bucketize(o) for o in mechanism(input_a, gen, trials))
    counts_b = Counter(bucketize(o) for o in mechanism(input_b, gen, trials))
    labels = sorted(set(counts_a) | set(counts_b), key=repr)
    if len(labels) > max_buckets:
        raise ResourceCapError(
            f"audit produced {len(labels)} buckets, cap is {max_buckets}"
        )
    rows: list[BucketRow] = []
    best: tuple[float, int, int] | None = None
    for label in labels:
        ka, kb = counts_a.get(label, 0), counts_b.get(label, 0)
        reliable = ka >= min_hits and kb >= min_hits
        if ka > 0 and kb > 0:
            log_ratio = abs(math.log((ka / trials) / (kb / trials)))
            rows.append(BucketRow(repr(label), ka, kb, log_ratio, reliable, False))
            if reliable and (best is None or log_ratio > best[0]):
                best = (log_ratio, ka, kb)
        else:
            hi, lo = (ka, kb) if ka > 0 else (kb, ka)
            lo_hi = wilson_interval(lo, trials, confidence)[1]
            hi_lo = wilson_interval(hi, trials, confidence)[0]
            bound = math.log(hi_lo / lo_hi) if hi_lo > 0 and lo_hi > 0 else 0.0
            rows.append(
                BucketRow(repr(label), ka, kb, None, False, True, max(0.0, bound))
            )
    if best is None:
        for row in rows:
            if row.log_ratio is not None and (
                best is None or row.log_ratio > best[0]
            ):
                best = (row.log_ratio, row.hits_a, row.hits_b)
    if best is None:
        return AuditReport(0.0, 0.0, 0.0, trials, coarsening_label, tuple(rows))
    eps_hat, ka, kb = best
    la, ua = wilson_interval(ka, trials, confidence)
    lb, ub = wilson_interval(kb, trials, confidence)
    raw_lo = math.log(la / ub)
    raw_hi = math.log(ua / lb)
    if raw_lo <= 0.0 <= raw_hi:
        ci_lower = 0.0
    else:
        ci_lower = min(abs(raw_lo), abs(raw_hi))
    ci_upper = max(abs(raw_lo), abs(raw_hi))
    ci_lower = min(ci_lower, eps_hat)
    ci_upper = max(ci_upper, eps_hat)
    return AuditReport(eps_hat, ci_lower, ci_upper, trials, coarsening_label, tuple(rows))


@dataclass(frozen=True)
class AdversarialReport:
    """Outcome of the worst-case single-constraint probe."""

    satisfaction_prob: float
    bound: float
    std_error: float
    chosen: Constraint
    empty_instance_mass: float
    passes: bool


def adversarial_single_constraint(
    mechanism: Callable,
    n: int,
    candidates: Sequence[Constraint],
    epsilon: float,
    trials: int,
    rng,
    kind: str = "kxor",
) -> AdversarialReport:
    """Probes a mechanism with its least favorable single-constraint instance.

    Runs the mechanism on the empty instance, measures the output mass each
    candidate constraint would receive on its scope, picks the candidate
    with the least mass, then measures satisfaction probability on the
    one-constraint instance and compares it against
    1 - e^{-epsilon} * (1 - mu) plus three standard errors.

    `mechanism(instance, generator, trials)` must return an array of
    shape (trials, n) with +-1 entries.
    """
    from .dp_mechanisms import as_generator

    if not candidates:
        raise ValueError("need at least one candidate constraint")
    scopes = {c.scope for c in candidates}
    if len(scopes) != 1:
        raise ValueError("all candidates must share one scope")
    gen = as_generator(rng)
    empty = CspInstance(n=n, constraints=(), kind=kind)
    outs = np.asarray(mechanism(empty, gen, trials))
    masses = []
    for c in candidates:
        sat = np.fromiter(
            (c.evaluate(row) for row in outs), dtype=np.float64, count=outs.shape[0]
        )
        masses.append(float(sat.mean()))
    pick = int(np.argmin(masses))
    chosen = candidates[pick]
    phi = CspInstance(n=n, constraints=(chosen,), kind=kind)
    outs2 = np.asarray(mechanism(phi, gen, trials))
    sat2 = np.fromiter(
        (chosen.evaluate(row) for row in outs2), dtype=np.float64, count=outs2.shape[0]
    )
    p = float(sat2.mean())
    se = max(math.sqrt(max(p * (1.0 - p), 0.0) / trials), math.sqrt(0.25 / trials) / 10)
    bound = 1.0 - math.exp(-epsilon) * (1.0 - mu(chosen))
    return AdversarialReport(
        satisfaction_prob=p,
        bound=bound,
        std_error=se,
        chosen=chosen,
        empty_instance_mass=masses[pick],
        passes=p <= bound + 3.0 * se,
    )


@dataclass(frozen=True)
class PackingFamily:
    """A family of half-size vertex supports with bounded pairwise overlap.

    Each support S induces the weighted complete bipartite graph between S
    and its complement with per-edge weight 1/(64 n epsilon); every vertex
    then has weighted degree exactly 1/(128 epsilon).
    """

    n: int
    supports: tuple[tuple[int, ...], ...]
    epsilon: float

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError("n must be even and at least 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        sets = [frozenset(s) for s in self.supports]
        for i, s in enumerate(sets):
            if len(s) != self.n // 2:
                raise ValueError(f"support {i} has size {len(s)} != n/2")
            if not all(0 <= v < self.n for v in s):
                raise ValueError(f"support {i} out of range")
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                common = len(sets[i] & sets[j])
                if not (self.n / 8 < common < 3 * self.n / 8):
                    raise ValueError(
                        f"supports {i},{j} overlap in {common} vertices, "
                        f"outside ({self.n / 8}, {3 * self.n / 8})"
                    )

    @property
    def weight(self) -> float:
        return 1.0 / (64.0 * self.n * self.epsilon)

    @property
    def degree(self) -> float:
        return 1.0 / (128.0 * self.epsilon)

    def graph(self, index: int) -> WeightedGraph:
        s = set(self.supports[index])
        rest = [v for v in range(self.n) if v not in s]
        w = self.weight
        edges = tuple((u, v, w) for u in sorted(s) for v in rest)
        return WeightedGraph(n=self.n, edges=edges)


def verify_packing_separation(
    family: PackingFamily, cap: int = PACKING_CAP
) -> tuple[bool, tuple[int, int, int] | None]:
    """Exhaustively checks the cross-support value separation.

    For every cut R and every ordered pair of distinct supports (S, T):
    if the S-graph value of R exceeds 7nd/16 then the T-graph value must
    be at most 6nd/16. Returns (True, None) or (False, (R_mask, S, T))
    with the first violation; R_mask encodes membership of vertices
    0..n-2 on the +1 side (vertex n-1 pinned to -1).

    Cut counts are compared as exact integers: with half-size supports,
    value thresholds 7nd/16 and 6nd/16 equal weight * 7n^2/32 and
    weight * 6n^2/32.
    """
    n = family.n
    if n > cap:
        raise ResourceCapError(f"verify_packing_separation: n = {n} exceeds cap {cap}")
    if len(family.supports) < 2:
        return True, None
    masks = np.arange(1 << (n - 1), dtype=np.uint64)
    half = n // 2
    counts = []
    for s in family.supports:
        smask = np.uint64(sum(1 << v for v in s if v < n - 1))
        a = np.bitwise_count(masks & smask).astype(np.int64)
        r = np.bitwise_count(masks).astype(np.int64)
        # vertex n-1 is on the -1 side; adjust |S| seen on the +1 side
        cut = a * ((n - half) - (r - a)) + (half - a) * (r - a)
        counts.append(cut)
    hi = 7 * n * n  # compare 32*count vs 7n^2 -> count*32 > 7n^2
    lo = 6 * n * n
    for i, ci in enumerate(counts):
        over = ci * 32 > hi
        if not np.any(over):
            continue
        for j, cj in enumerate(counts):
            if i == j:
                continue
            bad = over & (cj * 32 > lo)
            if np.any(bad):
                r_mask = int(masks[np.argmax(bad)])
                return False, (r_mask, i, j)
    return True, None
