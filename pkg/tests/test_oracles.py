import math

import numpy as np
import pytest

from privcsp.constants import AT_THRESHOLD_LOWER_C
from privcsp.csp_core import (
    Constraint,
    CspInstance,
    ResourceCapError,
    WeightedGraph,
    all_values,
    assignment_blocks,
    cut_value,
    eval_value,
)
from privcsp.dp_mechanisms import RngStream, randomized_response
from privcsp.oracles import (
    PackingFamily,
    adversarial_single_constraint,
    at_threshold_prob,
    brute_force_opt,
    empirical_epsilon,
    exact_em_distribution,
    exact_median_theta,
    threshold_pmf,
    verify_packing_separation,
    wilson_interval,
)


def gen(seed=0):
    return RngStream(seed, 0).generator()


class TestBruteForceOpt:
    def test_k22(self):
        g = WeightedGraph(
            n=4, edges=tuple((i, 2 + j, 1.0) for i in range(2) for j in range(2))
        )
        val, x = brute_force_opt(g)
        assert val == 4 and cut_value(g, x) == 4

    def test_triangle(self):
        g = WeightedGraph(n=3, edges=((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))
        assert brute_force_opt(g)[0] == 2

    def test_flip_invariance(self):
        g = WeightedGraph(n=4, edges=((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)))
        val, x = brute_force_opt(g)
        assert cut_value(g, -x) == val

    def test_csp_instance(self):
        inst = CspInstance(
            n=3,
            constraints=(Constraint(scope=(0, 1), b=1), Constraint(scope=(1, 2), b=-1)),
            kind="kxor",
        )
        val, x = brute_force_opt(inst)
        assert val == 2 and eval_value(inst, x) == 2

    def test_cap(self):
        with pytest.raises(ResourceCapError):
            brute_force_opt(CspInstance(n=27, constraints=(), kind="kxor"))


class TestExactMedianTheta:
    def test_empty(self):
        assert exact_median_theta([], 0) == (0.0, 0.5)

    def test_single_xor(self):
        theta, gamma = exact_median_theta([Constraint(scope=(0, 1), b=1)], 0)
        # two-point distribution at +-1/2; the tie rule restores uniformity
        assert theta == -0.5 and gamma == 0.0

    def test_three_independent_xor(self):
        cons = [
            Constraint(scope=(0, 1), b=1),
            Constraint(scope=(0, 2), b=1),
            Constraint(scope=(0, 3), b=-1),
        ]
        theta, gamma = exact_median_theta(cons, 0)
        assert theta == -0.5 and gamma == 0.0

    def test_two_independent_xor(self):
        cons = [Constraint(scope=(0, 1), b=1), Constraint(scope=(0, 2), b=1)]
        theta, gamma = exact_median_theta(cons, 0)
        # sum in {-1, 0, 1} with weights 1/4, 1/2, 1/4; theta 0, gamma 1/2
        assert theta == 0.0 and gamma == 0.5

    def test_sign_exactly_unbiased(self):
        # simulate against the pmf directly for a mixed general case
        table = (0, 1, 1, 1)  # OR-like predicate
        cons = [
            Constraint(scope=(0, 1), table=table),
            Constraint(scope=(0, 2), b=1),
        ]
        theta, gamma = exact_median_theta(cons, 0)
        rng = gen(1)
        trials = 200_000
        fixed = 2 * rng.integers(0, 2, size=(trials, 2)) - 1
        from privcsp.csp_core import derivative_q

        sums = np.array(
            [
                derivative_q(cons[0], 0, {1: int(row[0])})
                + derivative_q(cons[1], 0, {2: int(row[1])})
                for row in fixed
            ]
        )
        tie = rng.random(trials) < gamma
        z = np.where(sums > theta, 1, np.where(sums < theta, -1, np.where(tie, 1, -1)))
        assert abs(z.mean()) < 3.5 / math.sqrt(trials)

    def test_joint_path_on_shared_support(self):
        # two constraints sharing a fixed variable: convolution invalid,
        # joint enumeration must kick in and stay exact
        cons = [Constraint(scope=(0, 1), b=1), Constraint(scope=(0, 1), b=-1)]
        theta, gamma = exact_median_theta(cons, 0)
        # the two derivative terms cancel: sum is identically 0
        assert theta == 0.0 and gamma == 0.5

    def test_joint_cap(self):
        cons = [Constraint(scope=tuple([0] + list(range(1, 13))), b=1),
                Constraint(scope=tuple([0] + list(range(7, 19))), b=1)]
        with pytest.raises(ResourceCapError):
            exact_median_theta(cons, 0, cap=10)


class TestAtThresholdProb:
    def test_degenerate_binomial(self):
        for eps in (0.1, 0.5, 1.0, 2.0):
            target = (math.exp(eps) - 1) / (math.exp(eps) + 1)
            assert at_threshold_prob(1, eps) == pytest.approx(target, abs=1e-12)

    def test_maximal_atom(self):
        for d in (2, 3, 7, 10, 25):
            for eps in (0.1, 1.0):
                support, probs = threshold_pmf(d, eps)
                target = math.ceil((d - 1) / 2)
                at = probs[np.searchsorted(support, target)]
                assert at == pytest.approx(probs.max(), rel=1e-12)

    def test_symmetry(self):
        for d in (3, 5, 8):
            support, probs = threshold_pmf(d, 0.5)
            center = (d - 1) / 2.0
            for s, p in zip(support, probs):
                mirror = center + (center - s)
                idx = np.searchsorted(support, mirror)
                if 0 <= idx < len(support) and support[idx] == mirror:
                    assert p == pytest.approx(probs[idx], rel=1e-9)

    def test_monotone_in_d(self):
        for eps in (0.1, 0.5, 1.0):
            vals = [at_threshold_prob(d, eps) for d in range(1, 51)]
            assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_monotone_in_eps(self):
        for d in (1, 5, 20):
            vals = [at_threshold_prob(d, e) for e in (0.1, 0.3, 0.5, 1.0, 2.0)]
            assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_frozen_scan_constant(self):
        for eps in (0.1, 0.5, 1.0):
            for d in (1, 2, 10, 50):
                bound = AT_THRESHOLD_LOWER_C / math.sqrt(d + 1.0 / eps ** 2)
                assert at_threshold_prob(d, eps) >= bound

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            at_threshold_prob(0, 1.0)
        with pytest.raises(ValueError):
            at_threshold_prob(3, 0.0)


class TestExactEmDistribution:
    def test_two_scores(self):
        probs = exact_em_distribution([1.0, 0.0], 2.0, 1.0)
        assert probs[0] == pytest.approx(math.e / (1 + math.e), rel=1e-12)

    def test_uniform(self):
        probs = exact_em_distribution([5.0] * 7, 3.0, 1.0)
        assert np.allclose(probs, 1 / 7)

    def test_sums_to_one(self):
        rng = gen(2)
        for _ in range(20):
            scores = rng.normal(size=int(rng.integers(1, 50))) * 10
            probs = exact_em_distribution(scores, 1.0, 1.0)
            assert abs(probs.sum() - 1.0) < 1e-12

    def test_utility_bound(self):
        rng = gen(3)
        for _ in range(100):
            size = int(rng.integers(2, 257))
            scores = rng.normal(size=size) * rng.uniform(0.5, 20)
            eps = float(rng.uniform(0.2, 4.0))
            delta = float(rng.uniform(0.5, 2.0))
            probs = exact_em_distribution(scores, eps, delta)
            expected = float(probs @ scores)
            bound = scores.max() - (2 * delta / eps) * (math.log(size) + 1)
            assert expected >= bound - 1e-9

    def test_empty_error(self):
        with pytest.raises(ValueError):
            exact_em_distribution([], 1.0, 1.0)


class TestWilson:
    def test_contains_proportion(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi

    def test_zero_hits_positive_upper(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo <= 1e-12 and hi > 0.0


class TestEmpiricalEpsilon:
    def test_identical_inputs(self):
        def mech(bit, g, t):
            return randomized_response(np.full(t, bit), 1.0, g)

        report = empirical_epsilon(mech, 1, 1, 100_000, gen(4))
        assert report.ci_lower <= 0.05

    def test_randomized_response_converges(self):
        def mech(bit, g, t):
            return randomized_response(np.full(t, bit), 1.0, g)

        report = empirical_epsilon(mech, 1, -1, 400_000, gen(5))
        assert report.ci_lower <= 1.0 <= report.ci_upper + 0.05
        assert abs(report.epsilon_hat - 1.0) < 0.1

    def test_interval_brackets_estimate(self):
        def mech(bit, g, t):
            return randomized_response(np.full(t, bit), 0.5, g)

        report = empirical_epsilon(mech, 1, -1, 50_000, gen(6))
        assert report.ci_lower <= report.epsilon_hat <= report.ci_upper

    def test_one_sided_bucket_not_infinite(self):
        def mech(which, g, t):
            # input "a" can emit a symbol input "b" never does
            if which == "a":
                return np.where(g.random(t) < 0.01, 2, 1)
            return np.ones(t, dtype=int)

        report = empirical_epsilon(mech, "a", "b", 20_000, gen(7))
        assert math.isfinite(report.epsilon_hat)
        rows = [r for r in report.buckets if r.lower_bound_only]
        assert rows and rows[0].lower_bound is not None

    def test_unreliable_flagging(self):
        def mech(bit, g, t):
            return randomized_response(np.full(t, bit), 3.0, g)

        report = empirical_epsilon(mech, 1, -1, 500, gen(8), min_hits=400)
        assert any(not r.reliable for r in report.buckets)

    def test_bucket_cap(self):
        def mech(which, g, t):
            return g.integers(0, 1000, size=t)

        with pytest.raises(ResourceCapError):
            empirical_epsilon(mech, "a", "b", 5_000, gen(9))


class TestAdversarialSingleConstraint:
    def test_uniform_mechanism(self):
        def mech(inst, g, t):
            return 2 * g.integers(0, 2, size=(t, inst.n)) - 1

        candidates = [Constraint(scope=(0, 1), b=1), Constraint(scope=(0, 1), b=-1)]
        report = adversarial_single_constraint(
            mech, 4, candidates, 0.5, 50_000, gen(10)
        )
        assert report.satisfaction_prob == pytest.approx(0.5, abs=0.01)
        assert report.passes

    def test_bound_at_eps_zero(self):
        def mech(inst, g, t):
            return 2 * g.integers(0, 2, size=(t, inst.n)) - 1

        candidates = [Constraint(scope=(0, 1), b=1)]
        report = adversarial_single_constraint(mech, 3, candidates, 0.0, 10_000, gen(11))
        assert report.bound == pytest.approx(0.5)

    def test_scope_mismatch_rejected(self):
        candidates = [Constraint(scope=(0, 1), b=1), Constraint(scope=(1, 2), b=1)]
        with pytest.raises(ValueError):
            adversarial_single_constraint(
                lambda i, g, t: np.ones((t, 3)), 3, candidates, 1.0, 10, gen()
            )


class TestPackingFamily:
    def valid_family(self, n=8):
        return PackingFamily(
            n=n,
            supports=((0, 1, 2, 3), (0, 1, 4, 5), (0, 2, 4, 6)),
            epsilon=0.5,
        )

    def test_weight_and_degree(self):
        fam = self.valid_family()
        assert fam.weight == pytest.approx(1.0 / (64 * 8 * 0.5))
        assert fam.degree == pytest.approx(1.0 / (128 * 0.5))
        g = fam.graph(0)
        assert np.allclose(g.weighted_degrees(), fam.degree)

    def test_duplicate_support_rejected(self):
        with pytest.raises(ValueError):
            PackingFamily(
                n=8, supports=((0, 1, 2, 3), (0, 1, 2, 3)), epsilon=0.5
            )

    def test_size_invariant(self):
        with pytest.raises(ValueError):
            PackingFamily(n=8, supports=((0, 1, 2),), epsilon=0.5)

    def test_overlap_invariant(self):
        # overlap 3 = 3n/8 exactly: must be strict
        with pytest.raises(ValueError):
            PackingFamily(
                n=8, supports=((0, 1, 2, 3), (0, 1, 2, 4)), epsilon=0.5
            )


class TestPackingSeparation:
    def test_vacuous_single_support(self):
        fam = PackingFamily(n=8, supports=((0, 1, 2, 3),), epsilon=0.5)
        assert verify_packing_separation(fam) == (True, None)

    def test_valid_family_passes(self):
        fam = PackingFamily(
            n=8,
            supports=((0, 1, 2, 3), (0, 1, 4, 5), (0, 2, 4, 6)),
            epsilon=0.5,
        )
        ok, ce = verify_packing_separation(fam)
        assert ok and ce is None

    def test_agrees_with_direct_enumeration(self):
        fam = PackingFamily(
            n=8, supports=((0, 1, 2, 3), (0, 1, 4, 5)), epsilon=0.5
        )
        n, w = fam.n, fam.weight
        nd = n * fam.degree
        graphs = [fam.graph(i) for i in range(2)]
        violation = False
        for _, block in assignment_blocks(n - 1):
            for row in block:
                sides = np.concatenate([row, [-1]]).astype(np.int8)
                vals = [cut_value(g, sides) for g in graphs]
                for i in range(2):
                    for j in range(2):
                        if i != j and vals[i] > 7 * nd / 16 and vals[j] > 6 * nd / 16:
                            violation = True
        ok, _ = verify_packing_separation(fam)
        assert ok == (not violation)

    def test_cap(self):
        fam = PackingFamily(
            n=32,
            supports=(tuple(range(16)), tuple(range(8)) + tuple(range(16, 24))),
            epsilon=0.5,
        )
        with pytest.raises(ResourceCapError):
            verify_packing_separation(fam, cap=24)
