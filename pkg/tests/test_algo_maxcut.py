import math

import numpy as np
import pytest

from privcsp.algo_maxcut import (
    GENERAL_BUDGET_FRACTIONS,
    MATCHING_EM_BUDGET,
    MATCHING_EM_SENSITIVITY,
    UNBOUNDED_BUDGET_FRACTIONS,
    Cut,
    MatchingState,
    budget_ledger,
    dp_maxcut_general,
    dp_maxcut_unbounded,
    dp_shearer,
    dp_shearer_batch,
    matched_edge_cut_probability,
    matching_em_cut,
    mutual_choice_matching,
    shearer_baseline,
    shearer_batch,
)
from privcsp.csp_core import WeightedGraph, cut_value
from privcsp.dp_mechanisms import RngStream
from privcsp.generators import gen_triangle_free_graph


def gen(seed=0):
    return RngStream(seed, 0).generator()


def cycle(n):
    return WeightedGraph(n=n, edges=tuple((i, (i + 1) % n, 1.0) for i in range(n)))


def k33():
    return WeightedGraph(
        n=6, edges=tuple((i, 3 + j, 1.0) for i in range(3) for j in range(3))
    )


def edge_cut_freqs(graph, rows):
    u, v, _ = graph.edge_arrays()
    return (rows[:, u] != rows[:, v]).mean(axis=0)


class TestCutAndLedger:
    def test_cut_validation(self):
        with pytest.raises(ValueError):
            Cut(side=(1, 0))
        c = Cut.from_array(np.array([1, -1]))
        assert c.value(WeightedGraph(n=2, edges=((0, 1, 1.0),))) == 1.0

    def test_matching_state_validation(self):
        with pytest.raises(ValueError):
            MatchingState(choices=(1, 0, 1), edges=((0, 1), (1, 2)))

    def test_budget_fractions_exact(self):
        assert sum(UNBOUNDED_BUDGET_FRACTIONS) == 1
        assert sum(GENERAL_BUDGET_FRACTIONS) == 1

    def test_ledger_sums_to_epsilon(self):
        for name, eps in (("dp_maxcut_unbounded", 0.7), ("dp_maxcut_general", 0.09)):
            stages = budget_ledger(name, eps)
            assert sum(b for _, b in stages) == pytest.approx(eps, rel=1e-12)
        with pytest.raises(ValueError):
            budget_ledger("shearer", 1.0)

    def test_matched_edge_probability_closed_form(self):
        w = math.exp(MATCHING_EM_BUDGET / (2 * MATCHING_EM_SENSITIVITY))
        assert matched_edge_cut_probability() == pytest.approx(
            w / (1 + w), abs=1e-12
        )


class TestShearerBaseline:
    def test_rejects_weighted(self):
        g = WeightedGraph(n=2, edges=((0, 1, 2.0),))
        with pytest.raises(ValueError):
            shearer_baseline(g, gen())

    def test_isolated_vertex_uniform(self):
        g = WeightedGraph(n=3, edges=((0, 1, 1.0),))
        rows = shearer_batch(g, gen(1), 100_000)
        assert abs(rows[:, 2].mean()) < 0.015

    def test_single_edge_exact(self):
        # exhaustive over both colorings: distinct first colors force the
        # first coloring (cut), equal first colors force the second
        # (cut with probability 1/2), so Pr[cut] = 3/4 exactly
        g = WeightedGraph(n=2, edges=((0, 1, 1.0),))
        rows = shearer_batch(g, gen(2), 200_000)
        p = float(edge_cut_freqs(g, rows)[0])
        sigma = math.sqrt(0.75 * 0.25 / rows.shape[0])
        assert abs(p - 0.75) < 3.5 * sigma

    def test_per_edge_bound(self):
        for graph in (cycle(6), k33()):
            deg = graph.degree_counts()
            rows = shearer_batch(graph, gen(3), 100_000)
            freqs = edge_cut_freqs(graph, rows)
            sigma = 0.5 / math.sqrt(rows.shape[0])
            for (u, v, _), p in zip(graph.edges, freqs):
                bound = (
                    0.5
                    + 1.0 / (8.0 * math.sqrt(2.0 * deg[u]))
                    + 1.0 / (8.0 * math.sqrt(2.0 * deg[v]))
                )
                assert p > bound - 3.5 * sigma

    def test_single_run_shape(self):
        out = shearer_baseline(cycle(4), gen(4))
        assert out.shape == (4,) and set(np.unique(out)) <= {-1, 1}


class TestDpShearer:
    def test_positive_eps_required(self):
        with pytest.raises(ValueError):
            dp_shearer(cycle(4), 0.0, gen())

    def test_rejects_weighted(self):
        g = WeightedGraph(n=2, edges=((0, 1, 0.5),))
        with pytest.raises(ValueError):
            dp_shearer(g, 1.0, gen())

    def test_single_edge_exact(self):
        # closed form from the noisy comparison: with
        # a = Pr[zeta <= 0] = (1 + p0) / 2 and p0 the integer Laplace
        # mass at zero for eps/2, Pr[cut] = 1/4 + a/2
        eps = 1.0
        p0 = (math.exp(eps / 2) - 1) / (math.exp(eps / 2) + 1)
        a = (1 + p0) / 2
        target = 0.25 + a / 2
        g = WeightedGraph(n=2, edges=((0, 1, 1.0),))
        rows = dp_shearer_batch(g, eps, gen(5), 200_000)
        p = float(edge_cut_freqs(g, rows)[0])
        sigma = math.sqrt(target * (1 - target) / rows.shape[0])
        assert abs(p - target) < 3.5 * sigma

    def test_advantage_on_cycles(self):
        for eps in (0.5, 1.0):
            graph = cycle(20)
            rows = dp_shearer_batch(graph, eps, gen(6), 50_000)
            freqs = edge_cut_freqs(graph, rows)
            sigma = 0.5 / math.sqrt(rows.shape[0])
            assert np.all(freqs > 0.5 + 3 * sigma)

    def test_large_eps_matches_baseline_on_odd_degrees(self):
        # on odd-degree graphs zero noise reproduces the baseline rule
        # exactly (no ties exist), so the cut-size laws must agree
        graph = k33()
        trials = 100_000
        base = shearer_batch(graph, gen(7), trials)
        noisy = dp_shearer_batch(graph, 50.0, gen(8), trials)
        u, v, _ = graph.edge_arrays()
        base_sizes = (base[:, u] != base[:, v]).sum(axis=1)
        noisy_sizes = (noisy[:, u] != noisy[:, v]).sum(axis=1)
        hist_a = np.bincount(base_sizes, minlength=10) / trials
        hist_b = np.bincount(noisy_sizes, minlength=10) / trials
        assert 0.5 * np.abs(hist_a - hist_b).sum() <= 0.02

    def test_determinism(self):
        a = dp_shearer(cycle(6), 1.0, gen(9))
        b = dp_shearer(cycle(6), 1.0, gen(9))
        assert np.array_equal(a, b)


class TestDpMaxcutUnbounded:
    def test_high_part_empty_at_moderate_eps(self):
        # threshold 10000/eps^2 dwarfs any small graph degree
        graph = cycle(12)
        x = dp_maxcut_unbounded(graph, 1.0, gen(10))
        assert x.shape == (12,)

    def test_positive_advantage(self):
        graph = cycle(16)
        vals = np.array(
            [
                cut_value(graph, dp_maxcut_unbounded(graph, 1.0, g))
                for g in (RngStream(11, t).generator() for t in range(20_000))
            ]
        )
        se = vals.std() / math.sqrt(vals.size)
        # fair coin between uniform (m/2) and dp_shearer (> m/2)
        assert vals.mean() > graph.m / 2 + 3 * se

    def test_positive_eps_required(self):
        with pytest.raises(ValueError):
            dp_maxcut_unbounded(cycle(4), 0.0, gen())


class TestMutualChoiceMatching:
    def test_single_edge_forced(self):
        g = WeightedGraph(n=2, edges=((0, 1, 1.0),))
        state = mutual_choice_matching(g, gen(12))
        assert state.edges == ((0, 1),)

    def test_path_halves(self):
        g = WeightedGraph(n=3, edges=((0, 1, 1.0), (1, 2, 1.0)))
        hits = {(0, 1): 0, (1, 2): 0}
        trials = 50_000
        for t in range(trials):
            state = mutual_choice_matching(g, RngStream(13, t).generator())
            assert len(state.edges) == 1
            hits[state.edges[0]] += 1
        p = hits[(0, 1)] / trials
        assert abs(p - 0.5) < 3.5 * math.sqrt(0.25 / trials)

    def test_matching_property_random_graphs(self):
        rng = gen(14)
        for _ in range(200):
            n = int(rng.integers(4, 15))
            g = gen_triangle_free_graph(
                "random_bipartite", n // 2, n - n // 2,
                int(rng.integers(1, (n // 2) * (n - n // 2) + 1)),
                seed=int(rng.integers(1 << 30)),
            )
            state = mutual_choice_matching(g, rng)
            edge_set = {tuple(sorted((u, v))) for u, v, _ in g.edges}
            for u, v in state.edges:
                assert (u, v) in edge_set

    def test_neighboring_graph_coupling(self):
        # same randomness, one extra edge: only the endpoints' choices can
        # change, so the matchings differ in at most 4 edges
        rng = gen(15)
        for trial in range(300):
            n = 12
            g = gen_triangle_free_graph(
                "random_bipartite", 6, 6, 12, seed=int(rng.integers(1 << 30))
            )
            present = {tuple(sorted((u, v))) for u, v, _ in g.edges}
            candidates = [
                (u, 6 + v)
                for u in range(6)
                for v in range(6)
                if (u, 6 + v) not in present
            ]
            extra = candidates[int(rng.integers(len(candidates)))]
            g2 = WeightedGraph(n=n, edges=g.edges + ((extra[0], extra[1], 1.0),))
            seed = int(rng.integers(1 << 30))
            m1 = mutual_choice_matching(g, RngStream(seed, 0).generator())
            m2 = mutual_choice_matching(g2, RngStream(seed, 0).generator())
            diff = set(m1.edges) ^ set(m2.edges)
            assert len(diff) <= 4
            for u, v in diff:
                assert {u, v} & set(extra)


class TestMatchingEmCut:
    def test_matched_edges_cut_at_target(self):
        matching = MatchingState(choices=(1, 0, 3, 2), edges=((0, 1), (2, 3)))
        target = matched_edge_cut_probability()
        trials = 100_000
        rows = np.array(
            [matching_em_cut(4, matching, RngStream(16, t).generator()) for t in range(trials)]
        )
        sigma = math.sqrt(target * (1 - target) / trials)
        for u, v in matching.edges:
            p = np.mean(rows[:, u] != rows[:, v])
            assert abs(p - target) < 3.5 * sigma
        # the unmatched middle pair is cut with probability exactly 1/2
        p_mid = np.mean(rows[:, 1] != rows[:, 2])
        assert abs(p_mid - 0.5) < 3.5 * math.sqrt(0.25 / trials)

    def test_unmatched_vertices_uniform(self):
        matching = MatchingState(choices=(-1, -1, -1), edges=())
        rows = np.array(
            [matching_em_cut(3, matching, RngStream(17, t).generator()) for t in range(50_000)]
        )
        assert np.all(np.abs(rows.mean(axis=0)) < 0.02)


class TestDpMaxcutGeneral:
    def test_eps_range(self):
        with pytest.raises(ValueError):
            dp_maxcut_general(cycle(4), 0.2, 0.0, gen())
        with pytest.raises(ValueError):
            dp_maxcut_general(cycle(4), 0.0, 0.0, gen())
        with pytest.raises(ValueError):
            dp_maxcut_general(cycle(4), 0.05, -1.0, gen())

    def test_runs_without_warning_at_large_alpha(self):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            x = dp_maxcut_general(cycle(8), 0.1, 2.0, gen(18))
        assert x.shape == (8,) and set(np.unique(x)) <= {-1, 1}

    def test_warns_when_utility_guarantee_lapses(self):
        with pytest.warns(UserWarning):
            dp_maxcut_general(cycle(8), 0.1, 0.0, gen(19))

    def test_amplification_budget_honored(self):
        # the inner budget amplified by the subsample rate must stay
        # within the matching stage budget for every allowed epsilon
        for eps in (1e-4, 0.01, 0.05, 0.1):
            for alpha in (0.0, 0.5, 2.0):
                rate = eps ** (1.0 + alpha) / 70.0
                amplified = math.log1p(rate * (math.exp(MATCHING_EM_BUDGET) - 1.0))
                assert amplified <= eps / 6.0 + 1e-12

    def test_determinism(self):
        a = dp_maxcut_general(k33(), 0.1, 2.0, gen(20))
        b = dp_maxcut_general(k33(), 0.1, 2.0, gen(20))
        assert np.array_equal(a, b)
