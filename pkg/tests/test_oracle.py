import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from speclab.models import MarkovModel, ModelPair, generate_pair
from speclab.oracle import (
    TooLarge,
    bound_K,
    bound_properties,
    exact_expected_tau,
    exact_output_distribution,
    gbv_block_sum,
    gbv_exact_report,
)
from speclab.probability import RandomSource
from speclab.verifiers import draft_rows, score_rows, verify_spectr_gbv


def frac_bound(p_row, q_row, L, K):
    """Independent exact-rational evaluation of the acceptance-length bound
    for an order-0 pair."""
    total = Fraction(0)
    V = len(p_row)
    for i in range(1, L + 1):
        for blk in itertools.product(range(V), repeat=i):
            pj = math.prod((p_row[t] for t in blk), start=Fraction(1))
            qj = math.prod((q_row[t] for t in blk), start=Fraction(1))
            if qj == 0:
                continue
            s = min(Fraction(pj, qj), Fraction(1))
            total += qj * (1 - (1 - s) ** K)
    return total


class TestBound:
    def test_matched_models_bound_is_L(self, matched_pair):
        for K in (1, 2, 5):
            assert abs(bound_K(matched_pair, 3, K) - 3.0) < 1e-12

    def test_single_draft_bound_is_min_joint_sum(self, canonical_pair):
        assert abs(bound_K(canonical_pair, 3, 1) - gbv_block_sum(canonical_pair, 3)) < 1e-12

    def test_canonical_values(self, canonical_pair):
        p_row = (Fraction(1, 2), Fraction(1, 2))
        q_row = (Fraction(4, 5), Fraction(1, 5))
        assert frac_bound(p_row, q_row, 2, 2) == Fraction("1.64984375")
        assert frac_bound(p_row, q_row, 2, 1) == Fraction("1.31")
        assert abs(bound_K(canonical_pair, 2, 2) - 1.64984375) < 1e-12
        assert abs(bound_K(canonical_pair, 2, 1) - 1.31) < 1e-12

    def test_guard(self):
        pair = generate_pair(8, 1, 0, 1.0, 0.5)
        with pytest.raises(TooLarge):
            bound_K(pair, 8, 2)

    def test_random_instances_match_rational_oracle(self):
        gen = np.random.Generator(np.random.PCG64(44))
        for _ in range(5):
            raw_p = [Fraction(int(x), 100) for x in (30, 30, 40)]
            perm = gen.permutation(3)
            raw_q = [raw_p[i] for i in perm]
            p = MarkovModel(3, 0, np.array([[float(x) for x in raw_p]]))
            q = MarkovModel(3, 0, np.array([[float(x) for x in raw_q]]))
            pair = ModelPair(p, q)
            K = int(gen.integers(1, 4))
            want = float(frac_bound(raw_p, raw_q, 2, K))
            assert abs(bound_K(pair, 2, K) - want) < 1e-12


class TestBoundProperties:
    def test_strictly_increasing_when_models_differ(self, canonical_pair):
        rep = bound_properties(canonical_pair, 2, [1, 2, 4, 8, 16, 32, 64])
        assert rep["strictly_increasing"]
        assert rep["all_below_L"]
        assert rep["gaps_decreasing"]
        assert rep["final_gap_to_L"] < 0.01

    def test_matched_models_saturate(self, matched_pair):
        # degenerate case: the bound sits at L for every K and the strictness
        # flag treats saturation at L as converged rather than a violation
        rep = bound_properties(matched_pair, 2, [1, 2, 4])
        assert all(abs(b - 2.0) < 1e-12 for b in rep["bounds"])
        assert rep["final_gap_to_L"] < 1e-12


class TestEventTree:
    def test_single_draft_expected_tau_equals_bound(self, canonical_pair):
        got = exact_expected_tau(canonical_pair, 2, 1)
        assert abs(got - 1.31) < 1e-12
        for seed in range(4):
            pair = generate_pair(3, 1, seed, 1.0, 0.5)
            assert abs(exact_expected_tau(pair, 2, 1) - bound_K(pair, 2, 1)) < 1e-9

    def test_matched_models_single_draft(self, matched_pair):
        report = exact_output_distribution(matched_pair, 3, 1)
        assert abs(report.expected_tau - 3.0) < 1e-12
        assert report.max_marginal_dev < 1e-12
        assert all(tau == 3 for (tau, _t) in report.leaves)

    def test_single_draft_tree_matches_gbv_tree(self):
        for seed in range(4):
            pair = generate_pair(3, 1, seed + 10, 1.0, 0.4)
            a = exact_output_distribution(pair, 2, 1)
            b = gbv_exact_report(pair, 2)
            assert abs(a.expected_tau - b.expected_tau) < 1e-12
            keys = set(a.leaves) | set(b.leaves)
            for key in keys:
                assert abs(a.leaves.get(key, 0.0) - b.leaves.get(key, 0.0)) < 1e-12
            for blk, (got, claimed) in a.lemma_masses.items():
                got_b, claimed_b = b.lemma_masses[blk]
                assert abs(got - got_b) < 1e-12
                assert abs(claimed - claimed_b) < 1e-12

    def test_leaf_mass_conserved(self, canonical_pair):
        for K in (1, 2, 3):
            r = exact_output_distribution(canonical_pair, 2, K)
            assert r.max_leafsum_err < 1e-12
            assert abs(sum(r.leaves.values()) - 1.0) < 1e-12
            assert r.marginal_sums_max_err < 1e-9

    def test_single_draft_preserves_target_and_identity(self):
        for seed in range(4):
            pair = generate_pair(2, 1, seed + 3, 1.0, 0.5)
            r = exact_output_distribution(pair, 3, 1)
            assert r.max_marginal_dev < 1e-9
            assert r.lemma_max_dev < 1e-9
            assert abs(r.expected_tau - r.bound) < 1e-9

    def test_two_iteration_single_draft_exact(self):
        for seed in range(3):
            pair = generate_pair(2, 1, seed + 30, 1.0, 0.5)
            r = exact_output_distribution(pair, 2, 1, iterations=2)
            assert r.max_marginal_dev_two_iter < 1e-9

    def test_multi_draft_known_gap(self, canonical_pair):
        # regression pin for the measured multi-draft behavior of the
        # sequential scan: the enumerated tree sits well below the bound
        r = exact_output_distribution(canonical_pair, 2, 2)
        assert abs(r.expected_tau - 1.4113080297674724) < 1e-12
        assert 0.07 < r.max_marginal_dev < 0.08
        assert 0.07 < r.lemma_max_dev < 0.08

    def test_guard(self):
        pair = generate_pair(3, 1, 0, 1.0, 0.5)
        with pytest.raises(TooLarge):
            exact_expected_tau(pair, 5, 3)


class TestOracleMatchesVerifier:
    def test_leaf_frequencies_match_monte_carlo(self, canonical_pair):
        """The verifier (production path) and the event tree (oracle path)
        are independent implementations; their leaf laws must agree."""
        report = exact_output_distribution(canonical_pair, 2, 2)
        rng = RandomSource(314)
        n = 50_000
        counts: dict = {}
        for _ in range(n):
            drafts = draft_rows(canonical_pair.draft_conditional, 2, 2, rng)
            scores = score_rows(drafts, canonical_pair.target_conditional)
            out, _ = verify_spectr_gbv(drafts, scores, rng)
            key = (out.tau, out.t)
            counts[key] = counts.get(key, 0) + 1
        for key, mass in report.leaves.items():
            emp = counts.get(key, 0) / n
            se = math.sqrt(max(mass * (1 - mass), 1e-6) / n)
            assert abs(emp - mass) < 5 * se, (key, emp, mass)
