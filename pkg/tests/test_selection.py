"""Policy selection, fan construction, and continuum synthesis."""

import itertools

import numpy as np
import pytest

from preflearn.belief import (
    Alternative,
    BeliefState,
    PosteriorSampleSet,
    Question,
    answers_for_samples,
    hit_and_run_sample,
    predictive_distribution,
)
from preflearn.catalog import Catalog, synthetic_catalog
from preflearn.channel import (
    DiscreteNoiseChannel,
    PredictiveDistribution,
    channel_equation,
    compute_capacity,
    make_symmetric_channel,
)
from preflearn.errors import (
    ConstructionError,
    InfeasibleTargetError,
    InvalidArgumentError,
)
from preflearn.selection import (
    Box,
    FanConstruction,
    PolicyConfig,
    circular_depth,
    construct_fan_2d,
    construct_question_continuum,
    empirical_arc_mass,
    entropy_pursuit_select,
    knowledge_gradient_scores,
    knowledge_gradient_select,
    misclassification_estimate,
    project_predictive,
    recover_alternatives_2d,
    subsample_indices,
    uniform_arc_mass,
)


def make_belief(d, m=2, alpha=0.7):
    return BeliefState(
        prior_mean=np.zeros(d),
        prior_covariance=np.eye(d),
        channel=make_symmetric_channel(m, alpha),
    )


def gaussian_catalog(rng, count, d):
    feats = rng.standard_normal((count, d))
    return Catalog(tuple(Alternative(f"g{i}", feats[i]) for i in range(count)))


def brute_force_kg_scores(samples, catalog, sub, candidates, eval_candidates, P):
    """Direct enumeration of the expected misclassification for each candidate.

    For every candidate question and signal, recompute every sample's
    hypothetical weight and every evaluation question's weighted-majority
    error from scratch.
    """
    points = samples.samples
    n = points.shape[0]
    m = P.shape[0]
    scores = []
    for cand in candidates:
        X = catalog.question(sub[list(cand)])
        z = answers_for_samples(points, X.feature_matrix())
        u_hat = np.bincount(z, minlength=m) / n
        total = 0.0
        for y in range(m):
            p_signal = float(u_hat @ P[:, y])
            if p_signal <= 0:
                continue
            weights = P[z, y]
            mis_sum = 0.0
            for ev in eval_candidates:
                S = catalog.question(sub[list(ev)])
                w_ans = answers_for_samples(points, S.feature_matrix())
                masses = np.bincount(w_ans, weights=weights, minlength=len(ev))
                mis_sum += 1.0 - masses.max() / weights.sum()
            total += p_signal * (mis_sum / len(eval_candidates))
        scores.append(total)
    return np.array(scores)


class TestPolicyConfig:
    def test_rejects_unknown_policy(self):
        with pytest.raises(InvalidArgumentError):
            PolicyConfig(policy="greedy")

    def test_rejects_small_subsample(self):
        with pytest.raises(InvalidArgumentError):
            PolicyConfig(policy="entropy_pursuit", m=3, subsample_size=2)

    def test_rejects_unknown_keys(self):
        with pytest.raises(InvalidArgumentError):
            PolicyConfig.from_dict({"policy": "entropy_pursuit", "bogus": 1})


class TestEntropyPursuit:
    def test_single_candidate_returned(self, rng):
        catalog = gaussian_catalog(rng, 2, 3)
        belief = make_belief(3)
        samples = hit_and_run_sample(belief, 2_000, seed=1)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=2)
        question, u_hat, score = entropy_pursuit_select(belief, samples, catalog, config)
        assert {a.id for a in question.alternatives} == {"g0", "g1"}

    def test_score_is_phi_of_returned_estimate(self, rng):
        catalog = gaussian_catalog(rng, 30, 3)
        belief = make_belief(3)
        samples = hit_and_run_sample(belief, 2_000, seed=2)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=10, seed=5)
        question, u_hat, score = entropy_pursuit_select(belief, samples, catalog, config)
        assert score == channel_equation(u_hat, belief.channel)

    def test_noiseless_pairwise_picks_most_balanced(self, rng):
        # With a noiseless binary channel, phi is maximized by the candidate
        # whose predictive estimate is closest to (0.5, 0.5); verify against
        # exhaustive per-question recomputation over the same subsample.
        catalog = gaussian_catalog(rng, 40, 4)
        belief = make_belief(4, alpha=1.0)
        samples = hit_and_run_sample(belief, 4_000, seed=3)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=12, seed=9)
        question, u_hat, score = entropy_pursuit_select(
            belief, samples, catalog, config, np.random.default_rng(9)
        )
        sub = subsample_indices(catalog, config, np.random.default_rng(9))
        best_dist = None
        for pair in itertools.combinations(range(len(sub)), 2):
            X = catalog.question(sub[list(pair)])
            u = predictive_distribution(samples, X)
            dist = abs(u.weights[0] - 0.5)
            if best_dist is None or dist < best_dist:
                best_dist = dist
        assert abs(u_hat.weights[0] - 0.5) == pytest.approx(best_dist, abs=1e-12)

    def test_score_never_exceeds_capacity(self, rng):
        catalog = gaussian_catalog(rng, 50, 3)
        belief = make_belief(3, m=3, alpha=0.6)
        samples = hit_and_run_sample(belief, 4_000, seed=4)
        config = PolicyConfig(policy="entropy_pursuit", m=3, subsample_size=10, seed=1)
        _, _, score = entropy_pursuit_select(belief, samples, catalog, config)
        capacity = compute_capacity(belief.channel).capacity_bits
        mc_error = 3.0 / np.sqrt(samples.count)
        assert score <= capacity + mc_error

    def test_asymmetric_channel_enumerates_ordered_questions(self, rng):
        P = DiscreteNoiseChannel(np.array([[0.9, 0.1], [0.3, 0.7]]))
        belief = BeliefState(np.zeros(3), np.eye(3), P)
        samples = hit_and_run_sample(belief, 2_000, seed=5)
        catalog = gaussian_catalog(rng, 10, 3)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=4, seed=2)
        question, u_hat, score = entropy_pursuit_select(belief, samples, catalog, config)
        # orderings are scored separately; flipping the winner must not win
        flipped = Question(tuple(reversed(question.alternatives)))
        u_flip = predictive_distribution(samples, flipped)
        assert channel_equation(u_flip, P) <= score + 1e-12


class TestMisclassification:
    def test_unanimous_is_zero(self, rng):
        catalog = gaussian_catalog(rng, 4, 2)
        points = np.tile([[1.0, 0.0]], (50, 1)) + 0.01 * rng.standard_normal((50, 2))
        ss = PosteriorSampleSet(points, seed=0, burn_in=0, thinning=1)
        X = Question((Alternative("a", [1.0, 0.0]), Alternative("b", [-1.0, 0.0])))
        assert misclassification_estimate(ss, X) == 0.0

    def test_even_split_is_half(self):
        points = np.array([[1.0, 0.0], [-1.0, 0.0]] * 25)
        ss = PosteriorSampleSet(points, seed=0, burn_in=0, thinning=1)
        X = Question((Alternative("a", [1.0, 0.0]), Alternative("b", [-1.0, 0.0])))
        assert misclassification_estimate(ss, X) == 0.5

    def test_weighted_matches_direct_enumeration(self, rng):
        points = rng.standard_normal((200, 3))
        weights = rng.random(200)
        ss = PosteriorSampleSet(points, seed=0, burn_in=0, thinning=1)
        X = Question(
            (
                Alternative("a", rng.standard_normal(3)),
                Alternative("b", rng.standard_normal(3)),
                Alternative("c", rng.standard_normal(3)),
            )
        )
        got = misclassification_estimate(ss, X, weights=weights)
        answers = answers_for_samples(points, X.feature_matrix())
        masses = [weights[answers == z].sum() for z in range(3)]
        expected = 1.0 - max(masses) / weights.sum()
        assert got == pytest.approx(expected, abs=1e-12)


class TestKnowledgeGradient:
    def test_matches_brute_force_small_instance(self, rng):
        catalog = gaussian_catalog(rng, 8, 3)
        belief = make_belief(3, alpha=0.7)
        samples = hit_and_run_sample(belief, 200, seed=42)
        config = PolicyConfig(
            policy="knowledge_gradient", m=2, subsample_size=4, evaluation_size=2, seed=7
        )
        sub, candidates, scores = knowledge_gradient_scores(
            belief, samples, catalog, config, np.random.default_rng(7)
        )
        eval_candidates = list(itertools.combinations(range(4), 2))
        expected = brute_force_kg_scores(
            samples, catalog, sub, candidates, eval_candidates, belief.channel.matrix
        )
        np.testing.assert_allclose(scores, expected, atol=1e-12)
        question, best = knowledge_gradient_select(
            belief, samples, catalog, config, np.random.default_rng(7)
        )
        assert best == pytest.approx(expected.min(), abs=1e-12)
        # the oracle's winner must be indistinguishable from the selected one
        assert expected[int(np.argmin(scores))] <= expected.min() + 1e-12

    def test_noiseless_self_evaluation_is_resolved(self, rng):
        # Two-item catalog: the only question doubles as the only evaluation;
        # a noiseless answer resolves it completely.
        catalog = gaussian_catalog(rng, 2, 3)
        belief = make_belief(3, alpha=1.0)
        samples = hit_and_run_sample(belief, 1_000, seed=2)
        config = PolicyConfig(
            policy="knowledge_gradient", m=2, subsample_size=2, evaluation_size=2
        )
        _, score = knowledge_gradient_select(belief, samples, catalog, config)
        assert score == pytest.approx(0.0, abs=1e-12)

    def test_pure_noise_scores_identical(self, rng):
        catalog = gaussian_catalog(rng, 12, 3)
        belief = make_belief(3, alpha=0.0)
        samples = hit_and_run_sample(belief, 500, seed=3)
        config = PolicyConfig(policy="knowledge_gradient", m=2, subsample_size=6, seed=1)
        _, _, scores = knowledge_gradient_scores(belief, samples, catalog, config)
        assert np.ptp(scores) < 1e-12

    def test_relabel_invariance_under_symmetric_channel(self, rng):
        points = rng.standard_normal((300, 3))
        samples = PosteriorSampleSet(points, seed=0, burn_in=0, thinning=1)
        feats = rng.standard_normal((3, 3))
        catalog = Catalog(tuple(Alternative(f"r{i}", feats[i]) for i in range(3)))
        P = make_symmetric_channel(2, 0.7).matrix
        eval_candidates = list(itertools.combinations(range(3), 2))
        sub = np.arange(3)
        base = brute_force_kg_scores(samples, catalog, sub, [(0, 1)], eval_candidates, P)
        flipped = brute_force_kg_scores(samples, catalog, sub, [(1, 0)], eval_candidates, P)
        assert base[0] == pytest.approx(flipped[0], abs=1e-12)


class TestFanConstruction:
    def test_uniform_measure_equal_targets_give_equal_arcs(self):
        fan = construct_fan_2d(uniform_arc_mass, [1 / 3, 1 / 3, 1 / 3], depth=0.5)
        gaps = np.diff(np.concatenate([fan.angles, [fan.angles[0] + 2 * np.pi]]))
        np.testing.assert_allclose(gaps, 2 * np.pi / 3, atol=1e-9)

    def test_uniform_measure_arc_lengths_proportional_to_targets(self):
        eps = 0.02
        target = [0.5 - eps, 0.25, 0.25 + eps]
        fan = construct_fan_2d(uniform_arc_mass, target, depth=0.5)
        gaps = np.diff(np.concatenate([fan.angles, [fan.angles[0] + 2 * np.pi]]))
        by_component = gaps[list(fan.arc_of_component)]
        np.testing.assert_allclose(by_component, 2 * np.pi * np.asarray(target), atol=1e-2)

    def test_empirical_oracle_realizes_targets(self, rng):
        points = rng.standard_normal((20_000, 2)) + np.array([1.2, -0.4])
        mass = empirical_arc_mass(points)
        depth = circular_depth(points)
        target = np.array([0.5, 0.3, 0.2])
        fan = construct_fan_2d(mass, target, depth)
        question = recover_alternatives_2d(fan, np.zeros(2), Box.unit_cube(np.zeros(2)))
        answers = answers_for_samples(points, question.feature_matrix())
        realized = np.bincount(answers, minlength=3) / len(points)
        se = np.sqrt(target * (1 - target) / len(points))
        np.testing.assert_array_less(np.abs(realized - target), 3 * se + 5e-3)

    def test_clustered_measure_needs_fallback_order(self, rng):
        # Three well-separated clusters defeat the primary anchor orders;
        # the fallback search must still realize the target.
        def cluster(center, width, n):
            ang = center + width * (rng.random(n) - 0.5)
            return np.stack([np.cos(ang), np.sin(ang)], axis=1) * (0.5 + rng.random(n))[:, None]

        points = np.vstack(
            [cluster(0.2, 0.4, 11_000), cluster(2.4, 0.4, 1_400), cluster(5.6, 0.8, 7_600)]
        )
        target = np.array([0.55, 0.3, 0.15])
        fan = construct_fan_2d(empirical_arc_mass(points), target, circular_depth(points))
        question = recover_alternatives_2d(fan, np.zeros(2), Box.unit_cube(np.zeros(2)))
        answers = answers_for_samples(points, question.feature_matrix())
        realized = np.bincount(answers, minlength=3) / len(points)
        np.testing.assert_allclose(realized, target, atol=0.02)

    def test_infeasible_target_raises(self, rng):
        points = rng.standard_normal((5_000, 2))
        with pytest.raises(InfeasibleTargetError):
            construct_fan_2d(empirical_arc_mass(points), [0.7, 0.2, 0.1],
                             circular_depth(points))

    def test_zero_component_rejected(self):
        with pytest.raises(InvalidArgumentError):
            construct_fan_2d(uniform_arc_mass, [0.5, 0.5, 0.0], depth=0.5)

    def test_salience_enforced(self):
        with pytest.raises(ConstructionError):
            FanConstruction(
                angles=np.array([0.0, 0.5, 1.0]),
                arc_of_component=(0, 1, 2),
                target_masses=np.array([0.1, 0.1, 0.8]),
            )


class TestRecovery:
    def test_equal_fan_gives_distinct_points_and_masses(self, rng):
        fan = construct_fan_2d(uniform_arc_mass, np.full(4, 0.25), depth=0.5)
        question = recover_alternatives_2d(fan, np.zeros(2), Box.unit_cube(np.zeros(2)))
        feats = question.feature_matrix()
        assert len({tuple(row) for row in feats.round(12)}) == 4
        points = rng.standard_normal((20_000, 2))
        answers = answers_for_samples(points, feats)
        realized = np.bincount(answers, minlength=4) / len(points)
        np.testing.assert_allclose(realized, 0.25, atol=0.02)

    def test_offset_scaling_preserves_partition(self, rng):
        fan = construct_fan_2d(uniform_arc_mass, [0.4, 0.35, 0.25], depth=0.5)
        question = recover_alternatives_2d(fan, np.array([0.1, 0.2]), Box.unit_cube(np.zeros(2)))
        feats = question.feature_matrix()
        base_point = feats[0]
        shrunk = np.vstack([base_point + 0.5 * (row - base_point) for row in feats])
        thetas = rng.standard_normal((2_000, 2))
        np.testing.assert_array_equal(
            answers_for_samples(thetas, feats), answers_for_samples(thetas, shrunk)
        )

    def test_alternatives_stay_inside_box(self):
        fan = construct_fan_2d(uniform_arc_mass, [0.4, 0.35, 0.25], depth=0.5)
        box = Box(center=np.array([3.0, -2.0]), half_widths=np.array([0.2, 0.2]))
        question = recover_alternatives_2d(fan, np.array([3.05, -2.02]), box)
        for alt in question.alternatives:
            assert box.contains_interior(alt.features)

    def test_degenerate_box_rejected(self):
        with pytest.raises(ConstructionError):
            Box(center=np.zeros(2), half_widths=np.array([0.0, 1.0]))


class TestContinuum:
    def test_pairwise_uniform_target(self):
        belief = make_belief(3, alpha=0.7)
        samples = hit_and_run_sample(belief, 20_000, seed=8)
        question = construct_question_continuum(
            belief, samples, [0.5, 0.5], Box.unit_cube(np.zeros(3))
        )
        u = predictive_distribution(samples, question)
        assert u.weights[0] == pytest.approx(0.5, abs=0.011)

    def test_pairwise_skewed_target(self):
        # A skewed split needs depth below min(u); shift the prior mean so
        # halfspaces of mass 0.3 exist.
        belief = BeliefState(
            prior_mean=np.array([1.0, 0.0, 0.0]),
            prior_covariance=np.eye(3),
            channel=make_symmetric_channel(2, 0.7),
        )
        samples = hit_and_run_sample(belief, 20_000, seed=9)
        question = construct_question_continuum(
            belief, samples, [0.3, 0.7], Box.unit_cube(np.zeros(3))
        )
        u = predictive_distribution(samples, question)
        assert u.weights[0] == pytest.approx(0.3, abs=0.011)

    def test_d5_uniform_three_way_always_feasible(self):
        belief = make_belief(5, m=3, alpha=0.7)
        samples = hit_and_run_sample(belief, 20_000, seed=10)
        question = construct_question_continuum(
            belief, samples, np.full(3, 1 / 3), Box.unit_cube(np.zeros(5))
        )
        u = predictive_distribution(samples, question)
        np.testing.assert_allclose(u.weights, 1 / 3, atol=0.011)

    def test_d2_input_uses_plane_directly(self):
        belief = make_belief(2, m=3, alpha=0.7)
        samples = hit_and_run_sample(belief, 20_000, seed=11)
        question = construct_question_continuum(
            belief, samples, np.full(3, 1 / 3), Box.unit_cube(np.zeros(2))
        )
        assert question.d == 2
        u = predictive_distribution(samples, question)
        np.testing.assert_allclose(u.weights, 1 / 3, atol=0.011)

    def test_overreaching_target_raises(self):
        belief = make_belief(3, m=3, alpha=0.7)
        samples = hit_and_run_sample(belief, 10_000, seed=12)
        with pytest.raises(InfeasibleTargetError):
            construct_question_continuum(
                belief, samples, [0.95, 0.03, 0.02], Box.unit_cube(np.zeros(3))
            )


class TestProjectPredictive:
    def test_feasible_target_unchanged(self):
        result = project_predictive([0.4, 0.35, 0.25], depth=0.3, epsilon=0.01, m=3)
        assert result.sigma == 0.0
        assert not result.clipped
        np.testing.assert_allclose(result.distribution.weights, [0.4, 0.35, 0.25])

    def test_documented_example(self):
        result = project_predictive([0.8, 0.1, 0.1], depth=0.4, epsilon=0.01, m=3)
        assert result.sigma == pytest.approx(0.21, abs=1e-12)
        np.testing.assert_allclose(
            result.distribution.weights, [0.59, 0.205, 0.205], atol=1e-12
        )
        assert not result.clipped

    def test_distance_identity_when_not_clipped(self, rng):
        for _ in range(50):
            m = int(rng.integers(3, 6))
            u = rng.dirichlet(np.ones(m))
            depth = float(rng.uniform(0.0, 0.5))
            eps = 1e-3
            result = project_predictive(u, depth, eps, m)
            if result.clipped or result.sigma == 0.0:
                continue
            dist_sq = float(np.sum((result.distribution.weights - u) ** 2))
            expected = result.sigma**2 * (1 + 1 / (m - 1))
            assert dist_sq == pytest.approx(expected, rel=1e-9)
            assert result.distribution.weights.max() <= 1 - depth - eps + 1e-12

    def test_epsilon_zero_only_for_pairs(self):
        project_predictive([0.6, 0.4], depth=0.5, epsilon=0.0, m=2)
        with pytest.raises(InvalidArgumentError):
            project_predictive([0.5, 0.3, 0.2], depth=0.5, epsilon=0.0, m=3)


class TestSubsample:
    def test_deterministic_given_rng(self, rng):
        catalog = gaussian_catalog(rng, 30, 2)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=10)
        a = subsample_indices(catalog, config, np.random.default_rng(3))
        b = subsample_indices(catalog, config, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
        assert len(np.unique(a)) == 10

    def test_oversized_subsample_rejected(self, rng):
        catalog = gaussian_catalog(rng, 5, 2)
        config = PolicyConfig(policy="entropy_pursuit", m=2, subsample_size=10)
        with pytest.raises(InvalidArgumentError):
            subsample_indices(catalog, config, np.random.default_rng(0))
