import numpy as np
import pytest

from pleiotree.em import (
    EmConfig,
    e_step,
    fit,
    fit_baseline,
    fit_linear_prior,
    project_to_simplex,
    run_stage1,
    run_stage2,
    update_alpha,
)
from pleiotree.model import clamp_pvalues, incomplete_loglik
from pleiotree.sim import SimConfig, simulate
from pleiotree.tree import TreeConfig


def small_em_config(**overrides):
    defaults = dict(tree=TreeConfig(min_leaf=10))
    defaults.update(overrides)
    return EmConfig(**defaults)


class TestEStep:
    def test_hand_value(self):
        pvals = np.array([[0.5, 0.5]])
        priors = np.full((1, 4), 0.25)
        z = e_step(pvals, priors, (0.5, 0.5))
        assert z[0] == pytest.approx(
            [0.343145, 0.242641, 0.242641, 0.171573], abs=1e-6
        )

    def test_point_mass_prior_is_fixed_point(self):
        pvals = np.array([[0.01, 0.8], [0.7, 0.2]])
        priors = np.tile([0.0, 0.0, 1.0, 0.0], (2, 1))
        z = e_step(pvals, priors, (0.3, 0.6))
        assert z == pytest.approx(priors, abs=1e-9)

    def test_alpha_near_one_returns_priors(self):
        rng = np.random.default_rng(4)
        pvals = clamp_pvalues(rng.random((20, 2)))
        priors = rng.dirichlet(np.ones(4), size=20)
        z = e_step(pvals, priors, (1.0 - 1e-12, 1.0 - 1e-12))
        assert z == pytest.approx(priors, abs=1e-9)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(6)
        pvals = clamp_pvalues(rng.random((50, 2)))
        priors = rng.dirichlet(np.ones(4), size=50)
        z = e_step(pvals, priors, (0.4, 0.3))
        assert z.sum(axis=1) == pytest.approx(np.ones(50), abs=1e-12)


class TestUpdateAlpha:
    def test_constant_pvalue_closed_form(self):
        m = 7
        pvals = np.full((m, 2), np.exp(-2.0))
        posteriors = np.tile([0.0, 0.0, 0.0, 1.0], (m, 1))
        alpha, stuck = update_alpha(pvals, posteriors)
        assert not stuck
        assert alpha == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_two_term_hand_sum(self):
        pvals = np.array([[np.exp(-1.0), 0.5], [np.exp(-3.0), 0.5]])
        posteriors = np.tile([0.0, 1.0, 0.0, 0.0], (2, 1))
        alpha, _ = update_alpha(pvals, posteriors)
        assert alpha[0] == pytest.approx(0.5, abs=1e-12)

    def test_monte_carlo_recovers_beta_shape(self):
        rng = np.random.default_rng(100)
        draws = rng.power(0.4, 100000)  # Beta(0.4, 1)
        pvals = clamp_pvalues(draws)[:, None]
        posteriors = np.tile([0.0, 1.0], (draws.size, 1))
        alpha, _ = update_alpha(pvals, posteriors)
        assert alpha[0] == pytest.approx(0.4, abs=0.01)

    def test_zero_weight_keeps_previous(self):
        pvals = np.array([[0.5, 0.5]])
        posteriors = np.array([[1.0, 0.0, 0.0, 0.0]])  # all-null mass
        alpha, stuck = update_alpha(pvals, posteriors, prev_alpha=(0.37, 0.21))
        assert stuck
        assert alpha == pytest.approx([0.37, 0.21], abs=1e-12)

    def test_alpha_subproblem_never_decreases_loglik(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            pvals = clamp_pvalues(rng.random((60, 2)))
            priors = rng.dirichlet(np.ones(4), size=60)
            alpha_old = rng.uniform(0.1, 0.9, size=2)
            z = e_step(pvals, priors, alpha_old)
            alpha_new, _ = update_alpha(pvals, z, alpha_old)
            before = incomplete_loglik(pvals, priors, alpha_old)
            after = incomplete_loglik(pvals, priors, alpha_new)
            assert after >= before - 1e-10


class TestLinearPrior:
    def test_saturated_binary_predictor_recovers_group_means(self):
        a = np.repeat([[0.0], [1.0]], 10, axis=0)
        z = np.vstack(
            [np.tile([1.0, 0.0, 0.0, 0.0], (10, 1)),
             np.tile([0.0, 0.0, 0.0, 1.0], (10, 1))]
        )
        priors = fit_linear_prior(z, a)
        assert priors[0] == pytest.approx([1.0, 0.0, 0.0, 0.0], abs=1e-5)
        assert priors[-1] == pytest.approx([0.0, 0.0, 0.0, 1.0], abs=1e-5)

    def test_projection_rule(self):
        raw = np.array([[-0.02, 0.40, 0.32, 0.30]])
        projected = project_to_simplex(raw)
        assert projected[0] == pytest.approx(
            [9.8e-7, 0.392156, 0.313725, 0.294118], rel=1e-3
        )
        assert projected.sum() == pytest.approx(1.0, abs=1e-12)

    def test_intercept_only_returns_column_means(self):
        rng = np.random.default_rng(12)
        z = rng.dirichlet(np.ones(4), size=30)
        a = np.zeros((30, 1))
        priors = fit_linear_prior(z, a)
        expected = project_to_simplex(np.tile(z.mean(axis=0), (30, 1)))
        assert priors == pytest.approx(expected, abs=1e-9)

    def test_duplicate_columns_still_fit(self):
        rng = np.random.default_rng(14)
        col = rng.integers(0, 2, size=(40, 1)).astype(float)
        a = np.hstack([col, col])  # rank-deficient design
        z = rng.dirichlet(np.ones(4), size=40)
        priors = fit_linear_prior(z, a)
        assert priors.sum(axis=1) == pytest.approx(np.ones(40), abs=1e-9)


class TestStage1:
    def test_no_signal_matches_intercept_only_oracle(self):
        rng = np.random.default_rng(50)
        m = 10000
        # mixture with known proportions but annotations independent of Y
        states = rng.choice(4, size=m, p=[0.7, 0.1, 0.1, 0.1])
        pvals = 1.0 - rng.random((m, 2))
        pvals[np.isin(states, [1, 3]), 0] **= 1.0 / 0.4
        pvals[np.isin(states, [2, 3]), 1] **= 1.0 / 0.3
        pvals = clamp_pvalues(pvals)
        a = rng.integers(0, 2, size=(m, 3)).astype(float)

        result = run_stage1(pvals, a, EmConfig())

        # independent intercept-only EM oracle
        alpha = np.array([0.1, 0.1])
        pi = np.full(4, 0.25)
        for _ in range(500):
            z = e_step(pvals, np.tile(pi, (m, 1)), alpha)
            pi = z.mean(axis=0)
            alpha, _ = update_alpha(pvals, z, alpha)
        fitted_mean = result.priors.mean(axis=0)
        assert np.max(np.abs(result.priors - pi[None, :])) < 0.05
        assert fitted_mean == pytest.approx(pi, abs=0.05)

    def test_recovers_alpha_on_simulated_design(self):
        config = SimConfig(m=10000, k=25, v=0.5, seed=202)
        gwas, annotations, _ = simulate(config)
        result = run_stage1(gwas, annotations, EmConfig())
        assert abs(result.alpha[0] - 0.4) < 0.1
        assert abs(result.alpha[1] - 0.3) < 0.1

    def test_loglik_trace_monotone_on_clean_instance(self):
        config = SimConfig(m=10000, k=25, seed=5)
        gwas, annotations, _ = simulate(config)
        result = run_stage1(gwas, annotations, EmConfig())
        assert result.converged
        assert result.max_loglik_decrease < 1e-6
        trace = np.array(result.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-6)

    def test_loglik_decreases_are_flagged(self):
        # The least-squares prior refit is not a likelihood ascent step, so
        # small dips can occur; the diagnostic must report the worst one.
        config = SimConfig(m=10000, k=25, seed=9)
        gwas, annotations, _ = simulate(config)
        result = run_stage1(gwas, annotations, EmConfig())
        trace = np.array(result.loglik_trace)
        worst = max(0.0, float(np.max(-np.diff(trace))))
        assert result.max_loglik_decrease == pytest.approx(worst, abs=1e-12)
        # dips stay tiny relative to the total likelihood gain
        assert result.max_loglik_decrease < 1e-3 * (trace[-1] - trace[0])


class TestStage2:
    def test_recovers_true_annotations(self):
        config = SimConfig(m=4000, k=10, v=0.5, seed=9)
        gwas, annotations, truth = simulate(config)
        result = fit(gwas, annotations, small_em_config())
        assert sorted(result.tree.selected_annotations()) == sorted(
            truth.true_annotations
        )

    def test_independent_annotations_give_single_leaf(self):
        rng = np.random.default_rng(61)
        m = 10000
        states = rng.choice(4, size=m, p=[0.7, 0.1, 0.1, 0.1])
        pvals = 1.0 - rng.random((m, 2))
        pvals[np.isin(states, [1, 3]), 0] **= 1.0 / 0.4
        pvals[np.isin(states, [2, 3]), 1] **= 1.0 / 0.3
        pvals = clamp_pvalues(pvals)
        a = rng.integers(0, 2, size=(m, 4)).astype(float)
        result = fit(pvals, a, EmConfig())
        assert result.tree.selected_annotations() == []
        assert result.tree.n_leaves == 1

    def test_accepted_trace_strictly_increasing(self):
        config = SimConfig(m=3000, k=10, seed=5)
        gwas, annotations, _ = simulate(config)
        result = fit(gwas, annotations, small_em_config())
        trace = np.array(result.stage2_loglik_trace)
        assert np.all(np.diff(trace) > 0.0)

    def test_deterministic_fit(self):
        config = SimConfig(m=1500, k=8, seed=42)
        gwas, annotations, _ = simulate(config)
        r1 = fit(gwas, annotations, small_em_config())
        r2 = fit(gwas, annotations, small_em_config())
        assert np.array_equal(r1.alpha, r2.alpha)
        assert np.array_equal(r1.posteriors, r2.posteriors)
        assert r1.stage2_loglik_trace == r2.stage2_loglik_trace
        assert r1.tree.to_dict() == r2.tree.to_dict()

    def test_row_permutation_equivariance(self):
        config = SimConfig(m=1500, k=8, seed=8)
        gwas, annotations, _ = simulate(config)
        perm = np.random.default_rng(1).permutation(config.m)
        r1 = fit(gwas.values, annotations.values, small_em_config())
        r2 = fit(gwas.values[perm], annotations.values[perm], small_em_config())
        assert r1.alpha == pytest.approx(r2.alpha, rel=1e-12)
        assert r1.posteriors[perm] == pytest.approx(r2.posteriors, abs=1e-12)
        assert r1.loglik == pytest.approx(r2.loglik, rel=1e-12)
        assert sorted(r1.tree.selected_annotations()) == sorted(
            r2.tree.selected_annotations()
        )


class TestBaseline:
    def test_constant_priors(self):
        config = SimConfig(m=1500, k=8, seed=15)
        gwas, _, _ = simulate(config)
        result = fit_baseline(gwas)
        assert np.ptp(result.priors, axis=0) == pytest.approx(
            np.zeros(4), abs=1e-12
        )
        assert result.tree.selected_annotations() == []
