import numpy as np
import pytest

from shapeffects import (
    EstimatorKind,
    ExactBackend,
    GivenDataBackend,
    LinearGaussianModel,
    OracleBackend,
    random_spd_covariance,
    run_exact_permutation_procedure,
    run_random_permutation_procedure,
    run_subset_procedure,
    shapley_from_subsets,
)
from shapeffects.errors import InvalidVarianceError, ProcedureError
from shapeffects.experiment import draw_gaussian_sample
from shapeffects.procedures import Variant
from shapeffects.util import rng_stream


class TestSubsetProcedure:
    def test_symmetric_pair_double_mc(self, bivariate_independent):
        backend = ExactBackend(bivariate_independent, EstimatorKind.DOUBLE_MC)
        report = run_subset_procedure(backend, 6000, seed=1)
        np.testing.assert_allclose(report.effects, [0.5, 0.5], atol=0.05)
        assert report.realized_cost <= 6000
        assert report.model_evaluations == report.realized_cost

    def test_constant_model_rejected(self):
        class Constant:
            p = 2
            var_y = 0.0

        with pytest.raises(InvalidVarianceError):
            run_subset_procedure(_as_backend(Constant()), 100)

    def test_p3_oracle_agreement(self, p3_model):
        backend = ExactBackend(p3_model, EstimatorKind.DOUBLE_MC, n_inner=3)
        report = run_subset_procedure(backend, 30_000, seed=7)
        oracle = p3_model.theoretical_shapley()
        np.testing.assert_allclose(report.effects, oracle, atol=0.05)

    def test_table_is_kept_and_complete(self, bivariate_correlated):
        backend = ExactBackend(bivariate_correlated, EstimatorKind.PICK_FREEZE)
        report = run_subset_procedure(backend, 800, seed=2)
        assert report.table is not None and report.table.is_complete()
        assert report.table.accuracies[0b01] == 200  # 800 / (2 * 2 * 1)
        np.testing.assert_allclose(
            report.effects, shapley_from_subsets(report.table)
        )

    def test_budget_exactness_pick_freeze(self, p3_model):
        backend = ExactBackend(p3_model, EstimatorKind.PICK_FREEZE)
        before = p3_model.budget.spent
        report = run_subset_procedure(backend, 5000, seed=3)
        assert p3_model.budget.spent - before == report.realized_cost


class TestRandomPermutationProcedure:
    def test_p2_sum_is_exactly_one(self, bivariate_correlated):
        backend = ExactBackend(bivariate_correlated, EstimatorKind.DOUBLE_MC)
        report = run_random_permutation_procedure(backend, 50, seed=4)
        assert report.sum_effects == pytest.approx(1.0, abs=1e-12)

    def test_p10_reference_cost(self):
        gamma = random_spd_covariance(10, rng_stream(52, "gamma"))
        model = LinearGaussianModel(np.ones(10), gamma=gamma)
        backend = ExactBackend(model, EstimatorKind.DOUBLE_MC, n_inner=3)
        m = 54_000 // (3 * 9)
        assert m == 2000
        report = run_random_permutation_procedure(backend, m, seed=5)
        assert report.realized_cost == 54_000
        assert report.model_evaluations == 54_000
        assert report.sum_effects == pytest.approx(1.0, abs=1e-10)

    def test_p3_oracle_agreement(self, p3_model):
        backend = ExactBackend(p3_model, EstimatorKind.DOUBLE_MC)
        report = run_random_permutation_procedure(backend, 10_000, seed=6)
        np.testing.assert_allclose(report.effects, p3_model.theoretical_shapley(), atol=0.05)

    def test_zero_permutations_rejected(self, bivariate_independent):
        backend = ExactBackend(bivariate_independent)
        with pytest.raises(ProcedureError):
            run_random_permutation_procedure(backend, 0)

    def test_walk_reuses_estimates_without_recomputation(self, p3_model):
        """Each chain position is estimated once; prevC is the stored value."""
        calls = []

        class CountingBackend(OracleBackend):
            def elementary(self, mask, count, rng):
                calls.append((mask, count))
                return super().elementary(mask, count, rng)

        backend = CountingBackend(p3_model.v_table())
        m = 40
        report = run_random_permutation_procedure(backend, m, seed=8, keep_walk=True)
        total_estimates = sum(count for _, count in calls)
        assert total_estimates == m * (p3_model.p - 1)  # one per position, none repeated
        perms = report.extra["permutations"]
        walk = report.extra["walk_values"]
        # every chain telescopes exactly from 0 to Var(Y) through the stored values
        np.testing.assert_array_equal(walk[:, -1], np.full(m, backend.var_y))
        # reconstruct the chains: prevC at position i+1 must be the stored value at i
        acc = np.zeros(p3_model.p)
        for row in range(m):
            prev = 0.0
            for i in range(p3_model.p):
                increment = walk[row, i] - prev
                acc[perms[row, i]] += increment
                prev = walk[row, i]  # reuse, bit-identical to the stored estimate
        np.testing.assert_allclose(
            acc / (m * backend.var_y), report.effects, rtol=0, atol=1e-14
        )

    def test_given_data_backend_runs(self, bivariate_correlated):
        sample = draw_gaussian_sample(bivariate_correlated, 2000, rng_stream(9, "s"))
        backend = GivenDataBackend(sample, EstimatorKind.DOUBLE_MC, Variant.KNN)
        report = run_random_permutation_procedure(backend, 300, seed=10)
        assert report.sum_effects == pytest.approx(1.0, abs=1e-12)
        assert report.model_evaluations == 0
        np.testing.assert_allclose(report.effects, [0.5, 0.5], atol=0.1)


class TestExactPermutationProcedure:
    def test_p2_minimal_cost(self, bivariate_correlated):
        backend = ExactBackend(bivariate_correlated, EstimatorKind.DOUBLE_MC)
        before = bivariate_correlated.budget.spent
        report = run_exact_permutation_procedure(backend, n_o=1, seed=11)
        # 2 permutations, one estimated position each, at kappa = 3
        assert report.realized_cost == 2 * 3
        assert bivariate_correlated.budget.spent - before == 6

    def test_p3_oracle_agreement(self, p3_model):
        backend = ExactBackend(p3_model, EstimatorKind.DOUBLE_MC)
        report = run_exact_permutation_procedure(backend, n_o=500, seed=12)
        np.testing.assert_allclose(report.effects, p3_model.theoretical_shapley(), atol=0.05)

    def test_exact_backend_reproduces_subset_formula(self, p3_model):
        table = p3_model.v_table()
        backend = OracleBackend(table)
        report = run_exact_permutation_procedure(backend, n_o=1, seed=13)
        np.testing.assert_allclose(report.effects, shapley_from_subsets(table), atol=1e-12)

    def test_large_dimension_refused_with_cost_estimate(self):
        gamma = random_spd_covariance(9, rng_stream(14, "g"))
        model = LinearGaussianModel(np.ones(9), gamma=gamma)
        backend = ExactBackend(model)
        with pytest.raises(ProcedureError, match="362880"):
            run_exact_permutation_procedure(backend, n_o=1)


class TestSumToOneInvariant:
    """Every procedure x estimator combination pins the sum exactly."""

    @pytest.mark.parametrize("estimator", [EstimatorKind.DOUBLE_MC, EstimatorKind.PICK_FREEZE])
    def test_exact_mode(self, p3_model, estimator):
        backend = ExactBackend(p3_model, estimator)
        reports = [
            run_subset_procedure(backend, 600, seed=15),
            run_random_permutation_procedure(backend, 30, seed=16),
            run_exact_permutation_procedure(backend, n_o=5, seed=17),
        ]
        for report in reports:
            assert report.sum_effects == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("estimator", [EstimatorKind.DOUBLE_MC, EstimatorKind.PICK_FREEZE])
    @pytest.mark.parametrize("variant", [Variant.MIX, Variant.KNN])
    def test_given_data_mode(self, p3_model, estimator, variant):
        sample = draw_gaussian_sample(p3_model, 500, rng_stream(18, "s"))
        backend = GivenDataBackend(sample, estimator, variant, model=p3_model)
        reports = [
            run_subset_procedure(backend, 600, seed=19),
            run_random_permutation_procedure(backend, 30, seed=20),
            run_exact_permutation_procedure(backend, n_o=5, seed=21),
        ]
        for report in reports:
            assert report.sum_effects == pytest.approx(1.0, abs=1e-10)


def _as_backend(model):
    class MinimalBackend:
        p = model.p
        var_y = model.var_y
        cost_unit = 3
        estimator = None
        variant = None
        kind = None
        evaluations = 0

        def estimate(self, mask, n_u, rng):
            return 0.0

    return MinimalBackend()
