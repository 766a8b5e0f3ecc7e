import numpy as np
import pytest

from shapeffects import (
    LinearGaussianModel,
    convert_table,
    load_gaussian_config,
    random_spd_covariance,
    shapley_from_subsets,
)
from shapeffects.errors import ConfigurationError, InvalidVarianceError, SingularCovarianceError
from shapeffects.subsets import full_mask
from shapeffects.util import rng_stream


class TestConditionalVariance:
    def test_independent_inputs(self):
        model = LinearGaussianModel([1.0, 1.0])
        assert model.conditional_variance(0b01) == pytest.approx(1.0)

    def test_correlated_pair_schur_by_hand(self):
        rho = 0.37
        model = LinearGaussianModel([1.0, 1.0], gamma=[[1, rho], [rho, 1]])
        assert model.conditional_variance(0b01) == pytest.approx(1 - rho**2)

    def test_fully_conditioned_is_zero(self):
        model = LinearGaussianModel([1.0, 2.0, 3.0], gamma=np.eye(3) * 2.0)
        assert model.conditional_variance(full_mask(3)) == 0.0

    def test_empty_subset_is_var_y(self):
        model = LinearGaussianModel([1.0, -2.0], gamma=[[2, 0.3], [0.3, 1]])
        assert model.conditional_variance(0) == pytest.approx(model.var_y)

    def test_monte_carlo_cross_check(self, p3_model):
        """Independent check of the Schur formula by conditional simulation."""
        rng = rng_stream(55, "mc-check")
        u = 0b011
        anchors = p3_model.sample_marginal(u, 1, rng)
        draws = p3_model.sample_conditional(0b100, u, anchors, 200_000, rng)[0]
        y = draws[:, 0] * p3_model.beta[2] + anchors[0] @ p3_model.beta[:2]
        assert y.var(ddof=1) == pytest.approx(p3_model.conditional_variance(u), rel=0.02)


class TestTheoreticalShapley:
    def test_exchangeable_inputs_share_equally(self):
        for p in (2, 3, 5):
            model = LinearGaussianModel(np.ones(p))
            np.testing.assert_allclose(model.theoretical_shapley(), np.full(p, 1 / p))

    def test_symmetric_pair_any_correlation(self):
        for rho in (-0.6, 0.0, 0.8):
            model = LinearGaussianModel([1.0, 1.0], gamma=[[1, rho], [rho, 1]])
            np.testing.assert_allclose(model.theoretical_shapley(), [0.5, 0.5], atol=1e-12)

    def test_v_and_e_tables_agree(self, p3_model):
        via_v = shapley_from_subsets(p3_model.v_table())
        via_e = shapley_from_subsets(p3_model.e_table())
        np.testing.assert_allclose(via_v, via_e, atol=1e-10)
        np.testing.assert_allclose(p3_model.theoretical_shapley(), via_v)

    def test_effects_sum_to_one_and_lie_in_unit_interval(self):
        for seed in range(6):
            gamma = random_spd_covariance(4, rng_stream(seed, "spd"))
            model = LinearGaussianModel([1.0, -1.0, 2.0, 0.5], gamma=gamma)
            eta = model.theoretical_shapley()
            assert abs(eta.sum() - 1.0) < 1e-10
            assert (eta > -1e-10).all() and (eta < 1 + 1e-10).all()

    def test_law_of_total_variance_identity(self, p3_model):
        e_table = p3_model.e_table()
        v_table = p3_model.v_table()
        np.testing.assert_allclose(
            convert_table(e_table).values, v_table.values, atol=1e-10
        )


class TestConditionalSampler:
    def test_empty_conditioning_is_marginal(self, p3_model):
        rng = rng_stream(1, "m")
        draws = p3_model.sample_conditional(0b101, 0, np.empty((3, 0)), 4, rng)
        assert draws.shape == (3, 4, 2)

    def test_identity_covariance_conditional_equals_marginal(self):
        model = LinearGaussianModel([1.0, 1.0], mu=[3.0, -2.0])
        rng = rng_stream(2, "id")
        anchors = np.array([[10.0]])  # conditioning value far away must not matter
        draws = model.sample_conditional(0b10, 0b01, anchors, 100_000, rng)[0, :, 0]
        assert draws.mean() == pytest.approx(-2.0, abs=0.02)
        assert draws.var(ddof=1) == pytest.approx(1.0, rel=0.02)

    def test_bivariate_conditional_moments(self):
        rho = 0.5
        model = LinearGaussianModel([1.0, 1.0], gamma=[[1, rho], [rho, 1]])
        rng = rng_stream(3, "cond")
        draws = model.sample_conditional(0b10, 0b01, np.array([[2.0]]), 200_000, rng)[0, :, 0]
        assert draws.mean() == pytest.approx(1.0, abs=3 * np.sqrt(0.75 / 200_000) + 1e-3)
        assert draws.var(ddof=1) == pytest.approx(0.75, rel=0.02)

    def test_sampler_covariance_matches_schur(self, p3_model):
        rng = rng_stream(4, "cov")
        target, given = 0b110, 0b001
        anchors = p3_model.sample_marginal(given, 1, rng)
        draws = p3_model.sample_conditional(target, given, anchors, 100_000, rng)[0]
        sample_cov = np.cov(draws.T)
        schur = p3_model._schur(target, given)
        frob = np.linalg.norm(sample_cov - schur) / np.linalg.norm(schur)
        assert frob < 0.05

    def test_overlapping_target_and_given_rejected(self, p3_model):
        with pytest.raises(ValueError):
            p3_model.sample_conditional(0b011, 0b001, np.zeros((1, 1)), 2, rng_stream(0))


class TestRandomSpdCovariance:
    def test_symmetric_and_psd(self):
        gamma = random_spd_covariance(6, rng_stream(10, "g"))
        np.testing.assert_allclose(gamma, gamma.T, atol=1e-12)
        assert np.linalg.eigvalsh(gamma).min() >= -1e-10

    def test_seeded_reproducibility(self):
        a = random_spd_covariance(5, rng_stream(11, "g"))
        b = random_spd_covariance(5, rng_stream(11, "g"))
        np.testing.assert_array_equal(a, b)

    def test_p1_is_square_scalar(self):
        gamma = random_spd_covariance(1, rng_stream(12, "g"))
        assert gamma.shape == (1, 1) and gamma[0, 0] >= 0


class TestDegenerateCovariance:
    def test_duplicated_coordinate_is_handled(self):
        # X3 == X1 exactly: Gamma_{uu} singular for u = {1, 3}
        gamma = np.array([[1.0, 0.2, 1.0], [0.2, 1.0, 0.2], [1.0, 0.2, 1.0]])
        model = LinearGaussianModel([1.0, 1.0, 1.0], gamma=gamma)
        value = model.conditional_variance(0b101)
        assert np.isfinite(value) and value >= -1e-12

    def test_indefinite_matrix_rejected(self):
        gamma = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
        with pytest.raises(SingularCovarianceError):
            LinearGaussianModel([1.0, 1.0], gamma=gamma)

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(ConfigurationError):
            LinearGaussianModel([1.0, 1.0], gamma=[[1.0, 0.5], [0.2, 1.0]])

    def test_zero_variance_output_rejected(self):
        with pytest.raises(InvalidVarianceError):
            LinearGaussianModel([0.0, 0.0], gamma=np.eye(2))


class TestConfigLoading:
    def test_explicit_gamma(self, tmp_path):
        path = tmp_path / "model.toml"
        path.write_text(
            'beta = [1.0, 1.0]\nmu = [0.0, 0.0]\ngamma = [[1.0, 0.5], [0.5, 1.0]]\n'
        )
        model = load_gaussian_config(path)
        assert model.var_y == pytest.approx(3.0)

    def test_seeded_gamma_and_scalar_broadcast(self, tmp_path):
        path = tmp_path / "model.toml"
        path.write_text("p = 4\nbeta = 1.0\ngamma_seed = 99\n")
        model = load_gaussian_config(path)
        expected = random_spd_covariance(4, np.random.default_rng(99))
        np.testing.assert_array_equal(model.gamma, expected)

    def test_conflicting_gamma_sources_rejected(self, tmp_path):
        path = tmp_path / "model.toml"
        path.write_text("beta = [1.0]\ngamma = [[1.0]]\ngamma_seed = 1\n")
        with pytest.raises(ConfigurationError):
            load_gaussian_config(path)

    def test_missing_beta_rejected(self, tmp_path):
        path = tmp_path / "model.toml"
        path.write_text("gamma_seed = 1\n")
        with pytest.raises(ConfigurationError):
            load_gaussian_config(path)
