"""Tests for second-order statistics, steady-state formulas, stability bounds and learning curves."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from puaclms.core.config import get_settings
from puaclms.core.exceptions import (
    BudgetExceededException,
    InsufficientSamplesException,
    ShapeMismatchException,
    StabilityException,
)
from puaclms.models.signal import RngStream
from puaclms.models.theory import SecondOrderStats
from puaclms.services.algebra_service import eig_hermitian, is_hermitian, vec, weighted_norm_sq
from puaclms.services.filter_service import make_schedule
from puaclms.services.signal_service import (
    default_plant,
    draw_noncircular,
    generate_ar_input,
    make_noise_spec,
    regressor_matrix,
)
from puaclms.services.theory_service import (
    assemble_operators,
    augment,
    build_operators,
    decay_rates,
    emse_steady_exact,
    emse_steady_small_mu,
    emse_steady_small_mu_partial,
    emse_steady_variance_relation,
    estimate_rho_m,
    estimate_stats,
    learning_curves,
    mean_square_stability_bound,
    mean_stability_bound,
    mean_weight_error_curve,
    spectral_radius_f,
    with_step_size,
)
from tests.conftest import random_complex


def ar_regressors(n_taps, count, seed=1):
    """Regressor windows of the default non-circular AR(1) input."""
    u = generate_ar_input(make_noise_spec(1.0, 0.9), RngStream(seed), count + n_taps - 1, warmup=10 * n_taps)
    return regressor_matrix(u, n_taps)


def hand_stats(C_u, D_u=None, C_uM=None, D_uM=None, m_taps=None):
    """Second-order statistics given by hand, no sampling."""
    n_taps = C_u.shape[0]
    D_u = np.zeros_like(C_u) if D_u is None else D_u
    C_uM = C_u if C_uM is None else C_uM
    D_uM = D_u if D_uM is None else D_uM
    return SecondOrderStats(
        C_u=C_u, D_u=D_u, C_z=augment(C_u, D_u),
        C_uM=C_uM, D_uM=D_uM, C_zM=augment(C_uM, D_uM),
        sample_count=1, n_taps=n_taps, m_taps=n_taps if m_taps is None else m_taps
    )


@pytest.fixture(scope="module")
def sequential_setup():
    """N=2, M=1 with one window set shared by the statistics and the operators."""
    regressors = ar_regressors(2, 40_000, seed=4)
    schedule = make_schedule("sequential", 2, 1)
    stats = estimate_stats(regressors, 2, schedule)
    ops = build_operators(0.05, stats, schedule, regressors)
    return stats, ops, schedule, regressors


# ============================================================================
# SECOND-ORDER STATISTICS
# ============================================================================


class TestEstimateStats:
    def test_white_circular_input(self):
        samples = 100_000
        u = draw_noncircular(make_noise_spec(1.0), RngStream(3), samples + 3)
        stats = estimate_stats(regressor_matrix(u, 4), 4, make_schedule("full", 4, 4))
        tolerance = 6 / np.sqrt(samples)
        assert np.max(np.abs(stats.C_u - np.eye(4))) < tolerance
        assert np.max(np.abs(stats.D_u)) < tolerance

    @pytest.mark.parametrize("mode", ["sequential", "stochastic"])
    def test_partial_trace_scales_with_m(self, mode):
        stats = estimate_stats(ar_regressors(8, 50_000), 8, make_schedule(mode, 8, 2, seed=9))
        ratio = np.trace(stats.C_uM).real / np.trace(stats.C_u).real
        assert ratio == pytest.approx(2 / 8, rel=0.02)

    def test_default_input_is_noncircular(self):
        stats = estimate_stats(ar_regressors(4, 20_000), 4, make_schedule("full", 4, 4))
        assert stats.circularity > 0.3

    def test_structure(self):
        stats = estimate_stats(ar_regressors(4, 20_000), 4, make_schedule("sequential", 4, 2))
        for matrix in (stats.C_u, stats.C_z, stats.C_zM):
            assert is_hermitian(matrix, tol=1e-10)
            assert eig_hermitian(matrix, compute_vectors=False).values[-1] >= -1e-10
        assert_allclose(stats.D_u, stats.D_u.T, atol=1e-12)
        assert_allclose(stats.C_zM, augment(stats.C_uM, stats.D_uM), atol=0)
        assert_allclose(stats.C_zM[4:, 4:], stats.C_uM, atol=0)
        assert_allclose(stats.C_zM[:4, :4], np.conj(stats.C_uM), atol=0)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesException, match="at least"):
            estimate_stats(ar_regressors(2, 100), 2, make_schedule("full", 2, 2))

    def test_wrong_width(self):
        with pytest.raises(ShapeMismatchException):
            estimate_stats(np.ones((20_000, 3)), 4, make_schedule("full", 4, 4))


# ============================================================================
# STEADY-STATE FORMULAS
# ============================================================================


class TestSteadyState:
    def test_exact_formula_substitution(self):
        prediction = emse_steady_exact(0.01, 0.1, hand_stats(np.eye(2)))
        assert prediction.emse == pytest.approx(0.002 / 0.98, rel=1e-12)
        assert prediction.msd is None

    def test_zero_step(self):
        assert emse_steady_exact(0.0, 0.1, hand_stats(np.eye(2))).emse == 0.0

    def test_partial_update_matches_full(self, np_rng):
        for n_taps, m_taps in [(4, 1), (4, 2), (8, 2), (8, 4), (6, 3)]:
            m = random_complex(np_rng, n_taps, n_taps)
            cov = m @ m.conj().T / n_taps
            mu = np_rng.uniform(0.001, 0.5 / np.trace(cov).real)
            rho = m_taps / n_taps
            full = emse_steady_exact(mu, 0.01, hand_stats(cov))
            partial = emse_steady_exact(mu, 0.01, hand_stats(cov, C_uM=rho * cov, m_taps=m_taps))
            assert partial.rho_m == pytest.approx(rho)
            assert partial.emse == pytest.approx(full.emse, rel=1e-12)

    def test_step_too_large(self):
        with pytest.raises(StabilityException, match="too large"):
            emse_steady_exact(1.0, 0.1, hand_stats(np.eye(2)))

    def test_invalid_rho(self):
        with pytest.raises(StabilityException):
            emse_steady_exact(0.01, 0.1, hand_stats(np.eye(2)), rho_m=1.5)

    def test_small_step_msd(self):
        prediction = emse_steady_small_mu(0.02, 0.01, hand_stats(np.eye(8)))
        assert prediction.msd == pytest.approx(1.6e-3)
        assert prediction.emse == pytest.approx(0.02 * 0.01 * 8)

    def test_small_step_agrees_with_exact(self):
        stats = hand_stats(0.5 * np.eye(4))
        mu = 0.019 / np.trace(stats.C_u).real
        small = emse_steady_small_mu(mu, 0.01, stats).emse
        exact = emse_steady_exact(mu, 0.01, stats).emse
        assert small == pytest.approx(exact, rel=0.05)

    def test_small_step_partial(self):
        stats = hand_stats(np.eye(4), C_uM=0.5 * np.eye(4), m_taps=2)
        assert emse_steady_small_mu_partial(0.01, 0.1, stats).emse == pytest.approx(0.01 * 0.1 * 4)


# ============================================================================
# VARIANCE-RELATION OPERATORS
# ============================================================================


class TestOperators:
    def test_identity_covariance(self):
        stats = hand_stats(np.eye(1))
        regressors = draw_noncircular(make_noise_spec(1.0), RngStream(2), 500).reshape(-1, 1)
        ops = build_operators(0.1, stats, make_schedule("full", 1, 1), regressors)
        assert_allclose(ops.P, 2 * np.eye(4), atol=1e-15)

    def test_zero_step_gives_identity(self, sequential_setup):
        _, ops, _, _ = sequential_setup
        assert_allclose(with_step_size(ops, 0.0).F, np.eye(ops.dim), atol=0)

    def test_f_from_factors(self, sequential_setup):
        _, ops, _, _ = sequential_setup
        expected = np.eye(ops.dim) - ops.mu * ops.P + ops.mu ** 2 * ops.Q
        assert_allclose(ops.F, expected, atol=1e-12)

    def test_p_spectrum(self, sequential_setup):
        stats, ops, _, _ = sequential_setup
        lambda_min_p = eig_hermitian(ops.P, compute_vectors=False).values[-1]
        lambda_min_c = eig_hermitian(stats.C_zM, compute_vectors=False).values[-1]
        assert lambda_min_p >= 2 * lambda_min_c - 1e-10

    def test_full_update_q_is_psd(self):
        regressors = ar_regressors(2, 20_000)
        schedule = make_schedule("full", 2, 2)
        ops = build_operators(0.05, estimate_stats(regressors, 2, schedule), schedule, regressors)
        assert is_hermitian(ops.Q, tol=1e-10)
        scale = np.max(np.abs(ops.Q))
        assert eig_hermitian(ops.Q, compute_vectors=False).values[-1] >= -1e-10 * scale

    def test_noise_vector_matches_direct_average(self, sequential_setup, np_rng):
        _, ops, schedule, regressors = sequential_setup
        m = random_complex(np_rng, 4, 4)
        sigma = m @ m.conj().T
        z = np.hstack([np.conj(regressors), regressors])
        direct = 0.0
        for row in schedule.mask_table:
            v = z * np.concatenate([row, row])
            direct += np.mean(np.einsum("si,ij,sj->s", np.conj(v), sigma, v).real) / schedule.beta
        assert (ops.c_M @ vec(sigma)).real == pytest.approx(direct, rel=0.01)

    def test_budget(self, monkeypatch):
        monkeypatch.setenv("PUACLMS_MAX_OPERATOR_N", "2")
        get_settings.cache_clear()
        stats = hand_stats(np.eye(4))
        with pytest.raises(BudgetExceededException):
            build_operators(0.01, stats, make_schedule("full", 4, 4), np.ones((10, 4)))

    def test_inconsistent_shapes(self):
        with pytest.raises(ShapeMismatchException):
            assemble_operators(0.1, np.eye(4), np.eye(3), np.zeros(4))


# ============================================================================
# STABILITY BOUNDS
# ============================================================================


class TestStabilityBounds:
    def test_unit_spectrum(self):
        assert mean_stability_bound(hand_stats(np.eye(2))) == pytest.approx(2.0)

    def test_diagonal_spectrum(self):
        stats = hand_stats(np.diag([4.0, 1.0]))
        assert mean_stability_bound(stats) == pytest.approx(0.5)

    def test_zero_matrix_unbounded(self):
        assert mean_stability_bound(hand_stats(np.zeros((2, 2)))) == float("inf")

    def test_zero_fourth_moment(self):
        ops = assemble_operators(0.0, 2 * np.eye(4), np.zeros((4, 4)), np.zeros(4))
        assert mean_square_stability_bound(ops) == pytest.approx(1.0)

    def test_scalar_case_complex_g_spectrum(self):
        ops = assemble_operators(0.0, np.array([[2.0]]), np.array([[1.0]]), np.zeros(1))
        assert mean_square_stability_bound(ops) == pytest.approx(2.0)

    def test_p_must_be_positive_definite(self):
        ops = assemble_operators(0.0, np.diag([1.0, -1.0]), np.zeros((2, 2)), np.zeros(2))
        with pytest.raises(StabilityException, match="positive definite"):
            mean_square_stability_bound(ops)

    def test_mean_square_bound_is_stricter(self, sequential_setup):
        stats, ops, _, _ = sequential_setup
        assert mean_square_stability_bound(ops) <= mean_stability_bound(stats)

    def test_spectral_radius_tracks_bound(self, sequential_setup):
        stats, ops, _, _ = sequential_setup
        bound = mean_square_stability_bound(ops)
        assert spectral_radius_f(with_step_size(ops, 0.95 * bound)) < 1.0
        assert spectral_radius_f(with_step_size(ops, 0.5 * bound)) < 1.0
        assert spectral_radius_f(with_step_size(ops, 1.5 * mean_stability_bound(stats))) > 1.0


# ============================================================================
# LEARNING CURVES AND VARIANCE-RELATION STEADY STATE
# ============================================================================


class TestLearningCurves:
    @pytest.fixture
    def plant(self):
        return default_plant(2, 0.01, RngStream(6))

    def test_zero_step_is_flat(self, sequential_setup, plant):
        stats, ops, _, _ = sequential_setup
        curve = learning_curves(0.0, 0.01, plant.w_opt, with_step_size(ops, 0.0), stats.C_z, 50)
        assert curve.length == 51
        assert_allclose(curve.emse, weighted_norm_sq(plant.w_opt, stats.C_z), rtol=1e-12)
        assert_allclose(curve.msd, np.sum(np.abs(plant.w_opt) ** 2), rtol=1e-12)

    def test_initial_value(self, sequential_setup, plant):
        stats, ops, _, _ = sequential_setup
        curve = learning_curves(ops.mu, 0.01, plant.w_opt, ops, stats.C_z, 5)
        assert curve.emse[0] == pytest.approx(weighted_norm_sq(plant.w_opt, stats.C_z), rel=1e-12)

    def test_zero_plant_rises_to_steady_state(self, sequential_setup):
        stats, ops, _, _ = sequential_setup
        curve = learning_curves(ops.mu, 0.01, np.zeros(4), ops, stats.C_z, 5000)
        steady = emse_steady_variance_relation(ops.mu, 0.01, ops, stats.C_z)
        assert curve.emse[0] == 0.0
        assert np.all(np.diff(curve.emse) >= -1e-15)
        assert curve.emse[-1] == pytest.approx(steady.emse, rel=0.01)

    def test_converges_to_variance_relation(self, sequential_setup, plant):
        stats, ops, _, _ = sequential_setup
        curve = learning_curves(ops.mu, 0.01, plant.w_opt, ops, stats.C_z, 5000)
        steady = emse_steady_variance_relation(ops.mu, 0.01, ops, stats.C_z)
        assert curve.emse[-1] == pytest.approx(steady.emse, rel=0.01)
        assert curve.msd[-1] == pytest.approx(steady.msd, rel=0.01)

    def test_unstable_step_flagged(self, sequential_setup, plant):
        stats, ops, _, _ = sequential_setup
        mu = 1.5 * mean_stability_bound(stats)
        with pytest.raises(StabilityException, match="theoretically unstable"):
            learning_curves(mu, 0.01, plant.w_opt, with_step_size(ops, mu), stats.C_z, 5000)

    def test_step_size_mismatch(self, sequential_setup, plant):
        stats, ops, _, _ = sequential_setup
        with pytest.raises(ShapeMismatchException):
            learning_curves(0.01, 0.01, plant.w_opt, ops, stats.C_z, 5)

    def test_variance_relation_matches_small_step_chain(self):
        regressors = ar_regressors(2, 40_000, seed=8)
        schedule = make_schedule("full", 2, 2)
        stats = estimate_stats(regressors, 2, schedule)
        ops = build_operators(0.005, stats, schedule, regressors)
        steady = emse_steady_variance_relation(0.005, 0.01, ops, stats.C_z)
        assert steady.emse == pytest.approx(0.005 * 0.01 * np.trace(stats.C_u).real, rel=0.1)

    def test_variance_relation_beyond_boundary(self, sequential_setup):
        stats, ops, _, _ = sequential_setup
        mu = 1.5 * mean_stability_bound(stats)
        with pytest.raises(StabilityException, match="stability boundary"):
            emse_steady_variance_relation(mu, 0.01, with_step_size(ops, mu), stats.C_z)


# ============================================================================
# DECAY RATES, MEAN TRAJECTORY, RHO_M
# ============================================================================


class TestDecayAndMean:
    def test_scalar_rates(self):
        rates = decay_rates(0.1, np.array([[1.0]]), 2)
        assert rates.r_full == pytest.approx(0.81)
        assert rates.r_seq == pytest.approx(0.9)
        assert rates.r_stoch == pytest.approx(0.9025)
        assert rates.ratio == pytest.approx(2.0)

    def test_full_update_rates_equal(self, np_rng):
        m = random_complex(np_rng, 4, 4)
        rates = decay_rates(0.05, m @ m.conj().T / 8, 1)
        assert rates.r_full == pytest.approx(rates.r_seq)
        assert rates.r_stoch == pytest.approx(rates.r_seq)

    def test_mean_trajectory(self):
        trajectory = mean_weight_error_curve(0.1, np.eye(2), np.array([1.0, -2.0]), 3)
        assert_allclose(trajectory[3], 0.9 ** 3 * np.array([1.0, -2.0]))

    def test_mean_trajectory_zero_step(self):
        trajectory = mean_weight_error_curve(0.0, np.eye(2), np.array([1.0, 1j]), 4)
        assert_allclose(trajectory, np.tile([1.0, 1j], (5, 1)))

    def test_rho_estimator(self, np_rng):
        e_a = random_complex(np_rng, 1000)
        assert estimate_rho_m(0.25 * e_a, e_a) == pytest.approx(0.25)

    def test_rho_estimator_zero_error(self):
        with pytest.raises(InsufficientSamplesException):
            estimate_rho_m(np.zeros(10), np.zeros(10))
