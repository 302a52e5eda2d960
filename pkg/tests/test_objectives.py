import copy
from dataclasses import replace
from typing import Callable

import numpy as np
import pytest

from src.exceptions import (
    DimensionMismatchError,
    DomainError,
    FrozenModelError,
    InsufficientSamplesError,
    NoiseSpecError,
    RatioOverflowError,
    SPairValidationError,
)
from src.models import AnalyticGaussianEnergy, EnergyModel, MlpEnergy
from src.numerics import Rng, rademacher_sign_vectors
from src.objectives import (
    ExactDensity,
    FrozenModel,
    IsotropicGaussianNoise,
    adabrm,
    adance,
    bregman_point,
    brm,
    cnce,
    dsm_explicit,
    get_spair,
    mle_grad,
    nce_binary,
    nce_rank,
    rank_posterior,
    sm_denoising,
    sm_implicit,
    sm_sliced,
    spair_catalog,
)
from src.objectives.adaptive import adance_loss_from_energies
from src.objectives.nce import rank_pair_binary_posterior
from src.objectives.noise import require_exact
from src.objectives.spairs import (
    KL_SPAIR,
    LOG_SPAIR,
    QUADRATIC_SPAIR,
    mahalanobis_psi,
    spair_from_convex,
    spair_residual,
    validate_spair,
)
from src.samplers import ReplayBuffer, UniformBoxPrior
from src.schemas.sampling import ChainConfig


def fd_loss_grad(
    model: EnergyModel, loss: Callable[[EnergyModel], float], h: float = 1e-5
) -> np.ndarray:
    work = copy.deepcopy(model)
    base = work.params
    out = np.empty(work.n_params)
    for p in range(work.n_params):
        up, down = base.copy(), base.copy()
        up[p] += h
        down[p] -= h
        work.set_params(up)
        f_up = loss(work)
        work.set_params(down)
        f_down = loss(work)
        out[p] = (f_up - f_down) / (2.0 * h)
    return out


@pytest.fixture
def moved_pair(small_mlp, rng):
    """Trained model a small step away from its own frozen snapshot."""
    frozen = small_mlp.snapshot()
    small_mlp.set_params(small_mlp.params + 0.05 * rng.normal(size=small_mlp.n_params))
    return small_mlp, frozen


@pytest.fixture
def noise_2d():
    return IsotropicGaussianNoise([0.0, 0.0], 2.0)


class TestAdaptiveContrastive:
    def test_first_step_is_half_likelihood_gradient(self, small_mlp, batches):
        data, noise = batches
        frozen = small_mlp.snapshot()
        ada = adance(small_mlp, frozen, data, noise)
        mle = mle_grad(small_mlp, data, noise)
        np.testing.assert_allclose(ada.grad, -0.5 * mle.grad, atol=1e-12)
        assert ada.extras["data_posterior"] == pytest.approx(0.5)
        assert ada.loss_value == pytest.approx(2.0 * np.log(2.0))

    def test_gradient_matches_finite_differences(self, moved_pair, batches):
        model, frozen = moved_pair
        data, noise = batches
        est = adance(model, frozen, data, noise)
        fd = fd_loss_grad(model, lambda m: adance(m, frozen, data, noise).loss_value)
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)

    def test_loss_depends_on_energy_differences_only(self, rng):
        e = [rng.normal(size=5) for _ in range(4)]
        shifted = [x + 3.7 for x in e]
        assert adance_loss_from_energies(*shifted) == pytest.approx(adance_loss_from_energies(*e))

    def test_log_pair_reproduces_adance(self, moved_pair, batches):
        model, frozen = moved_pair
        data, noise = batches
        ada = adance(model, frozen, data, noise)
        bregman = adabrm(model, frozen, LOG_SPAIR, data, noise)
        assert bregman.loss_value == pytest.approx(ada.loss_value, abs=1e-12)
        np.testing.assert_allclose(bregman.grad, ada.grad, atol=1e-12)

    def test_quadratic_pair_gradient(self, moved_pair, batches):
        model, frozen = moved_pair
        data, noise = batches
        est = adabrm(model, frozen, QUADRATIC_SPAIR, data, noise)
        fd = fd_loss_grad(
            model, lambda m: adabrm(m, frozen, QUADRATIC_SPAIR, data, noise).loss_value
        )
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)

    def test_model_cannot_be_its_own_snapshot(self, small_mlp, batches):
        data, noise = batches
        with pytest.raises(FrozenModelError):
            adance(small_mlp, small_mlp, data, noise)

    def test_unfrozen_copy_rejected(self, small_mlp, batches):
        data, noise = batches
        with pytest.raises(FrozenModelError):
            adance(small_mlp, copy.deepcopy(small_mlp), data, noise)

    def test_batch_checks(self, small_mlp, batches):
        data, _ = batches
        frozen = small_mlp.snapshot()
        with pytest.raises(DimensionMismatchError):
            adance(small_mlp, frozen, data, np.zeros((4, 3)))
        with pytest.raises(InsufficientSamplesError):
            adance(small_mlp, frozen, np.zeros((0, 2)), data)

    def test_frozen_model_draws_and_fills_buffer(self, small_mlp):
        prior = UniformBoxPrior([-1.0, -1.0], [1.0, 1.0])
        buffer = ReplayBuffer(2, prior, capacity=100, rejuvenation_rate=0.05)
        noise = FrozenModel(small_mlp.snapshot(), ChainConfig(steps=5), buffer)
        X, diagnostics, from_prior = noise.draw(8, Rng(0))
        assert X.shape == (8, 2)
        assert from_prior.all()
        assert len(buffer) == 8
        est = adance(small_mlp, noise, X, X)
        assert np.isfinite(est.loss_value)

    def test_frozen_model_requires_snapshot(self, small_mlp):
        buffer = ReplayBuffer(2, UniformBoxPrior([-1.0, -1.0], [1.0, 1.0]), capacity=10)
        with pytest.raises(FrozenModelError):
            FrozenModel(small_mlp, ChainConfig(), buffer)


class TestNoiseContrastive:
    def test_log_pair_ratio_matching_is_binary_nce(self, small_mlp, noise_2d, batches):
        data, noise = batches
        ref = nce_binary(small_mlp, 0.3, noise_2d, data, noise, v=1.0)
        est = brm(small_mlp, 0.3, noise_2d, LOG_SPAIR, data, noise)
        assert est.loss_value == pytest.approx(ref.loss_value, abs=1e-12)
        np.testing.assert_allclose(est.grad, ref.grad, atol=1e-12)
        assert est.grad_c == pytest.approx(ref.grad_c, abs=1e-12)

    def test_binary_gradient_matches_finite_differences(self, small_mlp, noise_2d, batches):
        data, noise = batches
        est = nce_binary(small_mlp, 0.1, noise_2d, data, noise, v=2.0)
        fd = fd_loss_grad(
            small_mlp, lambda m: nce_binary(m, 0.1, noise_2d, data, noise, v=2.0).loss_value
        )
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)
        h = 1e-6
        up = nce_binary(small_mlp, 0.1 + h, noise_2d, data, noise, v=2.0).loss_value
        down = nce_binary(small_mlp, 0.1 - h, noise_2d, data, noise, v=2.0).loss_value
        assert est.grad_c == pytest.approx((up - down) / (2 * h), abs=1e-6)

    def test_model_equal_to_noise_is_undecided(self, rng):
        model = AnalyticGaussianEnergy.standard(1)
        noise = IsotropicGaussianNoise([0.0], 1.0)
        c = 0.5 * np.log(2.0 * np.pi)
        est = nce_binary(model, c, noise, rng.normal(size=(50, 1)), rng.normal(size=(50, 1)))
        assert est.extras["data_posterior"] == pytest.approx(0.5)
        assert est.grad_c == pytest.approx(0.0, abs=1e-12)

    def test_noise_must_have_exact_density(self, small_mlp, batches):
        data, noise = batches
        with pytest.raises(NoiseSpecError):
            nce_binary(small_mlp, 0.0, small_mlp.snapshot(), data, noise)
        with pytest.raises(NoiseSpecError):
            require_exact(object())

    def test_analytic_density_adapter(self, gaussian_2d, rng):
        noise = ExactDensity(gaussian_2d)
        X = noise.sample(5, rng)
        np.testing.assert_allclose(noise.log_pdf(X), gaussian_2d.log_pdf(X))

    def test_non_positive_ratio_rejected(self, small_mlp, noise_2d, batches):
        data, noise = batches
        with pytest.raises(DomainError):
            nce_binary(small_mlp, 0.0, noise_2d, data, noise, v=0.0)

    def test_kl_pair_overflow_reports_point(self, small_mlp, noise_2d, batches):
        data, noise = batches
        with pytest.raises(RatioOverflowError):
            brm(small_mlp, -1000.0, noise_2d, KL_SPAIR, data, noise)

    def test_kl_pair_gradient(self, small_mlp, noise_2d, batches):
        data, noise = batches
        est = brm(small_mlp, 0.5, noise_2d, KL_SPAIR, data, noise)
        fd = fd_loss_grad(
            small_mlp, lambda m: brm(m, 0.5, noise_2d, KL_SPAIR, data, noise).loss_value
        )
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)


class TestRankingNce:
    def _collections(self, data, noise_2d, L, rng):
        extra = noise_2d.sample(data.shape[0] * (L - 1), rng).reshape(data.shape[0], L - 1, 2)
        return np.concatenate([data[:, None, :], extra], axis=1)

    def test_pair_posterior_matches_binary_form(self, small_mlp, noise_2d, batches, rng):
        data, _ = batches
        C = self._collections(data, noise_2d, 2, rng)
        post = rank_posterior(small_mlp, 0.0, noise_2d, C, [0.5, 0.5])
        binary = rank_pair_binary_posterior(small_mlp, 0.0, noise_2d, C)
        np.testing.assert_allclose(post[:, 0], binary, atol=1e-12)
        np.testing.assert_allclose(post.sum(axis=1), 1.0)

    def test_posterior_independent_of_log_partition(self, small_mlp, noise_2d, batches, rng):
        data, _ = batches
        C = self._collections(data, noise_2d, 4, rng)
        rho = [0.25] * 4
        np.testing.assert_allclose(
            rank_posterior(small_mlp, 0.0, noise_2d, C, rho),
            rank_posterior(small_mlp, 5.0, noise_2d, C, rho),
            atol=1e-12,
        )

    def test_gradient_matches_finite_differences(self, small_mlp, noise_2d, batches, rng):
        data, _ = batches
        C = self._collections(data, noise_2d, 3, rng)
        rho = [0.5, 0.3, 0.2]
        est = nce_rank(small_mlp, 0.0, noise_2d, C, rho)
        fd = fd_loss_grad(small_mlp, lambda m: nce_rank(m, 0.0, noise_2d, C, rho).loss_value)
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)
        assert est.grad_c == 0.0

    def test_loss_blind_to_log_partition(self, small_mlp, noise_2d, batches, rng):
        data, _ = batches
        C = self._collections(data, noise_2d, 3, rng)
        rho = [0.5, 0.3, 0.2]
        a = nce_rank(small_mlp, 0.0, noise_2d, C, rho)
        b = nce_rank(small_mlp, 3.0, noise_2d, C, rho)
        assert a.loss_value == pytest.approx(b.loss_value, abs=1e-12)
        assert b.grad_c == 0.0

    def test_class_probabilities_validated(self, small_mlp, noise_2d, batches, rng):
        data, _ = batches
        C = self._collections(data, noise_2d, 2, rng)
        with pytest.raises(DomainError):
            nce_rank(small_mlp, 0.0, noise_2d, C, [0.7, 0.7])
        with pytest.raises(DomainError):
            nce_rank(small_mlp, 0.0, noise_2d, C, [1.0])
        with pytest.raises(DomainError):
            nce_rank(small_mlp, 0.0, noise_2d, C, [0.5, 0.5], data_index=2)


class TestConditionalNce:
    def test_gradient_matches_finite_differences(self, small_mlp, batches, rng):
        data, _ = batches
        eps = rng.normal(size=(2 * data.shape[0], 2))
        est = cnce(small_mlp, data, 0.3, kappa=2, v=1.5, perturbations=eps)
        fd = fd_loss_grad(
            small_mlp,
            lambda m: cnce(m, data, 0.3, kappa=2, v=1.5, perturbations=eps).loss_value,
        )
        np.testing.assert_allclose(est.grad, fd, atol=1e-6)
        assert est.batch_sizes == {"data": 64, "pairs": 128}

    def test_constant_energy_gives_chance_posterior(self, batches, rng):
        data, _ = batches
        flat = AnalyticGaussianEnergy([0.0, 0.0], np.zeros((2, 2)))
        est = cnce(flat, data, 0.5, rng=rng)
        assert est.extras["posterior"] == pytest.approx(0.5)
        assert est.loss_value == pytest.approx(np.log(2.0))

    def test_parameter_checks(self, small_mlp, batches):
        data, _ = batches
        with pytest.raises(DomainError):
            cnce(small_mlp, data, 0.0, rng=Rng(0))
        with pytest.raises(DomainError):
            cnce(small_mlp, data, 0.5, kappa=0, rng=Rng(0))
        with pytest.raises(ValueError):
            cnce(small_mlp, data, 0.5)


class TestLikelihoodGradient:
    def test_identical_batches_give_zero_gradient(self, small_mlp, batches):
        data, _ = batches
        est = mle_grad(small_mlp, data, data)
        np.testing.assert_allclose(est.grad, 0.0, atol=1e-14)
        assert est.direction == "ascent"

    def test_descent_direction_matches_surrogate(self, small_mlp, batches):
        data, noise = batches
        est = mle_grad(small_mlp, data, noise)
        fd = fd_loss_grad(small_mlp, lambda m: mle_grad(m, data, noise).loss_value)
        np.testing.assert_allclose(est.descent_grad, fd, atol=1e-6)


class TestScoreMatching:
    def test_implicit_at_truth(self, standard_1d, rng):
        X = rng.normal(size=(100_000, 1))
        est = sm_implicit(standard_1d, X)
        assert est.loss_value == pytest.approx(-0.5, abs=0.02)
        np.testing.assert_allclose(est.grad, 0.0, atol=0.03)

    def test_implicit_gradient_matches_finite_differences(self, gaussian_2d, rng):
        X = rng.normal(size=(20, 2))
        est = sm_implicit(gaussian_2d, X)
        fd = fd_loss_grad(gaussian_2d, lambda m: sm_implicit(m, X).loss_value)
        np.testing.assert_allclose(est.grad, fd, atol=1e-5)

    def test_sliced_with_all_sign_vectors_equals_implicit(self, gaussian_2d, rng):
        X = rng.normal(size=(30, 2))
        V = rademacher_sign_vectors(2)
        sliced = sm_sliced(gaussian_2d, X, projections=V)
        implicit = sm_implicit(gaussian_2d, X)
        assert sliced.loss_value == pytest.approx(implicit.loss_value, abs=1e-6)
        np.testing.assert_allclose(sliced.grad, implicit.grad, atol=1e-5)

    def test_sliced_gradient_matches_finite_differences(self, rng):
        model = MlpEnergy([2, 6, 6, 1], rng=rng, activation="tanh")
        X = rng.normal(size=(6, 2))
        V = rng.normal(size=(6, 2, 2))
        est = sm_sliced(model, X, projections=V)
        fd = fd_loss_grad(model, lambda m: sm_sliced(m, X, projections=V).loss_value)
        np.testing.assert_allclose(est.grad, fd, atol=1e-4)
        assert est.batch_sizes == {"data": 6, "projections": 2}

    def test_sliced_draws_projections(self, small_mlp, batches):
        data, _ = batches
        a = sm_sliced(small_mlp, data, n_projections=3, projection_dist="gaussian", rng=Rng(1))
        b = sm_sliced(small_mlp, data, n_projections=3, projection_dist="gaussian", rng=Rng(1))
        assert a.loss_value == b.loss_value
        with pytest.raises(DomainError):
            sm_sliced(small_mlp, data, n_projections=0, rng=Rng(1))

    def test_denoising_vanishes_at_smoothed_density(self, rng):
        sigma = 0.5
        X = rng.normal(size=(200_000, 1))
        smoothed = AnalyticGaussianEnergy.from_covariance([0.0], [[1.0 + sigma**2]])
        est = sm_denoising(smoothed, X, sigma, rng=rng)
        np.testing.assert_allclose(est.grad, 0.0, atol=0.03)

    def test_conditional_and_explicit_gradients_agree(self, rng):
        sigma = 0.5
        X = rng.normal(size=(200_000, 1))
        eps = rng.normal(size=X.shape)
        smoothed = AnalyticGaussianEnergy.from_covariance([0.0], [[1.0 + sigma**2]])
        model = AnalyticGaussianEnergy([0.3], [[0.7]])
        conditional = sm_denoising(model, X, sigma, noise=eps)
        explicit = dsm_explicit(model, smoothed, X, sigma, noise=eps)
        np.testing.assert_allclose(conditional.grad, explicit.grad, atol=0.03)
        assert conditional.loss_value > explicit.loss_value

    def test_denoising_needs_positive_sigma(self, small_mlp, batches):
        data, _ = batches
        with pytest.raises(DomainError):
            sm_denoising(small_mlp, data, 0.0, rng=Rng(0))


class TestSPairs:
    def test_catalog_names(self):
        assert [s.name for s in spair_catalog()] == ["log", "kl", "quadratic"]

    @pytest.mark.parametrize("name", ["log", "kl", "quadratic"])
    def test_ratio_identity_holds(self, name):
        assert spair_residual(get_spair(name)) <= 1e-8

    def test_corrupted_pair_fails_validation(self):
        broken = replace(QUADRATIC_SPAIR, ds0=lambda u: 2.0 * u)
        assert spair_residual(broken) > 1.0
        with pytest.raises(SPairValidationError):
            validate_spair(broken)

    def test_inconsistent_log_form_fails_validation(self):
        broken = replace(LOG_SPAIR, s0_log=lambda ell: ell)
        with pytest.raises(SPairValidationError):
            validate_spair(broken)

    def test_unknown_name(self):
        with pytest.raises(DomainError):
            get_spair("hellinger")

    def test_bregman_divergence(self):
        assert bregman_point(KL_SPAIR, [1.0, 2.0], [1.0, 2.0]) == pytest.approx(0.0)
        assert bregman_point(QUADRATIC_SPAIR, [3.0], [1.0]) == pytest.approx(2.0)
        assert bregman_point(KL_SPAIR, [2.0], [1.0]) > 0.0

    def test_bregman_domain_and_shape(self):
        with pytest.raises(DomainError):
            bregman_point(KL_SPAIR, [-1.0], [1.0])
        with pytest.raises(DimensionMismatchError):
            bregman_point(QUADRATIC_SPAIR, [1.0, 2.0], [1.0])

    def test_mahalanobis_divergence(self):
        psi = mahalanobis_psi([[2.0, 0.0], [0.0, 1.0]])
        assert bregman_point(psi, [1.0, 1.0], [0.0, 0.0]) == pytest.approx(1.5)
        with pytest.raises(DomainError):
            spair_from_convex(psi)
        with pytest.raises(DomainError):
            mahalanobis_psi([[1.0, 0.0], [0.0, -1.0]])
