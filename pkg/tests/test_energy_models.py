import copy
import json

import numpy as np
import pytest

from src.exceptions import (
    CheckpointFormatError,
    ConfigurationError,
    DimensionMismatchError,
    FrozenModelError,
    InvalidStateError,
)
from src.models import (
    AnalyticGaussianEnergy,
    EnergyModel,
    GaussianMixtureEnergy,
    MlpEnergy,
    Rbm,
    load_checkpoint,
    rbm_conditionals,
    rbm_exact_marginal,
    save_checkpoint,
)
from src.models.rbm import spin_states
from src.numerics import Rng, logsumexp


def fd_param_grad(model: EnergyModel, X: np.ndarray, h: float = 1e-6) -> np.ndarray:
    work = copy.deepcopy(model)
    base = work.params
    out = np.empty((X.shape[0], work.n_params))
    for p in range(work.n_params):
        up, down = base.copy(), base.copy()
        up[p] += h
        down[p] -= h
        work.set_params(up)
        e_up = work.energy(X)
        work.set_params(down)
        e_down = work.energy(X)
        out[:, p] = (e_up - e_down) / (2.0 * h)
    return out


def fd_score(model: EnergyModel, X: np.ndarray, h: float = 1e-6) -> np.ndarray:
    out = np.empty_like(X)
    for i in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[i] = h
        out[:, i] = -(model.energy(X + e) - model.energy(X - e)) / (2.0 * h)
    return out


class TestAnalyticGaussian:
    def test_standard_log_pdf_at_zero(self, standard_1d):
        assert standard_1d.log_pdf(np.array([0.0])) == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_single_point_and_batch_shapes(self, gaussian_2d):
        assert isinstance(gaussian_2d.energy(np.zeros(2)), float)
        assert gaussian_2d.energy(np.zeros((5, 2))).shape == (5,)
        assert gaussian_2d.score(np.zeros(2)).shape == (2,)
        assert gaussian_2d.score(np.zeros((5, 2))).shape == (5, 2)

    def test_score_is_negative_precision_residual(self, gaussian_2d, rng):
        X = rng.normal(size=(10, 2))
        expected = -(X - gaussian_2d.mu) @ gaussian_2d.precision
        np.testing.assert_allclose(gaussian_2d.score(X), expected, atol=1e-12)

    def test_param_grad_matches_finite_differences(self, gaussian_2d, rng):
        X = rng.normal(size=(6, 2))
        np.testing.assert_allclose(
            gaussian_2d.param_grad(X), fd_param_grad(gaussian_2d, X), atol=1e-6
        )

    def test_exact_laplacian(self, gaussian_2d):
        expected = -np.trace(gaussian_2d.precision)
        assert gaussian_2d.laplacian_log_density(np.zeros(2)) == pytest.approx(expected)

    def test_wrong_dimension_rejected(self, gaussian_2d):
        with pytest.raises(DimensionMismatchError):
            gaussian_2d.energy(np.zeros((3, 3)))

    def test_sample_moments(self, gaussian_2d, rng):
        X = gaussian_2d.sample(200_000, rng)
        np.testing.assert_allclose(X.mean(axis=0), gaussian_2d.mu, atol=0.02)
        np.testing.assert_allclose(np.cov(X, rowvar=False), gaussian_2d.covariance, atol=0.02)


class TestMixture:
    def test_single_component_equals_gaussian(self, rng):
        mix = GaussianMixtureEnergy([1.0], [[0.5, -0.5]], [[2.0, 0.5]])
        gauss = AnalyticGaussianEnergy.from_covariance([0.5, -0.5], np.diag([2.0, 0.5]))
        X = rng.normal(size=(8, 2))
        np.testing.assert_allclose(mix.log_pdf(X), gauss.log_pdf(X), atol=1e-10)

    def test_score_matches_finite_differences(self, four_modes, rng):
        X = 2.0 * rng.normal(size=(10, 2))
        np.testing.assert_allclose(four_modes.score(X), fd_score(four_modes, X), atol=1e-6)

    def test_param_grad_matches_finite_differences(self, four_modes, rng):
        X = 2.0 * rng.normal(size=(5, 2))
        np.testing.assert_allclose(
            four_modes.param_grad(X), fd_param_grad(four_modes, X), atol=1e-5
        )

    def test_smoothed_adds_variance(self, two_modes):
        smoothed = two_modes.smoothed(0.5)
        np.testing.assert_allclose(smoothed.variances, two_modes.variances + 0.25)
        np.testing.assert_allclose(smoothed.means, two_modes.means)

    def test_log_pdf_integrates_to_one(self, two_modes):
        x = np.linspace(-8.0, 8.0, 4001)
        p = np.exp(two_modes.log_pdf(x[:, None]))
        assert np.sum(p) * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-6)


class TestMlp:
    def test_score_matches_finite_differences(self, small_mlp, rng):
        X = rng.normal(size=(10, 2))
        np.testing.assert_allclose(small_mlp.score(X), fd_score(small_mlp, X), atol=1e-6)

    def test_param_grad_matches_finite_differences(self, small_mlp, rng):
        X = rng.normal(size=(4, 2))
        np.testing.assert_allclose(small_mlp.param_grad(X), fd_param_grad(small_mlp, X), atol=1e-6)

    def test_weighted_param_grad(self, small_mlp, rng):
        X = rng.normal(size=(7, 2))
        w = rng.normal(size=7)
        np.testing.assert_allclose(
            small_mlp.weighted_param_grad(X, w), w @ small_mlp.param_grad(X), atol=1e-12
        )

    def test_score_vjp_matches_generic_differences(self, rng):
        model = MlpEnergy([2, 6, 6, 1], rng=rng, activation="tanh")
        X = rng.normal(size=(5, 2))
        G = rng.normal(size=(5, 2))
        generic = EnergyModel._score_vjp(model, X, G)
        np.testing.assert_allclose(model.score_vjp(X, G), generic, atol=1e-6)

    def test_spectral_normalisation_bounds_layers(self, sn_mlp):
        for i in range(sn_mlp.n_layers):
            top = np.linalg.svd(sn_mlp.effective_weight(i), compute_uv=False)[0]
            assert top == pytest.approx(1.0, abs=1e-3)

    def test_spectral_refresh_follows_weight_scaling(self, sn_mlp):
        sn_mlp.set_params(3.0 * sn_mlp.params)
        stale = np.linalg.svd(sn_mlp.effective_weight(0), compute_uv=False)[0]
        assert stale == pytest.approx(3.0, rel=1e-3)
        for W in sn_mlp.spectral_normalize_forward():
            assert np.linalg.svd(W, compute_uv=False)[0] == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("scale", [0.2, 5.0])
    def test_spectral_weights_ignore_weight_scale(self, sn_mlp, scale):
        scaled = copy.deepcopy(sn_mlp)
        scaled.set_params(scale * sn_mlp.params)
        for W, V in zip(sn_mlp.spectral_normalize_forward(), scaled.spectral_normalize_forward()):
            np.testing.assert_allclose(V, W, atol=1e-6)

    def test_spectral_refresh_needs_spectral_norm(self, small_mlp):
        with pytest.raises(ConfigurationError):
            small_mlp.spectral_normalize_forward()

    def test_widths_must_end_in_one(self, rng):
        with pytest.raises(ConfigurationError):
            MlpEnergy([2, 4, 2], rng=rng)


class TestSnapshot:
    def test_snapshot_is_frozen_and_isolated(self, small_mlp, rng):
        snap = small_mlp.snapshot()
        X = rng.normal(size=(5, 2))
        before = snap.energy(X).copy()
        small_mlp.set_params(small_mlp.params + 1.0)
        np.testing.assert_array_equal(snap.energy(X), before)
        assert snap.frozen
        assert not snap.shares_parameters_with(small_mlp)

    def test_frozen_rejects_updates(self, small_mlp):
        snap = small_mlp.snapshot()
        with pytest.raises(FrozenModelError):
            snap.set_params(snap.params)


class TestRbm:
    def test_free_energy_matches_hidden_sum(self, rbm_3x2):
        hs = spin_states(rbm_3x2.n_hidden)
        for v in spin_states(rbm_3x2.n_visible):
            joint = np.array([rbm_3x2.joint_energy(v, h) for h in hs])
            assert -rbm_3x2.energy(v) == pytest.approx(float(logsumexp(-joint)), abs=1e-10)

    def test_exact_marginal_proportional_to_free_energy(self, rbm_3x2):
        marginal = rbm_exact_marginal(rbm_3x2)
        log_q = -rbm_3x2.energy(marginal.states)
        np.testing.assert_allclose(marginal.probs, np.exp(log_q - logsumexp(log_q)), atol=1e-12)
        assert marginal.probs.sum() == pytest.approx(1.0)

    def test_visible_conditionals_match_joint(self, rbm_3x2):
        h = np.array([1.0, -1.0])
        vs = spin_states(3)
        log_w = -np.array([rbm_3x2.joint_energy(v, h) for v in vs])
        p = np.exp(log_w - logsumexp(log_w))
        np.testing.assert_allclose(rbm_conditionals(rbm_3x2, h=h), p @ (vs > 0), atol=1e-12)

    def test_conditionals_need_exactly_one_layer(self, rbm_3x2):
        with pytest.raises(InvalidStateError):
            rbm_conditionals(rbm_3x2)

    def test_uncoupled_units_are_independent(self):
        a = np.array([0.3, -0.7])
        marginal = rbm_exact_marginal(Rbm(np.zeros((2, 3)), a, [0.1, 0.2, -0.4]))
        p_up = marginal.probs @ (marginal.states > 0)
        np.testing.assert_allclose(p_up, 1.0 / (1.0 + np.exp(-2.0 * a)), atol=1e-12)


class TestCheckpoint:
    def test_mlp_round_trip(self, sn_mlp, tmp_path, rng):
        path = save_checkpoint(sn_mlp, tmp_path / "ckpt.json", rng=rng, metadata={"iteration": 3})
        model, restored_rng, metadata = load_checkpoint(path)
        X = rng.normal(size=(4, 2))
        np.testing.assert_array_equal(model.energy(X), sn_mlp.energy(X))
        assert metadata["iteration"] == 3
        assert restored_rng is not None

    def test_gaussian_round_trip(self, gaussian_2d, tmp_path):
        path = save_checkpoint(gaussian_2d, tmp_path / "g.json")
        model, _, _ = load_checkpoint(path)
        np.testing.assert_array_equal(model.params, gaussian_2d.params)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CheckpointFormatError, match="line 1"):
            load_checkpoint(path)

    def test_missing_section(self, gaussian_2d, tmp_path):
        path = save_checkpoint(gaussian_2d, tmp_path / "g.json")
        payload = json.loads(path.read_text())
        del payload["params"]
        path.write_text(json.dumps(payload))
        with pytest.raises(CheckpointFormatError, match="params"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.json")

    def test_rng_restores(self, small_mlp, tmp_path):
        rng = Rng(3)
        rng.normal(size=2)
        path = save_checkpoint(small_mlp, tmp_path / "m.json", rng=rng)
        _, restored, _ = load_checkpoint(path)
        np.testing.assert_array_equal(restored.normal(size=3), rng.normal(size=3))
