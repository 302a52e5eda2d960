import numpy as np
import pytest

from src.models import AnalyticGaussianEnergy, GaussianMixtureEnergy, MlpEnergy, Rbm
from src.numerics import Rng
from src.schemas.run import RunConfig


@pytest.fixture
def rng() -> Rng:
    return Rng(1234)


@pytest.fixture
def small_mlp(rng: Rng) -> MlpEnergy:
    return MlpEnergy([2, 8, 8, 1], rng=rng)


@pytest.fixture
def sn_mlp(rng: Rng) -> MlpEnergy:
    return MlpEnergy([2, 16, 16, 1], rng=rng, spectral_norm=True)


@pytest.fixture
def gaussian_2d() -> AnalyticGaussianEnergy:
    return AnalyticGaussianEnergy.from_covariance([0.5, -1.0], [[1.0, 0.3], [0.3, 0.5]])


@pytest.fixture
def standard_1d() -> AnalyticGaussianEnergy:
    return AnalyticGaussianEnergy.standard(1)


@pytest.fixture
def four_modes() -> GaussianMixtureEnergy:
    return GaussianMixtureEnergy.four_modes()


@pytest.fixture
def two_modes() -> GaussianMixtureEnergy:
    return GaussianMixtureEnergy.two_modes_1d(separation=3.0, std=0.5)


@pytest.fixture
def rbm_3x2() -> Rbm:
    return Rbm.random(3, 2, Rng(7))


@pytest.fixture
def batches(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=(64, 2)), 2.0 * rng.normal(size=(64, 2))


@pytest.fixture
def gaussian_run_config(tmp_path) -> RunConfig:
    """Short 1D Gaussian run used by the end-to-end and CLI tests."""
    return RunConfig.model_validate(
        {
            "target": {"name": "gaussian", "parameters": {"mean": [0.0], "std": 1.0}},
            "model": {"kind": "mlp", "widths": [1, 8, 8, 1]},
            "objective": {"name": "adance", "adaptive_interval": 1},
            "sampler": {"preset": "matched", "overrides": {"steps": 10}},
            "train": {"iterations": 20, "batch_size": 16, "seed": 3, "nu_log_interval": 5},
            "output": {"directory": str(tmp_path / "run"), "n_final_samples": 50},
        }
    )


@pytest.fixture
def run_dir(tmp_path):
    path = tmp_path / "run"
    path.mkdir()
    return path
