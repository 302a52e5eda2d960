"""Long training runs checked against the thresholds in the claims ledger."""

from pathlib import Path

import numpy as np
import pytest

from src.models import GaussianMixtureEnergy, MlpEnergy
from src.numerics import Rng, logsumexp
from src.schemas.run import RunConfig
from src.schemas.training import TrainConfig
from src.services.evaluation import (
    frechet_from_samples,
    grid_kl,
    load_claims_ledger,
    target_grid,
)
from src.services.experiments import REFERENCE_SAMPLES, k_sweep, run_experiment
from src.services.targets import build_target
from src.services.trainer import nu_trend, train_adance, train_generic

pytestmark = pytest.mark.slow

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def ledger():
    return load_claims_ledger(ROOT / "claims_ledger.json")


def claim_config(claim) -> TrainConfig:
    s = claim.settings
    return TrainConfig.model_validate(
        {
            "objective": {"name": s["objective"], "adaptive_interval": s["adaptive_interval"]},
            "iterations": s["iterations"],
            "batch_size": s["batch_size"],
            "nu_log_interval": s.get("nu_log_interval", 10),
            "seed": 0,
        }
    )


def claim_run_config(claim, seed: int | None = None) -> RunConfig:
    """Shipped run config named by the claim, with its iteration count and an optional seed."""
    s = claim.settings
    cfg = RunConfig.model_validate_json((ROOT / str(s["config"])).read_text())
    train = {"iterations": int(s.get("iterations", cfg.train.iterations))}
    if seed is not None:
        train["seed"] = seed
    return cfg.model_copy(update={"train": cfg.train.model_copy(update=train)})


def log_partition_on_grid(model, grid) -> float:
    x = grid.axes[0].points()
    return float(logsumexp(-np.atleast_1d(model.energy(x[:, None]))) + np.log(x[1] - x[0]))


@pytest.fixture(scope="module")
def four_modes_run(ledger, tmp_path_factory):
    cfg = claim_run_config(ledger.claims["four_modes_grid_kl"])
    return run_experiment(cfg, tmp_path_factory.mktemp("four_modes"))


def test_four_modes_grid_kl(ledger, four_modes_run):
    claim = ledger.claims["four_modes_grid_kl"]
    assert not four_modes_run.diverged
    target = build_target(four_modes_run.config.target)
    grid = target_grid(target, int(claim.settings["grid_points"]))
    assert grid_kl(four_modes_run.model, target, grid) < claim.threshold


def test_four_modes_frechet(ledger, four_modes_run):
    claim = ledger.claims["four_modes_frechet"]
    assert not four_modes_run.diverged
    target = build_target(four_modes_run.config.target)
    reference = target.sample(REFERENCE_SAMPLES, Rng(int(claim.settings["reference_seed"])))
    assert frechet_from_samples(four_modes_run.final_samples, reference) < claim.threshold


def test_nce_self_normalises(ledger):
    claim = ledger.claims["nce_log_partition"]
    s = claim.settings
    target = GaussianMixtureEnergy.two_modes_1d(separation=float(s["separation"]), std=0.5)
    cfg = TrainConfig.model_validate(
        {
            "objective": {"name": "nce"},
            "iterations": s["iterations"],
            "batch_size": s["batch_size"],
            "optimizer": {"lr": s["lr"]},
            "seed": 0,
        }
    )
    trained, log = train_generic(MlpEnergy([1, 32, 32, 1], rng=Rng(0)), target, cfg)
    assert not log.diverged
    log_z = log_partition_on_grid(trained, target_grid(target, int(s["grid_points"])))
    assert abs(log.log_partition - log_z) < claim.threshold


def test_nu_flat_under_spectral_norm(ledger):
    claim = ledger.claims["sn_nu_relative_slope"]
    cfg = claim_config(claim)
    model = MlpEnergy([2, 64, 64, 1], rng=Rng(0), spectral_norm=True)
    _, log = train_adance(model, GaussianMixtureEnergy.four_modes(), cfg)
    assert not log.diverged
    trend = nu_trend(log)
    relative = abs(trend["final_quarter_slope"]) * cfg.iterations / trend["final_quarter_mean"]
    assert relative <= claim.threshold


def test_nu_grows_without_spectral_norm(ledger, tmp_path):
    claim = ledger.claims["no_sn_nu_growth"]
    outcome = run_experiment(claim_run_config(claim), tmp_path / "no_sn")
    if outcome.diverged:
        assert outcome.log.divergence_reason
        return
    trend = nu_trend(outcome.log)
    assert trend["final_quarter_mean"] >= claim.threshold * trend["first_quarter_mean"]


def test_frechet_degrades_with_adaptive_interval(ledger, tmp_path):
    claim = ledger.claims["k_sweep_frechet_trend"]
    per_seed = []
    for seed in range(int(claim.settings["seeds"])):
        rows = k_sweep(claim_run_config(claim, seed), out_root=tmp_path / f"seed{seed}")
        # a diverged sweep point counts as the worst possible distance
        values = np.array([row.value for row in rows])
        per_seed.append(np.where(np.isnan(values), np.inf, values))
    distances = np.array(per_seed)
    monotone = sum(bool(np.all(d[1:] >= d[:-1])) for d in distances)
    assert monotone >= claim.threshold
    median = np.median(distances, axis=0)
    assert median[-1] > median[0]
