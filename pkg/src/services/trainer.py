"""
Training loop shared by every objective.

Each iteration draws a data batch, produces the negative or noise batch the
objective needs, evaluates its gradient estimate and takes one optimizer step.
The self-adapting objectives keep a frozen snapshot of the model as their noise
model and replace it every ``adaptive_interval`` iterations.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from src.exceptions import (
    ConfigurationError,
    FreezeIsolationError,
    NonFiniteError,
    NonFiniteGradientError,
    RatioOverflowError,
    SamplerDivergedError,
)
from src.logging_config import get_logger
from src.models.base import AnalyticDensity, EnergyModel
from src.models.checkpoint import save_checkpoint
from src.models.mlp import MlpEnergy
from src.numerics import Rng
from src.objectives import (
    FrozenModel,
    GradEstimate,
    IsotropicGaussianNoise,
    adabrm,
    adance,
    brm,
    cnce,
    mle_grad,
    nce_binary,
    nce_rank,
    sm_denoising,
    sm_implicit,
    sm_sliced,
)
from src.objectives.spairs import get_spair
from src.samplers.buffer import ReplayBuffer, prior_from_data
from src.samplers.diagnostics import ChainDiagnostics
from src.samplers.langevin import langevin_chain
from src.schemas.training import OBJECTIVE_NAMES, TrainConfig
from src.services import metrics
from src.services.optimizers import build_optimizer

logger = get_logger(__name__)

TRAIN_LOG_COLUMNS = ["iter", "loss", "grad_norm", "nu", "refresh_flag", "wall_ms"]
ADAPTIVE_OBJECTIVES = ("adance", "adabrm")
LOG_PARTITION_OBJECTIVES = ("nce", "nce_rank", "brm")
DIVERGENCE_ERRORS = (
    SamplerDivergedError,
    NonFiniteGradientError,
    NonFiniteError,
    RatioOverflowError,
)
PRIOR_REFERENCE_SIZE = 1000
N_WITNESS_POINTS = 5


@dataclass
class TrainRecord:
    iteration: int
    loss: float
    grad_norm: float
    nu: float | None = None
    refresh: bool = False
    wall_ms: float | None = None
    acceptance: float | None = None


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)
    refresh_iterations: list[int] = field(default_factory=list)
    diverged: bool = False
    divergence_reason: str | None = None
    log_partition: float | None = None

    @property
    def nu_series(self) -> list[tuple[int, float]]:
        return [(r.iteration, r.nu) for r in self.records if r.nu is not None]

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAIN_LOG_COLUMNS)
        for r in self.records:
            writer.writerow(
                [
                    r.iteration,
                    repr(r.loss),
                    repr(r.grad_norm),
                    "" if r.nu is None else repr(r.nu),
                    int(r.refresh),
                    "" if r.wall_ms is None else f"{r.wall_ms:.3f}",
                ]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.csv_text(), encoding="utf-8")
        return path


@dataclass
class StepResult:
    estimate: GradEstimate
    data_batch: np.ndarray
    negatives: np.ndarray | None
    diagnostics: ChainDiagnostics | None
    refreshed: bool


def nu_trend(log: TrainLog) -> dict[str, float]:
    """Quarter means of the ν series and the least-squares slope over its final quarter."""
    series = log.nu_series
    if len(series) < 8:
        raise ValueError("need at least 8 ν records to measure a trend")
    it = np.array([s[0] for s in series], dtype=float)
    nu = np.array([s[1] for s in series])
    q = len(series) // 4
    slope = float(np.polyfit(it[-q:], nu[-q:], 1)[0])
    return {
        "first_quarter_mean": float(nu[:q].mean()),
        "final_quarter_mean": float(nu[-q:].mean()),
        "final_quarter_slope": slope,
    }


class Trainer:
    def __init__(
        self,
        model: EnergyModel,
        target: AnalyticDensity,
        cfg: TrainConfig,
        checkpoint_dir: str | Path | None = None,
        rng: Rng | None = None,
    ):
        name = cfg.objective.name
        if name not in OBJECTIVE_NAMES:
            raise ConfigurationError(f"unknown objective '{name}'")
        if model.frozen:
            raise ConfigurationError("cannot train a frozen snapshot")
        self.model = model
        self.target = target
        self.cfg = cfg
        self.objective = name
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None

        master = rng if rng is not None else Rng(cfg.seed)
        (
            self.data_rng,
            self.sampler_rng,
            self.objective_rng,
            self.prior_rng,
            self.witness_rng,
        ) = master.spawn(5)
        self.optimizer = build_optimizer(cfg.optimizer)
        self.log = TrainLog()
        self.log_partition = 0.0 if name in LOG_PARTITION_OBJECTIVES else None

        obj = cfg.objective
        self.spair = get_spair(obj.spair) if name in ("brm", "adabrm") else None
        self.noise: IsotropicGaussianNoise | None = None
        if name in ("nce", "nce_rank", "brm"):
            mean = np.zeros(model.dim) if obj.noise.mean is None else np.asarray(obj.noise.mean)
            if mean.shape != (model.dim,):
                raise ConfigurationError(f"objective.noise.mean must have length {model.dim}")
            self.noise = IsotropicGaussianNoise(mean, obj.noise.std)

        self.buffer: ReplayBuffer | None = None
        if name in ADAPTIVE_OBJECTIVES or name == "mle":
            reference = target.sample(PRIOR_REFERENCE_SIZE, self.prior_rng)
            prior = prior_from_data(cfg.buffer.prior, reference, cfg.buffer.prior_margin)
            self.buffer = ReplayBuffer(
                model.dim, prior, cfg.buffer.capacity, cfg.buffer.rejuvenation_rate
            )

        self.frozen: FrozenModel | None = None
        self._witness_points: np.ndarray | None = None
        self._witness_energies: np.ndarray | None = None
        if name in ADAPTIVE_OBJECTIVES:
            self._freeze(0)

        self._estimators: dict[str, Callable[[np.ndarray], tuple[GradEstimate, Any, Any]]] = {
            "adance": self._adaptive_step,
            "adabrm": self._adaptive_step,
            "mle": self._mle_step,
            "nce": self._nce_step,
            "nce_rank": self._nce_rank_step,
            "brm": self._brm_step,
            "cnce": self._cnce_step,
            "sm_implicit": lambda X: (sm_implicit(self.model, X), None, None),
            "sm_denoising": lambda X: (
                sm_denoising(self.model, X, obj.sigma, self.objective_rng),
                None,
                None,
            ),
            "sm_sliced": lambda X: (
                sm_sliced(
                    self.model, X, obj.n_projections, obj.projection_dist, self.objective_rng
                ),
                None,
                None,
            ),
        }

    # -- noise model --------------------------------------------------------------

    def _freeze(self, iteration: int) -> None:
        assert self.buffer is not None
        if iteration > 0 and self.cfg.buffer.reset_on_refresh:
            self.buffer.clear()
        self.frozen = FrozenModel(self.model.snapshot(), self.cfg.langevin, self.buffer)
        self._witness_points = self.target.sample(N_WITNESS_POINTS, self.witness_rng)
        energies = self.frozen.model.energy(self._witness_points)
        self._witness_energies = np.atleast_1d(energies).copy()
        if iteration > 0:
            metrics.noise_refreshes.inc()
            logger.info(
                "Noise model refreshed",
                iteration=iteration,
                refreshes=len(self.log.refresh_iterations) + 1,
            )

    def _check_freeze_isolation(self) -> None:
        if self.frozen is None or self._witness_points is None:
            return
        now = np.atleast_1d(self.frozen.model.energy(self._witness_points))
        if not np.array_equal(now, self._witness_energies):
            raise FreezeIsolationError("frozen noise model changed after an optimizer step")

    def _negatives(self, model: EnergyModel, n: int) -> tuple[np.ndarray, ChainDiagnostics]:
        assert self.buffer is not None
        starts, _ = self.buffer.init_points(n, self.sampler_rng)
        result = langevin_chain(model, starts, self.cfg.langevin, self.sampler_rng)
        self.buffer.push(result.final, self.sampler_rng)
        return result.final, result.diagnostics

    # -- per-objective estimators -------------------------------------------------

    def _adaptive_step(self, X: np.ndarray):
        assert self.frozen is not None
        negatives, diagnostics, _ = self.frozen.draw(X.shape[0], self.sampler_rng)
        if self.objective == "adance":
            est = adance(self.model, self.frozen, X, negatives)
        else:
            assert self.spair is not None
            est = adabrm(self.model, self.frozen, self.spair, X, negatives)
        return est, negatives, diagnostics

    def _mle_step(self, X: np.ndarray):
        negatives, diagnostics = self._negatives(self.model, X.shape[0])
        return mle_grad(self.model, X, negatives), negatives, diagnostics

    def _noise_batch(self, n_data: int) -> np.ndarray:
        assert self.noise is not None
        n_noise = max(1, int(round(n_data / self.cfg.objective.v)))
        return self.noise.sample(n_noise, self.objective_rng)

    def _nce_step(self, X: np.ndarray):
        assert self.log_partition is not None
        Y = self._noise_batch(X.shape[0])
        est = nce_binary(self.model, self.log_partition, self.noise, X, Y, self.cfg.objective.v)
        return est, Y, None

    def _nce_rank_step(self, X: np.ndarray):
        assert self.noise is not None and self.log_partition is not None
        L = self.cfg.objective.collection_size
        n = X.shape[0]
        Y = self.noise.sample(n * (L - 1), self.objective_rng).reshape(n, L - 1, -1)
        collections = np.concatenate([X[:, None, :], Y], axis=1)
        rho = np.full(L, 1.0 / L)
        est = nce_rank(self.model, self.log_partition, self.noise, collections, rho)
        return est, Y.reshape(-1, self.model.dim), None

    def _brm_step(self, X: np.ndarray):
        assert self.spair is not None and self.log_partition is not None
        Y = self._noise_batch(X.shape[0])
        return brm(self.model, self.log_partition, self.noise, self.spair, X, Y), Y, None

    def _cnce_step(self, X: np.ndarray):
        obj = self.cfg.objective
        est = cnce(self.model, X, obj.sigma, obj.kappa, obj.v, self.objective_rng)
        return est, None, None

    # -- loop ---------------------------------------------------------------------

    def step(self, iteration: int) -> StepResult:
        """One optimizer step; ``iteration`` is 1-based."""
        X = self.target.sample(self.cfg.batch_size, self.data_rng)
        est, negatives, diagnostics = self._estimators[self.objective](X)

        params = self.model.params
        if self.log_partition is not None:
            params = np.append(params, self.log_partition)
        updated = self.optimizer.step(params, est.descent_grad, iteration=iteration)
        n = self.model.n_params
        self.model.set_params(updated[:n])
        if self.log_partition is not None:
            self.log_partition = float(updated[n])
        if isinstance(self.model, MlpEnergy) and self.model.spectral_norm:
            self.model.spectral_normalize_forward()
        self._check_freeze_isolation()

        refreshed = False
        if self.objective in ADAPTIVE_OBJECTIVES and iteration % self.cfg.adaptive_interval == 0:
            self._freeze(iteration)
            self.log.refresh_iterations.append(iteration)
            refreshed = True
        return StepResult(est, X, negatives, diagnostics, refreshed)

    def _record(self, iteration: int, result: StepResult, wall_ms: float | None) -> TrainRecord:
        diag = result.diagnostics
        nu = None
        if diag is not None and iteration % self.cfg.nu_log_interval == 0:
            nu = diag.nu
            metrics.langevin_nu.set(nu)
        record = TrainRecord(
            iteration=iteration,
            loss=result.estimate.loss_value,
            grad_norm=result.estimate.grad_norm,
            nu=nu,
            refresh=result.refreshed,
            wall_ms=wall_ms if self.cfg.record_wall_time else None,
            acceptance=None if diag is None else diag.acceptance_rate,
        )
        self.log.records.append(record)
        metrics.train_iterations.inc()
        if self.buffer is not None:
            metrics.buffer_size.set(len(self.buffer))
        logger.debug(
            "Iteration complete",
            iteration=iteration,
            loss=record.loss,
            grad_norm=record.grad_norm,
            nu=nu,
        )
        return record

    def _checkpoint(self, name: str, iteration: int) -> None:
        if self.checkpoint_dir is None:
            return
        save_checkpoint(
            self.model,
            self.checkpoint_dir / name,
            rng=self.sampler_rng,
            metadata={
                "iteration": iteration,
                "objective": self.objective,
                "log_partition": self.log_partition,
                "diverged": self.log.diverged,
                "optimizer": self.optimizer.state_dict(),
            },
        )

    def run(self) -> tuple[EnergyModel, TrainLog]:
        cfg = self.cfg
        logger.info(
            "Training started",
            objective=self.objective,
            iterations=cfg.iterations,
            batch_size=cfg.batch_size,
            adaptive_interval=cfg.adaptive_interval,
            seed=cfg.seed,
        )
        last = 0
        for t in range(1, cfg.iterations + 1):
            start = time.perf_counter()
            try:
                result = self.step(t)
            except DIVERGENCE_ERRORS as e:
                self.log.diverged = True
                self.log.divergence_reason = str(e)
                metrics.sampler_divergences.inc()
                logger.error("Training diverged", iteration=t, error=str(e))
                break
            self._record(t, result, (time.perf_counter() - start) * 1000.0)
            last = t
            if cfg.checkpoint_interval and t % cfg.checkpoint_interval == 0:
                self._checkpoint(f"checkpoint_{t:06d}.json", t)

        self.log.log_partition = self.log_partition
        self._checkpoint("checkpoint_final.json", last)
        logger.info(
            "Training finished",
            objective=self.objective,
            iterations=last,
            refreshes=len(self.log.refresh_iterations),
            diverged=self.log.diverged,
        )
        return self.model, self.log


def train_generic(
    model: EnergyModel,
    target: AnalyticDensity,
    cfg: TrainConfig,
    checkpoint_dir: str | Path | None = None,
    rng: Rng | None = None,
) -> tuple[EnergyModel, TrainLog]:
    """Train with any objective; ``rng`` defaults to a stream seeded by ``cfg.seed``."""
    return Trainer(model, target, cfg, checkpoint_dir, rng).run()


def train_adance(
    model: EnergyModel,
    target: AnalyticDensity,
    cfg: TrainConfig,
    checkpoint_dir: str | Path | None = None,
    rng: Rng | None = None,
) -> tuple[EnergyModel, TrainLog]:
    if cfg.objective.name != "adance":
        raise ConfigurationError(
            f"train_adance needs objective 'adance', got '{cfg.objective.name}'"
        )
    return train_generic(model, target, cfg, checkpoint_dir, rng)
