"""
End-to-end runs: build target and model from a ``RunConfig``, train, draw final
samples and write every artifact into the run directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from src.config import settings
from src.exceptions import SamplerDivergedError
from src.logging_config import get_logger, run_context
from src.models.base import EnergyModel
from src.numerics import Rng
from src.samplers.buffer import GaussianPrior, Prior, UniformBoxPrior
from src.samplers.langevin import langevin_chain
from src.schemas.evaluation import EvalRow
from src.schemas.run import RunConfig
from src.schemas.sampling import ChainConfig
from src.services import metrics
from src.services.artifacts import (
    RunDirectory,
    append_eval_rows,
    write_samples_csv,
    write_scatter_svg,
)
from src.services.evaluation import frechet_from_samples
from src.services.targets import build_model, build_target
from src.services.trainer import TrainLog, train_generic

logger = get_logger(__name__)

SWEEP_INTERVALS = (1, 5, 10, 50)
REFERENCE_SAMPLES = 1000


@dataclass
class RunOutcome:
    run_dir: Path
    model: EnergyModel
    log: TrainLog
    final_samples: np.ndarray
    config: RunConfig

    @property
    def diverged(self) -> bool:
        return self.log.diverged


def resolve_run_dir(cfg: RunConfig, out: str | Path | None = None) -> Path:
    if out is not None:
        return Path(out)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(settings.OUTPUT_ROOT) / cfg.config_hash()


def sample_model(
    model: EnergyModel, n: int, chain: ChainConfig, rng: Rng, prior: Prior | None = None
) -> np.ndarray:
    """Endpoints of ``n`` Langevin chains started from ``prior`` (standard normal by default)."""
    if n == 0:
        return np.empty((0, model.dim))
    prior = prior or GaussianPrior(np.zeros(model.dim), 1.0)
    starts = prior.sample(n, rng)
    return langevin_chain(model, starts, chain, rng).final


def run_experiment(cfg: RunConfig, out: str | Path | None = None) -> RunOutcome:
    with run_context(config_hash=cfg.config_hash(), seed=cfg.train.seed):
        return _run_experiment(cfg, out)


def _run_experiment(cfg: RunConfig, out: str | Path | None) -> RunOutcome:
    run_dir = RunDirectory(resolve_run_dir(cfg, out))
    run_dir.write_text(RunDirectory.RESOLVED_CONFIG, cfg.canonical_json() + "\n")

    target = build_target(cfg.target)
    model_rng, train_rng, sample_rng = Rng(cfg.train.seed).spawn(3)
    model = build_model(cfg.model, target.dim, model_rng)
    train_cfg = cfg.to_train_config()
    logger.info(
        "Run started",
        run_dir=str(run_dir.base_path),
        objective=cfg.objective.name,
        target=cfg.target.name,
    )
    model, log = train_generic(
        model, target, train_cfg, checkpoint_dir=run_dir.base_path, rng=train_rng
    )
    log.write_csv(run_dir.path(RunDirectory.TRAIN_LOG))

    samples = np.empty((0, model.dim))
    if not log.diverged:
        prior = UniformBoxPrior.from_data(target.sample(REFERENCE_SAMPLES, sample_rng))
        try:
            samples = sample_model(
                model, cfg.output.n_final_samples, train_cfg.langevin, sample_rng, prior
            )
        except SamplerDivergedError as e:
            logger.error("Final sampling diverged", error=str(e))
            log.diverged = True
            log.divergence_reason = str(e)
    write_samples_csv(run_dir.path(RunDirectory.FINAL_SAMPLES), samples, model.dim)
    write_scatter_svg(run_dir.path(RunDirectory.SCATTER), samples, model.dim)
    metrics.write_exposition(run_dir.path(RunDirectory.METRICS))
    logger.info("Run finished", run_dir=str(run_dir.base_path), diverged=log.diverged)
    return RunOutcome(run_dir.base_path, model, log, samples, cfg)


def k_sweep(
    cfg: RunConfig,
    intervals: Sequence[int] = SWEEP_INTERVALS,
    out_root: str | Path | None = None,
) -> list[EvalRow]:
    """
    Train once per adaptive interval and report the Fréchet-Gaussian distance
    between final samples and fresh target samples.
    """
    root = Path(out_root) if out_root is not None else resolve_run_dir(cfg)
    target = build_target(cfg.target)
    rows: list[EvalRow] = []
    for k in intervals:
        objective = cfg.objective.model_copy(update={"adaptive_interval": int(k)})
        run_cfg = cfg.model_copy(update={"objective": objective})
        outcome = run_experiment(run_cfg, root / f"k{int(k):03d}")
        if outcome.diverged or outcome.final_samples.shape[0] < 2:
            value = float("nan")
        else:
            reference = target.sample(
                max(REFERENCE_SAMPLES, outcome.final_samples.shape[0]),
                Rng(cfg.train.seed).spawn(4)[3],
            )
            value = frechet_from_samples(outcome.final_samples, reference)
        rows.append(
            EvalRow(
                run_id=f"K={int(k)}",
                metric="frechet",
                value=value,
                config_hash=run_cfg.config_hash(),
            )
        )
        logger.info("Sweep point finished", adaptive_interval=int(k), frechet=value)
    append_eval_rows(root / "sweep.csv", rows)
    return rows
