"""
Command-line front end: ``train``, ``sample``, ``eval``, ``verify`` and ``sweep``.

Exit codes: 0 success, 1 usage/schema/configuration, 2 runtime divergence,
3 verification failure, 4 I/O or checkpoint format.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from src.config import settings
from src.exceptions import (
    CheckpointFormatError,
    ConfigurationError,
    EbmLabError,
    NonFiniteGradientError,
    RatioOverflowError,
    SamplerDivergedError,
)
from src.logging_config import get_logger, setup_logging
from src.models.checkpoint import load_checkpoint
from src.numerics import Rng
from src.samplers.buffer import UniformBoxPrior
from src.samplers.langevin import long_run_samples
from src.schemas.evaluation import EvalRow
from src.schemas.run import RunConfig
from src.schemas.sampling import ChainOverrides, chain_preset
from src.services.artifacts import (
    RunDirectory,
    append_eval_rows,
    read_samples_csv,
    write_samples_csv,
    write_scatter_svg,
)
from src.services.evaluation import (
    check_grid_dim,
    frechet_from_samples,
    grid_kl,
    oracle_log_likelihood,
    target_grid,
)
from src.services.experiments import (
    REFERENCE_SAMPLES,
    SWEEP_INTERVALS,
    k_sweep,
    run_experiment,
    sample_model,
)
from src.services.targets import build_target
from src.services.verification import CHECKS, run_checks, write_report

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_VERIFY_FAILED = 3
EXIT_IO = 4

SAMPLES_FILE = "samples.csv"
EVAL_FILE = "eval.csv"
VERIFY_REPORT = "verify_report.json"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, which is reserved for divergence here."""

    def error(self, message: str) -> Any:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _locate(text: str, loc: Sequence[Any]) -> int | None:
    """Line of the innermost key along ``loc``, searching forward from each parent key."""
    pos = 0
    found = False
    for part in loc:
        if not isinstance(part, str):
            continue
        idx = text.find(f'"{part}"', pos)
        if idx < 0:
            break
        pos, found = idx, True
    return text.count("\n", 0, pos) + 1 if found else None


def format_validation_error(path: str | Path, text: str, err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        field = ".".join(str(p) for p in e["loc"])
        line = _locate(text, e["loc"])
        where = f"{path}:{line}" if line is not None else str(path)
        lines.append(f"{where}: {field}: {e['msg']}")
    return "\n".join(lines)


def load_run_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(format_validation_error(path, text, e)) from e


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    update: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        update["train"] = cfg.train.model_copy(update={"seed": args.seed})
    if getattr(args, "preset", None) is not None:
        update["sampler"] = cfg.sampler.model_copy(update={"preset": args.preset})
    return cfg.model_copy(update=update) if update else cfg


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    outcome = run_experiment(cfg, args.out)
    print(f"run directory: {outcome.run_dir}")
    if outcome.diverged:
        print(f"training diverged: {outcome.log.divergence_reason}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    model, _, _ = load_checkpoint(args.checkpoint)
    overrides = ChainOverrides(steps=args.steps, step_size=args.step_size)
    chain = chain_preset(args.preset or "matched", overrides)
    rng = Rng(args.seed if args.seed is not None else settings.DEFAULT_SEED)
    out = RunDirectory(args.out or Path(args.checkpoint).parent / "samples")

    if args.n == 0 or args.burn_in is None:
        X = sample_model(model, args.n, chain, rng)
    else:
        # one long chain, thinned after burn-in
        steps = max(chain.steps, args.burn_in + args.n * chain.thin)
        chain = chain.model_copy(update={"steps": steps})
        X = long_run_samples(model, rng.normal(size=model.dim), chain, rng, args.burn_in)
        X = X[: args.n]
    write_samples_csv(out.path(SAMPLES_FILE), X, model.dim)
    write_scatter_svg(out.path(RunDirectory.SCATTER), X, model.dim)
    logger.info("Samples written", path=str(out.path(SAMPLES_FILE)), n=int(X.shape[0]))
    print(f"samples: {out.path(SAMPLES_FILE)}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = sorted(set(metrics) - {"frechet", "loglik", "grid_kl"})
    if unknown:
        raise ConfigurationError(f"unknown metrics {unknown}; expected frechet, loglik, grid_kl")

    cfg = load_run_config(args.config) if args.config else None
    target = build_target(cfg.target) if cfg is not None else None
    model = load_checkpoint(args.checkpoint)[0] if args.checkpoint else None
    if "grid_kl" in metrics:
        if model is None or target is None:
            raise ConfigurationError("grid_kl needs --checkpoint and --config")
        check_grid_dim(model.dim)

    rng = Rng(args.seed if args.seed is not None else settings.DEFAULT_SEED)
    sample_rng, ref_rng = rng.spawn(2)
    samples = read_samples_csv(args.samples) if args.samples else None
    if samples is None and model is not None and ({"frechet", "loglik"} & set(metrics)):
        if target is None:
            raise ConfigurationError("sampling a checkpoint for evaluation needs --config")
        prior = UniformBoxPrior.from_data(target.sample(REFERENCE_SAMPLES, sample_rng))
        chain = cfg.sampler.chain() if cfg is not None else chain_preset("matched")
        samples = sample_model(model, args.n, chain, sample_rng, prior)

    run_id = args.run_id or Path(args.checkpoint or args.samples or "eval").parent.name or "eval"
    config_hash = cfg.config_hash() if cfg is not None else ""
    rows: list[EvalRow] = []
    for metric in metrics:
        if metric == "frechet":
            if samples is None:
                raise ConfigurationError("frechet needs --samples or --checkpoint")
            if args.reference:
                reference = read_samples_csv(args.reference)
            elif target is not None:
                reference = target.sample(max(REFERENCE_SAMPLES, samples.shape[0]), ref_rng)
            else:
                raise ConfigurationError("frechet needs --reference or --config")
            value = frechet_from_samples(samples, reference)
        elif metric == "loglik":
            if samples is None or target is None:
                raise ConfigurationError("loglik needs samples and --config")
            value = oracle_log_likelihood(target, samples)
        else:
            assert model is not None and target is not None
            value = grid_kl(model, target, target_grid(target, args.grid_points))
        rows.append(EvalRow(run_id=run_id, metric=metric, value=value, config_hash=config_hash))
        print(f"{metric}: {value!r}")

    out_csv = Path(args.out) if args.out else Path(settings.OUTPUT_ROOT) / EVAL_FILE
    append_eval_rows(out_csv, rows)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
    results = run_checks(args.check, seed=seed)
    for r in results:
        print(f"{r.verdict}  {r.name}  error={r.error:.3e}  tolerance={r.tolerance:.1e}")
    report = Path(args.out) if args.out else Path(settings.OUTPUT_ROOT) / VERIFY_REPORT
    write_report(report, results)
    print(f"report: {report}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    try:
        intervals: Sequence[int] = (
            [int(k) for k in args.intervals.split(",")] if args.intervals else SWEEP_INTERVALS
        )
    except ValueError as e:
        raise ConfigurationError(f"--intervals must be comma-separated integers: {e}") from e
    if any(k < 1 for k in intervals):
        raise ConfigurationError(f"adaptive intervals must be >= 1, got {intervals}")
    rows = k_sweep(cfg, intervals, args.out)
    for row in rows:
        print(f"{row.run_id}  frechet={row.value!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ebm-lab", description="Energy-based model training lab")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="overrides LOG_LEVEL",
    )
    parser.add_argument("--log-format", choices=["json", "text"], help="overrides LOG_FORMAT")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--preset", choices=["paper", "matched"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="draw samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("-n", "--n", type=int, default=1000)
    p.add_argument("--steps", type=int)
    p.add_argument("--step-size", type=float)
    p.add_argument("--burn-in", type=int, help="use one long chain thinned after this many steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--preset", choices=["paper", "matched"])
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="append metric rows to an evaluation CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--samples")
    p.add_argument("--reference")
    p.add_argument("--metrics", default="frechet")
    p.add_argument("--run-id")
    p.add_argument("-n", "--n", type=int, default=1000)
    p.add_argument("--grid-points", type=int, default=128)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the identity checks")
    p.add_argument("--check", default="all", choices=["all", *CHECKS])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="train once per adaptive interval")
    p.add_argument("--config", required=True)
    p.add_argument("--intervals", help="comma-separated, e.g. 1,5,10,20,50")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--preset", choices=["paper", "matched"])
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_format)
    try:
        return int(args.func(args))
    except (SamplerDivergedError, NonFiniteGradientError, RatioOverflowError) as e:
        logger.error("Run diverged", error=str(e))
        print(f"diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointFormatError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_IO
    except EbmLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
