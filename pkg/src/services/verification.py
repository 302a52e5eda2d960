"""
Self-contained, seeded identity checks between estimators and against exact
references. Each check returns a ``CheckResult`` with the measured error and the
tolerance it was held to.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from src.exceptions import ConfigurationError
from src.logging_config import get_logger
from src.models import AnalyticGaussianEnergy, GaussianMixtureEnergy, MlpEnergy, Rbm
from src.numerics import Rng, rademacher_sign_vectors
from src.objectives import (
    IsotropicGaussianNoise,
    adabrm,
    adance,
    brm,
    dsm_explicit,
    mle_grad,
    nce_binary,
    sm_denoising,
)
from src.objectives.spairs import LOG_SPAIR, SPair, spair_catalog, spair_residual
from src.samplers.gibbs import gibbs_block_acceptance
from src.samplers.mh import (
    detailed_balance_residual,
    empirical_tv,
    mh_discrete_chain,
    mh_transition_matrix,
)
from src.services.artifacts import write_json

logger = get_logger(__name__)

N_CONFIGS = 50
BATCH = 64


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _random_mlp(rng: Rng) -> MlpEnergy:
    width = int(rng.integers(4, 33))
    return MlpEnergy([2, width, width, 1], rng=rng)


def _random_batches(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=(BATCH, 2)), 2.0 * rng.normal(size=(BATCH, 2))


def check_adance_mle_identity(seed: int = 0) -> CheckResult:
    """At equal parameters the AdaNCE gradient is half the negated MLE estimator."""
    tol = 1e-12
    worst = 0.0
    for rng in Rng(seed).spawn(N_CONFIGS):
        model = _random_mlp(rng)
        data, noise = _random_batches(rng)
        g_ad = adance(model, model.snapshot(), data, noise).grad
        g_mle = mle_grad(model, data, noise).grad
        worst = max(worst, _rel(g_ad, -0.5 * g_mle))
    return CheckResult("adance-mle-identity", worst <= tol, worst, tol, {"configs": N_CONFIGS})


def check_adabrm_equals_adance(seed: int = 0) -> CheckResult:
    tol = 1e-10
    worst = 0.0
    for rng in Rng(seed).spawn(N_CONFIGS):
        model = _random_mlp(rng)
        frozen = model.snapshot()
        model.set_params(model.params + 0.1 * rng.normal(size=model.n_params))
        data, noise = _random_batches(rng)
        a = adance(model, frozen, data, noise)
        b = adabrm(model, frozen, LOG_SPAIR, data, noise)
        loss_err = abs(a.loss_value - b.loss_value) / max(abs(a.loss_value), 1.0)
        worst = max(worst, loss_err, _rel(b.grad, a.grad))
    return CheckResult("adabrm-equals-adance", worst <= tol, worst, tol, {"configs": N_CONFIGS})


def check_brm_equals_nce(seed: int = 0) -> CheckResult:
    tol = 1e-10
    worst = 0.0
    noise_dist = IsotropicGaussianNoise(np.zeros(2), 2.0)
    for rng in Rng(seed).spawn(N_CONFIGS):
        model = _random_mlp(rng)
        c = float(rng.normal())
        data = rng.normal(size=(BATCH, 2))
        noise = noise_dist.sample(BATCH, rng)
        a = nce_binary(model, c, noise_dist, data, noise, v=1.0)
        b = brm(model, c, noise_dist, LOG_SPAIR, data, noise)
        loss_err = abs(a.loss_value - b.loss_value) / max(abs(a.loss_value), 1.0)
        worst = max(worst, loss_err, _rel(b.full_grad, a.full_grad))
    return CheckResult("brm-equals-nce", worst <= tol, worst, tol, {"configs": N_CONFIGS})


def check_adabrm_scaled_gradient(
    seed: int = 0, spairs: Sequence[SPair] | None = None
) -> CheckResult:
    """At g ≡ 1 every pair's gradient is S0'(1) times the negated MLE estimator."""
    tol = 1e-12
    pairs = list(spairs) if spairs is not None else spair_catalog()
    worst = 0.0
    per_pair: dict[str, float] = {}
    for spair in pairs:
        scale = spair.ds0_at_one()
        err = 0.0
        for rng in Rng(seed).spawn(10):
            model = _random_mlp(rng)
            data, noise = _random_batches(rng)
            g = adabrm(model, model.snapshot(), spair, data, noise).grad
            g_mle = mle_grad(model, data, noise).grad
            err = max(err, _rel(g, -scale * g_mle))
        per_pair[spair.name] = err
        worst = max(worst, err)
    return CheckResult("adabrm-scaled-gradient", worst <= tol, worst, tol, per_pair)


def check_dsm_gradient_identity(seed: int = 0) -> CheckResult:
    """
    Explicit and conditional denoising gradients agree in expectation; their
    per-sample difference must have mean within 3 standard errors of zero.
    """
    n, sigma = 10_000, 0.5
    rng = Rng(seed)
    target = GaussianMixtureEnergy.two_modes_1d(separation=3.0, std=0.5)
    smoothed = target.smoothed(sigma)
    model = AnalyticGaussianEnergy([0.3], [[0.8]])
    X = target.sample(n, rng)
    eps = rng.normal(size=X.shape)
    X_tilde = X + sigma * eps

    S = model.score(X_tilde)
    per_cond = model.score_vjp(X_tilde, S + eps / sigma)
    per_expl = model.score_vjp(X_tilde, S - smoothed.score(X_tilde))
    diff = per_expl - per_cond
    se = diff.std(axis=0, ddof=1) / np.sqrt(n)
    z = np.abs(diff.mean(axis=0)) / np.maximum(se, 1e-300)

    g_cond = sm_denoising(model, X, sigma, noise=eps).grad
    g_expl = dsm_explicit(model, smoothed, X, sigma, noise=eps).grad
    worst = float(np.max(z))
    return CheckResult(
        "dsm-gradient-identity",
        worst <= 3.0,
        worst,
        3.0,
        {"grad_conditional": g_cond.tolist(), "grad_explicit": g_expl.tolist(), "draws": n},
    )


def check_projection_identity(seed: int = 0) -> CheckResult:
    """Averaging (vᵀs)² over every Rademacher sign vector gives ‖s‖² exactly."""
    tol = 1e-10
    rng = Rng(seed)
    worst = 0.0
    for d in range(2, 9):
        V = rademacher_sign_vectors(d)
        S = rng.normal(size=(20, d))
        avg = np.mean((S @ V.T) ** 2, axis=1)
        worst = max(worst, float(np.max(np.abs(avg - np.sum(S**2, axis=1)))))
    return CheckResult("projection-identity", worst <= tol, worst, tol, {"dims": "2-8"})


def check_detailed_balance(seed: int = 0) -> CheckResult:
    tol = 1e-12
    tv_tol = 0.01
    probs = np.array([0.2, 0.3, 0.5])
    Q = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
    K = mh_transition_matrix(probs, Q)
    residual = detailed_balance_residual(probs, K)
    states, diagnostics = mh_discrete_chain(probs, Q, 0, 1_000_000, Rng(seed))
    tv = empirical_tv(states, probs)
    return CheckResult(
        "detailed-balance",
        residual <= tol and tv <= tv_tol,
        residual,
        tol,
        {"empirical_tv": tv, "tv_tolerance": tv_tol, "acceptance": diagnostics.acceptance_rate},
    )


def check_gibbs_block_acceptance(seed: int = 0) -> CheckResult:
    tol = 1e-12
    rbm = Rbm.random(3, 2, Rng(seed))
    deviation = gibbs_block_acceptance(rbm)
    return CheckResult("gibbs-block-acceptance", deviation <= tol, deviation, tol)


def check_spair_property(seed: int = 0, spairs: Sequence[SPair] | None = None) -> CheckResult:
    """S0'(g)/S1'(g) = g on the validation grid for every pair."""
    del seed
    tol = 1e-8
    pairs = list(spairs) if spairs is not None else spair_catalog()
    residuals = {s.name: spair_residual(s) for s in pairs}
    worst = max(residuals.values())
    return CheckResult("spair-property", worst <= tol, worst, tol, residuals)


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "adance-mle-identity": check_adance_mle_identity,
    "adabrm-equals-adance": check_adabrm_equals_adance,
    "brm-equals-nce": check_brm_equals_nce,
    "adabrm-scaled-gradient": check_adabrm_scaled_gradient,
    "dsm-gradient-identity": check_dsm_gradient_identity,
    "projection-identity": check_projection_identity,
    "detailed-balance": check_detailed_balance,
    "gibbs-block-acceptance": check_gibbs_block_acceptance,
    "spair-property": check_spair_property,
}

SPAIR_CHECKS = ("adabrm-scaled-gradient", "spair-property")


def run_checks(
    selector: str = "all", seed: int = 0, spairs: Sequence[SPair] | None = None
) -> list[CheckResult]:
    """
    Run one named check or all of them. ``spairs`` replaces the catalogue in the
    checks that iterate over it.
    """
    if selector == "all":
        names = list(CHECKS)
    elif selector in CHECKS:
        names = [selector]
    else:
        raise ConfigurationError(
            f"unknown check '{selector}', expected 'all' or one of {list(CHECKS)}"
        )
    results = []
    for name in names:
        if spairs is not None and name in SPAIR_CHECKS:
            result = CHECKS[name](seed, spairs=spairs)
        else:
            result = CHECKS[name](seed)
        log = logger.info if result.passed else logger.error
        log(
            "Verification check finished",
            check=name,
            verdict=result.verdict,
            error=result.error,
            tolerance=result.tolerance,
        )
        results.append(result)
    return results


def report_dict(results: Sequence[CheckResult]) -> dict[str, Any]:
    return {
        "passed": all(r.passed for r in results),
        "checks": [{**asdict(r), "verdict": r.verdict} for r in results],
    }


def write_report(path: str | Path, results: Sequence[CheckResult]) -> Path:
    return write_json(path, report_dict(results))
