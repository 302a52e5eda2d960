from src.objectives.adaptive import adabrm, adance, brm
from src.objectives.base import GradEstimate
from src.objectives.mle import mle_grad
from src.objectives.nce import cnce, nce_binary, nce_rank, rank_posterior
from src.objectives.noise import ExactDensity, FrozenModel, IsotropicGaussianNoise, NoiseSpec
from src.objectives.score_matching import dsm_explicit, sm_denoising, sm_implicit, sm_sliced
from src.objectives.spairs import SPair, bregman_point, get_spair, spair_catalog

__all__ = [
    "ExactDensity",
    "FrozenModel",
    "GradEstimate",
    "IsotropicGaussianNoise",
    "NoiseSpec",
    "SPair",
    "adabrm",
    "adance",
    "bregman_point",
    "brm",
    "cnce",
    "dsm_explicit",
    "get_spair",
    "mle_grad",
    "nce_binary",
    "nce_rank",
    "rank_posterior",
    "sm_denoising",
    "sm_implicit",
    "sm_sliced",
    "spair_catalog",
]
