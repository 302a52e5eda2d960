from src.models.base import AnalyticDensity, EnergyModel, ParamLayout
from src.models.checkpoint import load_checkpoint, save_checkpoint
from src.models.gaussian import AnalyticGaussianEnergy
from src.models.mixture import GaussianMixtureEnergy
from src.models.mlp import MlpEnergy
from src.models.rbm import Rbm, rbm_conditionals, rbm_exact_marginal

__all__ = [
    "AnalyticDensity",
    "AnalyticGaussianEnergy",
    "EnergyModel",
    "GaussianMixtureEnergy",
    "MlpEnergy",
    "ParamLayout",
    "Rbm",
    "load_checkpoint",
    "rbm_conditionals",
    "rbm_exact_marginal",
    "save_checkpoint",
]
