from src.samplers.buffer import GaussianPrior, ReplayBuffer, UniformBoxPrior, prior_from_data
from src.samplers.diagnostics import ChainDiagnostics, grad_magnitude_nu, write_trace_csv
from src.samplers.gibbs import gibbs_block_acceptance, gibbs_rbm
from src.samplers.hmc import hmc_chain, leapfrog
from src.samplers.langevin import LangevinResult, langevin_chain, long_run_samples
from src.samplers.mh import mh_chain, mh_discrete_chain, mh_transition_matrix

__all__ = [
    "ChainDiagnostics",
    "GaussianPrior",
    "LangevinResult",
    "ReplayBuffer",
    "UniformBoxPrior",
    "gibbs_block_acceptance",
    "gibbs_rbm",
    "grad_magnitude_nu",
    "hmc_chain",
    "langevin_chain",
    "leapfrog",
    "long_run_samples",
    "mh_chain",
    "mh_discrete_chain",
    "mh_transition_matrix",
    "prior_from_data",
    "write_trace_csv",
]
