"""Bayesian community detection with diagonally dominant stochastic block models."""
from .identify import RecoveryError, is_diagonally_dominant, recover, sup_norm, theta_from
from .inference import (
    adjusted_rand_index,
    bias_rmse,
    effective_k,
    hellinger,
    kl_product_bernoulli,
    mean_ari,
    partition_key,
    posterior_mode_k,
    posterior_mode_z,
)
from .model import (
    Assignment,
    BlockStats,
    Hyperparams,
    block_stats,
    log_likelihood,
    log_posterior,
    log_prior_k,
    log_prior_p,
    log_prior_z,
)
from .netgen import (
    AdjacencyMatrix,
    GroundTruth,
    balanced_assignment,
    generate_sbm,
    make_case,
    read_edgelist,
    write_edgelist,
)
from .sampler import ChainConfig, ChainState, SBMPosterior, Trace, init_state, run_chain, step

__version__ = "0.1.0"
