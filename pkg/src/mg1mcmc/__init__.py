"""Exact Bayesian inference for the M/G/1 queue from interdeparture times."""

from .estimator import MG1Sampler
from .kernels import SCHEMES, AcceptanceStats, ChainState, SchemeSpec, TuningParams, init_state, scheme_step
from .model import (
    ConstraintSummary,
    LatentArrivals,
    NaturalParameters,
    Observations,
    Parameters,
    Prior,
    SupportError,
    compute_summary,
    from_natural,
    log_posterior,
    log_posterior_cached,
    to_natural,
)
from .runner import run_chain, run_chains

__version__ = "0.1.0"
