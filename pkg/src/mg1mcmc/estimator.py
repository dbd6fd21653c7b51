"""Estimator front end: configure a scheme, fit to interdeparture times."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fraction, check_interdeparture
from .diagnostics import ChainArchive, act_report, posterior_means
from .kernels import DEFAULT_PRIOR, TuningParams, get_scheme
from .model import Observations
from .presets import get_tuning
from .runner import run_chains


def resolve_tuning(tuning) -> TuningParams:
    if isinstance(tuning, TuningParams):
        return tuning
    if isinstance(tuning, str):
        return get_tuning(tuning)
    if isinstance(tuning, dict):
        return TuningParams(**tuning)
    raise TypeError("tuning must be a preset name, a dict or a TuningParams")


class MG1Sampler(BaseEstimator):
    """Posterior sampler for the M/G/1 queue with uniform service times.

    Parameters
    ----------
    scheme : {"basic", "shift", "range", "rate", "all"}
    tuning : str, dict or TuningParams
        A preset name (``frequent``, ``intermediate``, ``rare``) or explicit
        step sizes.
    n_iter : int
        Iterations per chain, burn-in included.
    n_chains : int
    burn_in : float
        Fraction of each chain discarded, in [0, 0.5].
    thin : int
    seed : int, optional
    n_jobs : int
        Worker processes; 1 runs the chains in this process.
    prior : Prior, optional

    Attributes
    ----------
    archive_ : ChainArchive
    posterior_mean_ : ndarray of shape (3,)
        Estimated posterior means of (theta1, theta2 - theta1, log theta3).
    mean_report_ : MeanReport
    act_report_ : ActReport or None
        None when fewer than 20 draws per chain are kept.
    acceptance_rates_ : dict
    seconds_per_iter_ : float
    """

    def __init__(
        self,
        scheme="all",
        tuning="intermediate",
        n_iter=10_000,
        n_chains=5,
        burn_in=0.1,
        thin=1,
        seed=None,
        n_jobs=1,
        prior=None,
    ):
        self.scheme = scheme
        self.tuning = tuning
        self.n_iter = n_iter
        self.n_chains = n_chains
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.n_jobs = n_jobs
        self.prior = prior

    def fit(self, y, _=None):
        obs = Observations(check_interdeparture(y))
        spec = get_scheme(self.scheme)
        tuning = resolve_tuning(self.tuning)
        burn_in = check_fraction(self.burn_in, "burn_in", 0.0, 0.5)
        if int(self.n_chains) < 1 or int(self.n_iter) < 1:
            raise ValueError("n_chains and n_iter must be >= 1")
        results = run_chains(
            obs, tuning, spec, int(self.n_iter), int(self.n_chains),
            prior=self.prior or DEFAULT_PRIOR, seed=self.seed, thin=int(self.thin), n_jobs=self.n_jobs,
        )
        self.archive_ = ChainArchive.from_results(results, burn_in, label=spec.label)
        self.posterior_mean_ = self.archive_.traces.reshape(-1, 3).mean(axis=0)
        self.mean_report_ = posterior_means(self.archive_) if self.archive_.n_runs > 1 else None
        self.act_report_ = act_report(self.archive_) if self.archive_.n_draws >= 20 else None
        self.acceptance_rates_ = self.archive_.acceptance_rates()
        self.seconds_per_iter_ = self.archive_.seconds_per_iter
        return self

    def draws(self) -> np.ndarray:
        """Pooled post-burn-in draws of eta, shape (runs * draws, 3)."""
        check_is_fitted(self, "archive_")
        return self.archive_.traces.reshape(-1, 3)
