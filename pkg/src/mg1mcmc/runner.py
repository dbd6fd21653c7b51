"""Run independent, reproducibly seeded chains of a sampling scheme."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _core
from .kernels import (
    DEFAULT_PRIOR,
    AcceptanceStats,
    ChainState,
    SchemeSpec,
    TuningParams,
    _arrays,
    _rebuild,
    get_scheme,
    init_state,
)
from .model import Observations, Prior, SupportError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 2048


@dataclass
class ChainResult:
    """One chain: eta after every ``thin``-th iteration, counts and timing."""

    trace: np.ndarray
    stats: AcceptanceStats
    seconds: float
    n_iter: int
    thin: int
    final_state: ChainState

    @property
    def seconds_per_iter(self) -> float:
        return self.seconds / self.n_iter

    def retained(self, burn_in: float) -> np.ndarray:
        """Rows recorded at or after iteration ``floor(burn_in * n_iter)``."""
        burn = int(math.floor(burn_in * self.n_iter))
        first = max(0, -(-(burn - self.thin + 1) // self.thin))
        return self.trace[first:]


def draw_deviates(rng: np.random.Generator, size: int, n: int, k: int, spec: SchemeSpec):
    """Uniform and normal deviates for ``size`` iterations, in a fixed order.

    For ``size == 1`` the draw order matches composing the public kernels in
    :func:`mg1mcmc.kernels.scheme_step`, so the two paths give identical chains.
    """
    gu = rng.random((size, n))
    mz = rng.standard_normal((size, k, 3))
    mu = rng.random((size, k))
    if spec.use_shift:
        sdev = np.column_stack((rng.standard_normal(size), rng.random(size)))
    else:
        sdev = np.zeros((size, 2))
    rdev = rng.random((size, 2)) if spec.use_range else np.zeros((size, 2))
    qdev = rng.random((size, 2)) if spec.use_rate else np.zeros((size, 2))
    return gu, mz, mu, sdev, rdev, qdev


_compiled = False


def _ensure_compiled():
    global _compiled
    if _compiled:
        return
    obs = Observations([3.0, 2.0])
    state = init_state(obs, rng=0)
    for flags in (SchemeSpec(), SchemeSpec(True, True, True)):
        _advance(state, obs, DEFAULT_PRIOR, TuningParams((0.1, 0.1, 0.1)), flags, 2, 1, 2)
    _compiled = True


def _advance(state, obs, prior, tuning, spec, n_iter, thin, block_size):
    v, eta, st, counts = _arrays(state)
    vbuf = np.empty_like(v)
    prior_arr = prior.as_array()
    sd = np.array(tuning.met_prop_sd)
    flags = spec.flags
    sig_shift = math.sqrt(tuning.sigma2_shift)
    trace = np.empty((n_iter // thin, 3))
    rows = 0
    done = 0
    rng = state.rng
    while done < n_iter:
        size = min(block_size, n_iter - done)
        gu, mz, mu, sdev, rdev, qdev = draw_deviates(rng, size, obs.n, tuning.met_repeats, spec)
        wrote, code = _core.run_block(
            v, vbuf, obs.y, obs.x, eta, st, prior_arr, sd, flags, sig_shift,
            tuning.c_range, tuning.c_rate, gu, mz, mu, sdev, rdev, qdev, counts,
            trace[rows:], done, thin,
        )
        if code != -1:
            where = f"v[{code}]" if code >= 0 else "the sweep"
            raise SupportError(f"iteration {done + wrote * thin}: empty conditional at {where}")
        rows += wrote
        done += size
    return trace[:rows], _rebuild(state, v, eta, st, counts)


def run_chain(
    obs: Observations,
    tuning: TuningParams,
    scheme="all",
    n_iter: int = 10_000,
    *,
    prior: Prior = DEFAULT_PRIOR,
    rng=None,
    thin: int = 1,
    state: ChainState | None = None,
    block_size: int = BLOCK_SIZE,
) -> ChainResult:
    """Run one chain for ``n_iter`` iterations.

    Parameters
    ----------
    obs : Observations
    tuning : TuningParams
    scheme : str or SchemeSpec
        One of ``basic``, ``shift``, ``range``, ``rate``, ``all``.
    n_iter : int
    prior : Prior
    rng : int, SeedSequence or Generator, optional
        Ignored when ``state`` is given (the state carries its own stream).
    thin : int
        Keep eta after every ``thin``-th iteration.
    state : ChainState, optional
        Starting state; defaults to :func:`mg1mcmc.kernels.init_state`.
    block_size : int
        Iterations per compiled call. Chains are reproducible for a fixed
        block size; ``block_size=1`` reproduces :func:`scheme_step` exactly.
    """
    spec = get_scheme(scheme)
    if n_iter < 1 or thin < 1:
        raise ValueError("n_iter and thin must be positive")
    if state is None:
        state = init_state(obs, prior, np.random.default_rng(rng))
    _ensure_compiled()
    t0 = time.perf_counter()
    trace, final = _advance(state, obs, prior, tuning, spec, n_iter, thin, block_size)
    seconds = time.perf_counter() - t0
    stats = AcceptanceStats(final.stats.counts - state.stats.counts)
    return ChainResult(trace, stats, seconds, n_iter, thin, final)


def _run_one(args):
    obs_y, tuning, scheme, n_iter, prior, seed_seq, thin = args
    result = run_chain(
        Observations(obs_y), tuning, scheme, n_iter, prior=prior, rng=np.random.default_rng(seed_seq), thin=thin
    )
    return result


def run_chains(
    obs: Observations,
    tuning: TuningParams,
    scheme="all",
    n_iter: int = 10_000,
    n_chains: int = 5,
    *,
    prior: Prior = DEFAULT_PRIOR,
    seed=None,
    thin: int = 1,
    n_jobs: int = 1,
) -> list[ChainResult]:
    """Run ``n_chains`` chains with independent streams spawned from ``seed``."""
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = seq.spawn(n_chains)
    jobs = [(obs.y, tuning, get_scheme(scheme), n_iter, prior, child, thin) for child in children]
    if n_jobs == 1:
        results = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=None if n_jobs < 0 else n_jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    for s, res in enumerate(results):
        logger.info(
            "chain %d: %d iterations in %.2fs, acceptance %s",
            s, res.n_iter, res.seconds, {k: round(r, 3) for k, r in res.stats.rates().items()},
        )
    return results
