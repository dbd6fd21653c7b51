"""MCMC updates for the joint posterior of arrivals and parameters.

Five updates are available: a Gibbs sweep over the arrival times, K repeated
random-walk Metropolis updates of eta given the arrivals (constant time each,
thanks to the cached constraint summary), and three joint updates of
parameters and arrivals: shift, range scale and rate scale. Every function
here takes a :class:`ChainState` and returns a new one; the random stream
carried by the state is advanced.

Indices are 0-based: customer ``i`` in the code is customer ``i + 1`` in the
usual queueing notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _core
from ._validation import check_triple
from .model import (
    ConstraintSummary,
    LatentArrivals,
    NaturalParameters,
    Observations,
    Prior,
    SupportError,
)

DEFAULT_PRIOR = Prior()


@dataclass(frozen=True)
class TuningParams:
    met_prop_sd: tuple
    met_repeats: int = 1
    sigma2_shift: float = 1.0
    c_range: float = 1.1
    c_rate: float = 1.1

    def __post_init__(self):
        sd = tuple(float(s) for s in check_triple(self.met_prop_sd, "met_prop_sd"))
        object.__setattr__(self, "met_prop_sd", sd)
        if int(self.met_repeats) != self.met_repeats or self.met_repeats < 1:
            raise ValueError("met_repeats must be an integer >= 1")
        object.__setattr__(self, "met_repeats", int(self.met_repeats))
        for name in ("sigma2_shift", "c_range", "c_rate"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite")
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class SchemeSpec:
    """Which joint updates follow the Gibbs sweep and Metropolis updates."""

    use_shift: bool = False
    use_range: bool = False
    use_rate: bool = False

    @property
    def flags(self) -> np.ndarray:
        return np.array([self.use_shift, self.use_range, self.use_rate], dtype=np.bool_)

    @property
    def label(self) -> str:
        parts = [n for n, on in (("Shift", self.use_shift), ("Range", self.use_range), ("Rate", self.use_rate)) if on]
        if not parts:
            return "Basic"
        if len(parts) == 3:
            return "Basic + All"
        return "Basic + " + " + ".join(parts)


SCHEMES = {
    "basic": SchemeSpec(),
    "shift": SchemeSpec(use_shift=True),
    "range": SchemeSpec(use_range=True),
    "rate": SchemeSpec(use_rate=True),
    "all": SchemeSpec(True, True, True),
}


def get_scheme(scheme) -> SchemeSpec:
    if isinstance(scheme, SchemeSpec):
        return scheme
    try:
        return SCHEMES[str(scheme).lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}") from None


@dataclass(frozen=True, eq=False)
class AcceptanceStats:
    """Proposal and acceptance counts for metropolis, shift, range and rate."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((4, 2), dtype=np.int64))

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64).reshape(4, 2)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def proposals(self, kernel: str) -> int:
        return int(self.counts[_core.KERNEL_NAMES.index(kernel), 0])

    def accepts(self, kernel: str) -> int:
        return int(self.counts[_core.KERNEL_NAMES.index(kernel), 1])

    def rate(self, kernel: str) -> float:
        p = self.proposals(kernel)
        return self.accepts(kernel) / p if p else float("nan")

    def rates(self) -> dict:
        return {k: self.rate(k) for k in _core.KERNEL_NAMES if self.proposals(k)}

    def __add__(self, other: "AcceptanceStats") -> "AcceptanceStats":
        return AcceptanceStats(self.counts + other.counts)

    def to_dict(self) -> dict:
        return {
            k: {"proposals": self.proposals(k), "accepts": self.accepts(k)}
            for k in _core.KERNEL_NAMES
        }


@dataclass(frozen=True, eq=False)
class ChainState:
    eta: NaturalParameters
    v: LatentArrivals
    summary: ConstraintSummary
    log_post: float
    rng: np.random.Generator
    stats: AcceptanceStats = field(default_factory=AcceptanceStats)


def _arrays(state: ChainState):
    v = np.array(state.v.v, dtype=float)
    eta = state.eta.as_array()
    s = state.summary
    st = np.array([s.v_n, s.theta1_cap, s.theta2_floor, float(s.ordered), state.log_post])
    return v, eta, st, np.array(state.stats.counts)


def _rebuild(state: ChainState, v, eta, st, counts) -> ChainState:
    summary = ConstraintSummary(v.shape[0], float(st[0]), float(st[1]), float(st[2]), bool(st[3] > 0.5))
    return replace(
        state,
        eta=NaturalParameters(*(float(e) for e in eta)),
        v=LatentArrivals(v),
        summary=summary,
        log_post=float(st[4]),
        stats=AcceptanceStats(counts),
    )


def sample_truncated_exponential(rate: float, lower: float, upper: float, u: float) -> float:
    """Inverse-CDF draw from Exp(rate) truncated to [lower, upper].

    Uses ``lower - log1p(u * expm1(-rate * (upper - lower))) / rate``, which
    stays accurate when ``rate * lower`` is large.
    """
    if not all(math.isfinite(t) for t in (rate, lower, upper, u)):
        raise ValueError("inputs must be finite")
    if rate <= 0:
        raise ValueError("rate must be positive")
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    return float(_core.trunc_exp(rate, lower, upper, u))


def conditional_interval(state: ChainState, obs: Observations, i: int):
    """Support [lo, hi] of the full conditional of v[i] under the current state."""
    e = state.eta
    lo, hi = _core.gibbs_bounds(state.v.v, obs.y, obs.x, e.eta1, e.eta1 + e.eta2, i)
    return float(lo), float(hi)


def gibbs_update_one(state: ChainState, obs: Observations, i: int, prior: Prior = DEFAULT_PRIOR) -> ChainState:
    """Redraw arrival ``i`` from its full conditional.

    Uniform on its interval for all but the last customer; the last one gets a
    truncated exponential because no later arrival depends on it.
    """
    if not 0 <= i < obs.n:
        raise IndexError(f"customer index {i} out of range for n={obs.n}")
    v, eta, st, counts = _arrays(state)
    th1, th2, th3 = eta[0], eta[0] + eta[1], math.exp(eta[2])
    if not _core.gibbs_one(v, obs.y, obs.x, th1, th2, th3, i, state.rng.random()):
        raise SupportError(f"empty full conditional for v[{i}]; state is corrupted")
    _core.refresh(v, obs.y, obs.x, eta, st, prior.as_array())
    return _rebuild(state, v, eta, st, counts)


def gibbs_sweep(state: ChainState, obs: Observations, prior: Prior = DEFAULT_PRIOR) -> ChainState:
    v, eta, st, counts = _arrays(state)
    bad = _core.gibbs_sweep(v, obs.y, obs.x, eta, state.rng.random(obs.n))
    if bad >= 0:
        raise SupportError(f"empty full conditional for v[{bad}]; state is corrupted")
    _core.refresh(v, obs.y, obs.x, eta, st, prior.as_array())
    if st[4] == -math.inf:
        raise SupportError("Gibbs sweep left the posterior support")
    return _rebuild(state, v, eta, st, counts)


def metropolis_eta(state: ChainState, obs: Observations, prior: Prior, tuning: TuningParams) -> ChainState:
    """``tuning.met_repeats`` random-walk updates of eta with v held fixed."""
    v, eta, st, counts = _arrays(state)
    k = tuning.met_repeats
    z = state.rng.standard_normal((k, 3))
    u = state.rng.random(k)
    _core.metropolis(eta, st, obs.n, prior.as_array(), np.array(tuning.met_prop_sd), z, u, counts)
    return _rebuild(state, v, eta, st, counts)


def shift_update(state: ChainState, obs: Observations, prior: Prior, tuning: TuningParams) -> ChainState:
    """Move theta1 up by s ~ N(0, sigma2_shift) and every arrival down by s."""
    v, eta, st, counts = _arrays(state)
    s = math.sqrt(tuning.sigma2_shift) * state.rng.standard_normal()
    logu = math.log(state.rng.random())
    _core.shift_update(v, np.empty_like(v), obs.y, obs.x, eta, st, prior.as_array(), s, logu, counts)
    return _rebuild(state, v, eta, st, counts)


def range_scale_update(state: ChainState, obs: Observations, prior: Prior, tuning: TuningParams) -> ChainState:
    """Scale the service range and every gap x_i - theta1 - v_i by c_range^(+-1)."""
    v, eta, st, counts = _arrays(state)
    uz, u = state.rng.random(2)
    _core.range_update(v, np.empty_like(v), obs.y, obs.x, eta, st, prior.as_array(), tuning.c_range, uz, math.log(u), counts)
    return _rebuild(state, v, eta, st, counts)


def rate_scale_update(state: ChainState, obs: Observations, prior: Prior, tuning: TuningParams) -> ChainState:
    """Scale all interarrival times by c_rate^z and the arrival rate by c_rate^-z."""
    v, eta, st, counts = _arrays(state)
    uz, u = state.rng.random(2)
    _core.rate_update(v, np.empty_like(v), obs.y, obs.x, eta, st, prior.as_array(), tuning.c_rate, uz, math.log(u), counts)
    return _rebuild(state, v, eta, st, counts)


def shift_proposal(v, eta, s):
    """The shift map (v, eta) -> (v - s, eta1 + s); returns new arrays."""
    out = np.empty_like(np.asarray(v, dtype=float))
    _core.shift_map(np.asarray(v, dtype=float), s, out)
    eta = np.array(eta, dtype=float)
    eta[0] += s
    return out, eta


def range_scale_proposal(v, eta, obs: Observations, c: float, z: int):
    """The range-scale involution g(v, eta, z) with its log Jacobian."""
    v = np.asarray(v, dtype=float)
    cz = c if z > 0 else 1.0 / c
    out = np.empty_like(v)
    _core.range_map(v, obs.x, float(eta[0]), cz, out)
    eta = np.array(eta, dtype=float)
    eta[1] *= cz
    return out, eta, z * (v.shape[0] + 1) * math.log(c)


def rate_scale_proposal(v, eta, c: float, z: int):
    """The rate-scale involution g(v, eta, z) with its log Jacobian."""
    v = np.asarray(v, dtype=float)
    cz = c if z > 0 else 1.0 / c
    out = np.empty_like(v)
    _core.rate_map(v, cz, out)
    eta = np.array(eta, dtype=float)
    eta[2] -= z * math.log(c)
    return out, eta, z * v.shape[0] * math.log(c)


def scheme_step(
    state: ChainState,
    obs: Observations,
    prior: Prior,
    tuning: TuningParams,
    spec: SchemeSpec,
) -> ChainState:
    """One iteration: Gibbs, Metropolis x K, then shift, range, rate if enabled."""
    state = gibbs_sweep(state, obs, prior)
    state = metropolis_eta(state, obs, prior, tuning)
    if spec.use_shift:
        state = shift_update(state, obs, prior, tuning)
    if spec.use_range:
        state = range_scale_update(state, obs, prior, tuning)
    if spec.use_rate:
        state = rate_scale_update(state, obs, prior, tuning)
    return state


def make_state(obs: Observations, eta, v, prior: Prior = DEFAULT_PRIOR, rng=None) -> ChainState:
    """Build a consistent state from explicit eta and arrivals."""
    v = np.array(getattr(v, "v", v), dtype=float).reshape(-1)
    if v.shape[0] != obs.n:
        raise ValueError("v and y lengths differ")
    eta_arr = np.array(getattr(eta, "as_tuple", lambda: eta)(), dtype=float)
    st = np.zeros(5)
    _core.refresh(v, obs.y, obs.x, eta_arr, st, prior.as_array())
    summary = ConstraintSummary(obs.n, float(st[0]), float(st[1]), float(st[2]), bool(st[3] > 0.5))
    return ChainState(
        eta=NaturalParameters(*(float(e) for e in eta_arr)),
        v=LatentArrivals(v),
        summary=summary,
        log_post=float(st[4]),
        rng=np.random.default_rng(rng),
    )


def init_state(obs: Observations, prior: Prior = DEFAULT_PRIOR, rng=None) -> ChainState:
    """Start at eta1 = min(y), eta2 and theta3 at their prior means, v = x - min(y)."""
    ymin = float(obs.y.min())
    eta = (
        ymin,
        0.5 * (prior.range_range[0] + prior.range_range[1]),
        math.log(0.5 * (prior.theta3_range[0] + prior.theta3_range[1])),
    )
    v = obs.x - ymin
    # x_i - (x_i - min y) need not round back to min y
    cap = float(_core.constraint_summary(v, obs.y, obs.x)[1])
    eta = (min(ymin, cap),) + eta[1:]
    state = make_state(obs, eta, v, prior, rng)
    if not math.isfinite(state.log_post):
        raise SupportError(
            f"initial state eta={eta} lies outside the posterior support "
            f"(min(y)={ymin:g} vs theta1 prior {prior.theta1_range})"
        )
    return state
