"""Parameters, data, prior and the joint log posterior of the M/G/1 model.

Arrivals ``v`` are latent, interdeparture times ``y`` are observed and
departures ``x`` are their running sums. Service times are
Uniform(theta1, theta2) and interarrival times are Exp(theta3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from ._validation import check_interdeparture


class SupportError(RuntimeError):
    """Raised when a sampler state falls outside the posterior support."""


@dataclass(frozen=True)
class Parameters:
    """M/G/1 parameters: service range [theta1, theta2] and arrival rate theta3."""

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        if not (self.theta1 >= 0.0 and self.theta2 >= self.theta1 and self.theta3 > 0.0):
            raise ValueError(
                f"need 0 <= theta1 <= theta2 and theta3 > 0, got {self.as_tuple()}"
            )

    def as_tuple(self):
        return (self.theta1, self.theta2, self.theta3)


@dataclass(frozen=True)
class NaturalParameters:
    """Sampler coordinates: (theta1, theta2 - theta1, log theta3)."""

    eta1: float
    eta2: float
    eta3: float

    def __post_init__(self):
        if not (self.eta2 >= 0.0 and math.isfinite(self.eta3)):
            raise ValueError(f"need eta2 >= 0 and finite eta3, got {self.as_tuple()}")

    def as_tuple(self):
        return (self.eta1, self.eta2, self.eta3)

    def as_array(self):
        return np.array(self.as_tuple(), dtype=float)


def to_natural(p: Parameters) -> NaturalParameters:
    return NaturalParameters(p.theta1, p.theta2 - p.theta1, math.log(p.theta3))


def from_natural(e: NaturalParameters) -> Parameters:
    return Parameters(e.eta1, e.eta1 + e.eta2, math.exp(e.eta3))


@dataclass(frozen=True, eq=False)
class Observations:
    """Interdeparture times with cached departure times.

    ``x[i]`` is the departure time of customer ``i`` (0-based); the departure
    of the fictitious customer before the first is 0.
    """

    y: np.ndarray
    x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = check_interdeparture(self.y)
        y.setflags(write=False)
        x = np.cumsum(y)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def __len__(self):
        return self.n


@dataclass(frozen=True, eq=False)
class LatentArrivals:
    """Arrival times of the n customers; valid when 0 <= v1 <= ... <= vn."""

    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def is_valid(self) -> bool:
        return bool(self.v.size and self.v[0] >= 0 and np.all(np.diff(self.v) >= 0))

    def interarrivals(self) -> np.ndarray:
        return np.diff(self.v, prepend=0.0)


@dataclass(frozen=True)
class Prior:
    """Independent uniform priors on theta1, theta2 - theta1 and theta3."""

    theta1_range: tuple = (0.0, 10.0)
    range_range: tuple = (0.0, 10.0)
    theta3_range: tuple = (0.0, 1.0 / 3.0)

    def __post_init__(self):
        for name in ("theta1_range", "range_range", "theta3_range"):
            lo, hi = (float(b) for b in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a finite interval with lo < hi")
            object.__setattr__(self, name, (lo, hi))
        if self.theta1_range[0] < 0 or self.range_range[0] < 0 or self.theta3_range[0] < 0:
            raise ValueError("prior intervals must lie in [0, inf)")

    def as_array(self) -> np.ndarray:
        r3_lo, r3_hi = self.theta3_range
        return np.array(
            [
                *self.theta1_range,
                *self.range_range,
                r3_lo,
                r3_hi,
                math.log(r3_lo) if r3_lo > 0 else -math.inf,
                math.log(r3_hi),
            ]
        )


@dataclass(frozen=True)
class ConstraintSummary:
    """Sufficient statistics of (v, y) for constant-time posterior updates.

    ``theta1_cap`` and ``theta2_floor`` are the min and max over i of
    ``y_i - max(0, v_i - x_{i-1})``; ``ordered`` records whether v is a valid
    (nonnegative, nondecreasing) arrival sequence.
    """

    n: int
    v_n: float
    theta1_cap: float
    theta2_floor: float
    ordered: bool = True


def _arrivals(v) -> np.ndarray:
    if isinstance(v, LatentArrivals):
        return v.v
    return np.ascontiguousarray(v, dtype=float).reshape(-1)


def compute_summary(v, obs: Observations) -> ConstraintSummary:
    v = _arrivals(v)
    if v.shape[0] != obs.n:
        raise ValueError(f"v has length {v.shape[0]} but there are {obs.n} observations")
    vn, cap, floor, ordered = _core.constraint_summary(v, obs.y, obs.x)
    return ConstraintSummary(obs.n, float(vn), float(cap), float(floor), bool(ordered))


def log_prior_natural(e: NaturalParameters, prior: Prior = Prior()) -> float:
    """Log prior density in eta coordinates; flat in theta gives exp(eta3)."""
    return float(_core.log_prior_eta(e.eta1, e.eta2, e.eta3, prior.as_array()))


def log_posterior_cached(theta: Parameters, summary: ConstraintSummary, prior: Prior = Prior()) -> float:
    return float(
        _core.log_post_theta(
            theta.theta1,
            theta.theta2,
            theta.theta3,
            summary.n,
            summary.v_n,
            summary.theta1_cap,
            summary.theta2_floor,
            summary.ordered,
            prior.as_array(),
        )
    )


def log_posterior(theta: Parameters, v, obs: Observations, prior: Prior = Prior()) -> float:
    """Unnormalised log pi(v, theta | y) in theta coordinates.

    Returns ``n log theta3 - theta3 v_n - n log(theta2 - theta1)`` inside the
    support and ``-inf`` outside. The flat prior contributes a constant,
    taken as 0.
    """
    return log_posterior_cached(theta, compute_summary(v, obs), prior)


def log_posterior_natural_cached(e: NaturalParameters, summary: ConstraintSummary, prior: Prior = Prior()) -> float:
    """Log density in eta coordinates: the theta density plus log theta3."""
    return float(
        _core.log_post_eta(
            e.eta1,
            e.eta2,
            e.eta3,
            summary.n,
            summary.v_n,
            summary.theta1_cap,
            summary.theta2_floor,
            summary.ordered,
            prior.as_array(),
        )
    )


def log_posterior_natural(e: NaturalParameters, v, obs: Observations, prior: Prior = Prior()) -> float:
    return log_posterior_natural_cached(e, compute_summary(v, obs), prior)
