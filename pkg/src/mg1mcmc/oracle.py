"""Deterministic quadrature of the posterior for tiny data sets (n <= 3).

The joint density of (theta, v) is integrated directly. With
delta = theta2 - theta1 and the flat prior,

    p(theta, v | y) ∝ theta3^n exp(-theta3 v_n) delta^-n 1{v feasible}.

For fixed theta the feasible v form a chain v_1 <= ... <= v_n with
v_i in [lo_i, hi_i], so the inner volumes are piecewise polynomials:

    F_1(t) = |[a_1, min(hi_1, t)]|,   F_i(t) = int_{lo_i}^{min(hi_i, t)} F_{i-1}.

They are evaluated in closed form up to level n - 1. The last arrival,
delta and theta1 are integrated by a graded trapezoid rule on panels split
at every kink of the integrand. The theta3 integral depends on the data
only through v_n and is tabulated once.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import Observations, Parameters, Prior

MAX_N = 3
GOLDEN_PATH = Path(__file__).with_name("data") / "oracle_golden.csv"


class OracleConvergenceError(RuntimeError):
    """Refining the grid moved a posterior mean by more than the tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid settings.

    Parameters
    ----------
    resolution : int
        Trapezoid intervals per panel in theta1, delta and v_n.
    theta3_nodes : int
        Nodes for the log-rate integral behind the v_n table.
    table_size : int
        Points of the v_n table (linear interpolation in between).
    eta3_span : float
        How far below log(upper rate bound) the log-rate integral starts
        when the prior's lower bound is zero.
    rel_tol : float
        Maximum change of any mean between ``resolution`` and
        ``2 * resolution``, relative to max(|mean|, sd).
    """

    resolution: int = 48
    theta3_nodes: int = 4000
    table_size: int = 8193
    eta3_span: float = 40.0
    rel_tol: float = 0.005

    def __post_init__(self):
        if self.resolution < 32:
            raise ValueError("resolution must be >= 32")
        if self.theta3_nodes < 32 or self.table_size < 32:
            raise ValueError("theta3_nodes and table_size must be >= 32")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.resolution, 2 * self.theta3_nodes, 2 * self.table_size - 1, self.eta3_span, self.rel_tol)


@dataclass(frozen=True)
class OracleMoments:
    """Posterior means and variances of eta = (theta1, theta2 - theta1, log theta3)."""

    mean: np.ndarray
    var: np.ndarray
    spec: QuadratureSpec
    rel_change: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.var)


def _graded_panels(edges, m):
    """Interior nodes and weights of a smoothstep-graded trapezoid rule.

    ``edges`` has shape (..., P + 1) and must be sorted along the last axis.
    Nodes cluster at every panel end, where the integrand may have kinks or
    weak singularities, and no node sits on an edge.
    """
    t = np.arange(1, m) / m
    g = t * t * (3.0 - 2.0 * t)
    dg = 6.0 * t * (1.0 - t) / m
    a = edges[..., :-1, None]
    width = np.diff(edges, axis=-1)[..., None]
    nodes = a + width * g
    weights = width * dg
    shape = nodes.shape[:-2] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _sorted_edges(cands, lo, hi):
    hi = np.maximum(hi, lo)
    return np.sort(np.clip(cands, lo[..., None], hi[..., None]), axis=-1)


def _rate_tables(n, prior: Prior, x_n, spec: QuadratureSpec):
    """s -> int theta3^n exp(-theta3 s) (log theta3)^k dtheta3 for k = 0, 1, 2."""
    r_lo, r_hi = prior.theta3_range
    u_hi = math.log(r_hi)
    u_lo = math.log(r_lo) if r_lo > 0 else u_hi - spec.eta3_span
    u = np.linspace(u_lo, u_hi, spec.theta3_nodes)
    wu = np.full(u.shape, u[1] - u[0])
    wu[[0, -1]] *= 0.5
    s = np.linspace(0.0, x_n, spec.table_size)
    # theta3 = exp(u), dtheta3 = exp(u) du
    base = np.exp((n + 1) * u[None, :] - np.exp(u)[None, :] * s[:, None]) * wu
    return s, np.stack([base.sum(axis=1), base @ u, base @ (u * u)])


class _Integrand:
    def __init__(self, obs: Observations, prior: Prior, spec: QuadratureSpec):
        self.y, self.x, self.n = obs.y, obs.x, obs.n
        self.prior, self.m = prior, spec.resolution
        self.s_tab, self.h_tab = _rate_tables(self.n, prior, self.x[-1], spec)
        xs = np.concatenate([[0.0], self.x])
        self.gaps = np.array([xs[j] - xs[i] for i, j in itertools.combinations(range(1, self.n + 1), 2)])

    def theta1_edges(self):
        lo, hi = self.prior.theta1_range
        hi = min(hi, float(self.y.min()))
        moving = np.concatenate([self.y, self.x])
        fixed = np.concatenate([self.gaps, self.prior.range_range])
        cands = (moving[:, None] - fixed[None, :]).ravel()
        edges = np.unique(np.clip(np.concatenate([[lo, hi], cands]), lo, hi))
        return edges[np.concatenate([[True], np.diff(edges) > 1e-12 * max(1.0, hi)])]

    def delta_edges(self, th1):
        lo, hi = self.prior.range_range
        cands = np.concatenate([self.y - th1, self.x - th1, self.gaps, [lo, hi]])
        return np.unique(np.clip(cands, lo, hi))

    def slab(self, th1):
        """Integrals over (delta, v_n, theta3) at fixed theta1."""
        y, x, n = self.y, self.x, self.n
        delta, wd = _graded_panels(self.delta_edges(th1), self.m)
        th2 = th1 + delta
        lo = np.where(y[:, None] > th2[None, :], x[:, None] - th2[None, :], -np.inf)
        hi = np.broadcast_to((x - th1)[:, None], lo.shape)
        if np.any(y < th1):
            return np.zeros(6), 0.0
        a1 = np.maximum(lo[0], 0.0)
        d1 = np.maximum(hi[0] - a1, 0.0)
        s_lo = np.maximum(lo[-1], 0.0)
        s_hi = hi[-1]
        cands = [s_lo, s_hi]
        if n >= 2:
            cands += [a1, a1 + d1]
        if n == 3:
            cands += [np.maximum(lo[1], s_lo), hi[1]]
        edges = _sorted_edges(np.stack(cands, axis=-1), s_lo, s_hi)
        s, ws = _graded_panels(edges, self.m)

        a1, d1 = a1[:, None], d1[:, None]

        def g1(t):
            c = np.clip(t - a1, 0.0, d1)
            return 0.5 * c * c + d1 * np.maximum(t - a1 - d1, 0.0)

        if n == 1:
            f = np.ones_like(s)
        elif n == 2:
            f = np.clip(s - a1, 0.0, d1)
        else:
            f = np.maximum(g1(np.minimum(hi[1][:, None], s)) - g1(lo[1][:, None]), 0.0)

        h = np.stack([np.interp(s.ravel(), self.s_tab, row).reshape(s.shape) for row in self.h_tab])
        inner = (h * (f * ws)).sum(axis=-1)  # (3, n_delta)
        w = wd * delta ** (-float(n))
        z = w @ inner[0]
        return np.array([z, w @ (inner[0] * delta), w @ (inner[0] * delta**2), w @ inner[1], w @ inner[2], z]), z

    def moments(self):
        t1, w1 = _graded_panels(self.theta1_edges(), self.m)
        acc = np.zeros(8)
        for th1, wt in zip(t1, w1):
            part, z = self.slab(th1)
            acc[0] += wt * z
            acc[1] += wt * z * th1
            acc[2] += wt * z * th1 * th1
            acc[3:7] += wt * part[1:5]
        if not acc[0] > 0:
            raise OracleConvergenceError("posterior has no mass on the grid")
        z = acc[0]
        mean = np.array([acc[1], acc[3], acc[5]]) / z
        second = np.array([acc[2], acc[4], acc[6]]) / z
        return mean, np.maximum(second - mean**2, 0.0)


def _check_input(obs, prior):
    if not isinstance(obs, Observations):
        obs = Observations(obs)
    if obs.n > MAX_N:
        raise ValueError(f"quadrature oracle supports n <= {MAX_N}, got n = {obs.n}")
    return obs, prior


def quadrature_moments(obs: Observations, prior: Prior = Prior(), spec: QuadratureSpec = QuadratureSpec()):
    """Means and variances of eta at one grid resolution, without refinement."""
    obs, prior = _check_input(obs, prior)
    return _Integrand(obs, prior, spec).moments()


def posterior_moments_oracle(
    obs: Observations, prior: Prior = Prior(), spec: QuadratureSpec = QuadratureSpec()
) -> OracleMoments:
    """Posterior means and variances of eta, checked against a twice-finer grid.

    Raises
    ------
    OracleConvergenceError
        If any mean moves by more than ``spec.rel_tol`` of max(|mean|, sd).
    """
    obs, prior = _check_input(obs, prior)
    coarse_mean, _ = _Integrand(obs, prior, spec).moments()
    fine = spec.refined()
    mean, var = _Integrand(obs, prior, fine).moments()
    scale = np.maximum(np.abs(mean), np.sqrt(var))
    change = np.abs(mean - coarse_mean) / scale
    if np.any(change > spec.rel_tol):
        raise OracleConvergenceError(f"grid doubling changed means by {change} (tolerance {spec.rel_tol})")
    return OracleMoments(mean, var, fine, change)


def importance_moments(obs: Observations, prior: Prior = Prior(), n_samples: int = 10_000_000, seed=0, chunk=1_000_000):
    """Self-normalised importance sampling with theta from the prior.

    Arrivals are drawn one at a time uniformly on their feasible interval,
    so the weight is the likelihood times the product of interval lengths.

    Returns
    -------
    mean, stderr : arrays of shape (3,)
    """
    obs = obs if isinstance(obs, Observations) else Observations(obs)
    rng = np.random.default_rng(seed)
    y, x, n = obs.y, obs.x, obs.n
    parts = []
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        th1 = rng.uniform(*prior.theta1_range, size=k)
        dl = rng.uniform(*prior.range_range, size=k)
        th3 = rng.uniform(*prior.theta3_range, size=k)
        th2 = th1 + dl
        logw = n * np.log(th3) - n * np.log(dl)
        prev = np.zeros(k)
        ok = np.ones(k, dtype=bool)
        for i in range(n):
            lo = np.where(y[i] > th2, np.maximum(prev, x[i] - th2), prev)
            hi = x[i] - th1
            length = hi - lo
            ok &= (length > 0) & (y[i] >= th1)
            length = np.where(ok, length, 1.0)
            logw += np.log(length)
            prev = lo + length * rng.random(k)
        logw -= th3 * prev
        w = np.where(ok, np.exp(logw), 0.0)
        parts.append((w, np.stack([th1, dl, np.log(th3)])))
        done += k
    w = np.concatenate([p[0] for p in parts])
    f = np.concatenate([p[1] for p in parts], axis=1)
    sw = w.sum()
    mean = (f * w).sum(axis=1) / sw
    se = np.sqrt(((w * (f - mean[:, None])) ** 2).sum(axis=1)) / sw
    return mean, se


# ---------------------------------------------------------------------------
# golden values

def golden_datasets() -> dict:
    """Tiny data sets used to validate the samplers end to end."""
    from .simulator import simulate

    return {
        "n1": Observations([5.0]),
        "n2": Observations([5.0, 4.0]),
        "n3": simulate(Parameters(1.0, 3.0, 0.2), 3, seed=20100301).obs,
    }


GOLDEN_FIELDS = ("dataset", "n", "y", "parameter", "mean", "variance", "rel_change") + tuple(
    f"spec_{k}" for k in asdict(QuadratureSpec())
)


def generate_golden(path=GOLDEN_PATH, spec: QuadratureSpec = QuadratureSpec(), prior: Prior = Prior()):
    """Recompute the oracle on :func:`golden_datasets` and write the CSV."""
    rows = []
    for name, obs in golden_datasets().items():
        res = posterior_moments_oracle(obs, prior, spec)
        for h, par in enumerate(("eta1", "eta2", "eta3")):
            rows.append(
                [name, obs.n, ";".join(repr(float(v)) for v in obs.y), par, repr(float(res.mean[h])),
                 repr(float(res.var[h])), repr(float(res.rel_change[h])), *asdict(spec).values()]
            )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GOLDEN_FIELDS)
        w.writerows(rows)
    return path


def load_golden(path=GOLDEN_PATH) -> dict:
    """Golden oracle values keyed by data set name.

    Returns
    -------
    dict of name -> (Observations, mean, variance, QuadratureSpec)
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for name in dict.fromkeys(r["dataset"] for r in rows):
        sub = [r for r in rows if r["dataset"] == name]
        obs = Observations([float(v) for v in sub[0]["y"].split(";")])
        spec_kw = {k: type(getattr(QuadratureSpec(), k))(sub[0][f"spec_{k}"]) for k in asdict(QuadratureSpec())}
        out[name] = (
            obs,
            np.array([float(r["mean"]) for r in sub]),
            np.array([float(r["variance"]) for r in sub]),
            QuadratureSpec(**spec_kw),
        )
    return out


if __name__ == "__main__":
    print(generate_golden())
