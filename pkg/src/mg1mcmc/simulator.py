"""Synthetic M/G/1 data, queue-length trajectories and the reference data sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import DATASETS
from .model import LatentArrivals, Observations, Parameters


@dataclass(frozen=True, eq=False)
class SimOutput:
    """Simulated observations together with the latent process that made them."""

    obs: Observations
    v: LatentArrivals
    u: np.ndarray
    w: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return self.obs.y


@dataclass(frozen=True, eq=False)
class QueueTrajectory:
    """Right-continuous step function of the number of customers in the system."""

    times: np.ndarray
    lengths: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "queue_length"])
            for t, q in zip(self.times, self.lengths):
                writer.writerow([repr(float(t)), int(q)])


def interdepartures(v, u) -> np.ndarray:
    """y_i = u_i + max(0, v_i - x_{i-1}) with x the running sum of y."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.empty_like(u)
    x_prev = 0.0
    for i in range(u.shape[0]):
        y[i] = u[i] + max(0.0, v[i] - x_prev)
        x_prev += y[i]
    return y


def simulate(theta: Parameters, n: int, seed=None) -> SimOutput:
    """Draw n customers: Exp(theta3) interarrivals, Uniform(theta1, theta2) service."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.exponential(1.0 / theta.theta3, size=n)
    u = rng.uniform(theta.theta1, theta.theta2, size=n)
    v = np.cumsum(w)
    return SimOutput(Observations(interdepartures(v, u)), LatentArrivals(v), u, w)


def trajectory(sim_or_v, x=None) -> QueueTrajectory:
    """Queue length over time up to the last arrival.

    Accepts a :class:`SimOutput` or an explicit pair ``(v, x)`` of arrival and
    departure times. Departures sort before arrivals at equal times.
    """
    if isinstance(sim_or_v, SimOutput):
        v, x = sim_or_v.v.v, sim_or_v.obs.x
    else:
        v = np.asarray(getattr(sim_or_v, "v", sim_or_v), dtype=float)
        x = np.asarray(x, dtype=float)
    t_end = v[-1]
    deps = x[x <= t_end]
    times = np.concatenate([deps, v])
    steps = np.concatenate([-np.ones(deps.shape[0], dtype=int), np.ones(v.shape[0], dtype=int)])
    order = np.lexsort((steps, times))
    times = np.concatenate([[0.0], times[order]])
    lengths = np.concatenate([[0], np.cumsum(steps[order])])
    return QueueTrajectory(times, lengths)


def load_dataset(name: str) -> Observations:
    try:
        return Observations(np.array(DATASETS[name]))
    except KeyError:
        raise ValueError(f"unknown data set {name!r}; choose from {sorted(DATASETS)}") from None


def write_dataset(path, y):
    y = np.asarray(getattr(y, "y", y), dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y"])
        for i, val in enumerate(y, start=1):
            writer.writerow([i, repr(float(val))])


def read_dataset(path) -> Observations:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "y" not in rows[0]:
        raise ValueError(f"{path}: expected a CSV with columns index,y")
    return Observations(np.array([float(r["y"]) for r in rows]))
