"""Multi-chain posterior means, autocorrelation times and efficiency tables.

Autocovariances are centred on the grand mean over all runs rather than on
each run's own mean, so a run stuck in a different region inflates the
estimate instead of hiding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("eta1", "eta2", "eta3")


class DegenerateChainError(ValueError):
    """Lag-0 autocovariance is zero, so the autocorrelation time is undefined."""


@dataclass
class ChainArchive:
    """Post-burn-in traces of S runs, shape (S, M, 3), and their cost.

    ``seconds_per_iter`` is sampler wall time per iteration; ``thin`` is the
    number of iterations between stored rows.
    """

    traces: np.ndarray
    seconds_per_iter: float = float("nan")
    thin: int = 1
    stats: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        traces = np.asarray(self.traces, dtype=float)
        if traces.ndim == 2:
            traces = traces[:, :, None]
        if traces.ndim != 3 or traces.shape[1] == 0:
            raise ValueError("traces must have shape (runs, draws, params) with draws > 0")
        self.traces = traces

    @classmethod
    def from_results(cls, results, burn_in=0.1, label=""):
        kept = [r.retained(burn_in) for r in results]
        if len({k.shape[0] for k in kept}) != 1:
            raise ValueError("all runs must have the same post-burn-in length")
        total = sum(r.seconds for r in results)
        iters = sum(r.n_iter for r in results)
        return cls(
            np.stack(kept),
            seconds_per_iter=total / iters,
            thin=results[0].thin,
            stats=[r.stats for r in results],
            label=label,
        )

    @property
    def n_runs(self) -> int:
        return self.traces.shape[0]

    @property
    def n_draws(self) -> int:
        return self.traces.shape[1]

    def acceptance_rates(self) -> dict:
        if not self.stats:
            return {}
        total = self.stats[0]
        for s in self.stats[1:]:
            total = total + s
        return total.rates()


@dataclass
class MeanReport:
    mean: np.ndarray
    stderr: np.ndarray

    @property
    def ci_lo(self) -> np.ndarray:
        return self.mean - 2.0 * self.stderr

    @property
    def ci_hi(self) -> np.ndarray:
        return self.mean + 2.0 * self.stderr


@dataclass
class ActReport:
    tau: np.ndarray
    lag: np.ndarray
    ms_per_iter: float

    @property
    def tau_time(self) -> np.ndarray:
        return self.tau * self.ms_per_iter


def posterior_means(archive: ChainArchive) -> MeanReport:
    """Grand mean over runs; standard error from the spread of per-run means."""
    if archive.n_runs < 2:
        raise ValueError("need at least two runs to estimate a standard error")
    run_means = archive.traces.mean(axis=1)
    grand = archive.traces.reshape(-1, archive.traces.shape[2]).mean(axis=0)
    se = run_means.std(axis=0, ddof=1) / math.sqrt(archive.n_runs)
    return MeanReport(grand, se)


def autocovariance_direct(trace, grand_mean, max_lag):
    """O(M * max_lag) reference for :func:`autocovariance`."""
    d = np.asarray(trace, dtype=float) - grand_mean
    m = d.shape[0]
    return np.array([np.dot(d[: m - k], d[k:]) / m for k in range(max_lag + 1)])


def autocovariance(trace, grand_mean: float, max_lag: int) -> np.ndarray:
    """gamma_k = (1/M) sum_{m<M-k} (x_m - g)(x_{m+k} - g) for k = 0..max_lag, via FFT."""
    d = np.asarray(trace, dtype=float).reshape(-1) - grand_mean
    m = d.shape[0]
    if m == 0:
        raise ValueError("empty trace")
    if not 0 <= max_lag < m:
        raise ValueError(f"max_lag must be in [0, {m - 1}], got {max_lag}")
    nfft = 1 << int(math.ceil(math.log2(2 * m)))
    f = np.fft.rfft(d, n=nfft)
    acov = np.fft.irfft(f * np.conj(f), n=nfft)[: max_lag + 1]
    return acov / m


def truncation_lag(rho, threshold=0.01) -> int:
    """First lag k >= 1 with rho_k < threshold, else the last available lag."""
    below = np.nonzero(rho[1:] < threshold)[0]
    return int(below[0] + 1) if below.size else max(1, rho.shape[0] - 1)


def act(per_run_autocovs, iter_time: float = float("nan"), threshold: float = 0.01):
    """Autocorrelation time from per-run autocovariances of one parameter.

    Parameters
    ----------
    per_run_autocovs : array, shape (S, L + 1)
        Lags 0..L for each run, all centred on the same grand mean.
    iter_time : float
        Seconds per stored draw, used for the time-adjusted value.
    threshold : float
        Truncate at the first lag whose autocorrelation drops below this.

    Returns
    -------
    tau, lag, tau_time_ms
    """
    g = np.atleast_2d(np.asarray(per_run_autocovs, dtype=float)).mean(axis=0)
    if g.shape[0] < 2:
        raise ValueError("need autocovariances up to at least lag 1")
    if not g[0] > 0:
        raise DegenerateChainError("lag-0 autocovariance is zero; chain is constant")
    rho = g / g[0]
    k = truncation_lag(rho, threshold)
    tau = 1.0 + 2.0 * rho[1 : k + 1].sum()
    return float(tau), k, float(tau * iter_time * 1e3)


def act_report(archive: ChainArchive, threshold: float = 0.01, max_lag_fraction: float = 0.1) -> ActReport:
    """Autocorrelation time of each parameter, in iterations."""
    s, m, p = archive.traces.shape
    max_lag = min(m - 1, max(1, int(m * max_lag_fraction)))
    taus, lags = np.empty(p), np.empty(p, dtype=int)
    for h in range(p):
        grand = archive.traces[:, :, h].mean()
        covs = np.stack([autocovariance(archive.traces[r, :, h], grand, max_lag) for r in range(s)])
        tau_rows, lags[h], _ = act(covs, threshold=threshold)
        # stored rows are `thin` iterations apart
        taus[h] = tau_rows * archive.thin
    return ActReport(taus, lags * archive.thin, archive.seconds_per_iter * 1e3)


def efficiency_table(reports: dict, baseline: str = "Basic") -> dict:
    """Time-adjusted autocorrelation time of ``baseline`` over each scheme's."""
    if baseline not in reports or len(reports) < 2:
        raise ValueError(f"need the {baseline!r} report and at least one other")
    base = reports[baseline].tau_time
    return {label: base / rep.tau_time for label, rep in reports.items()}


def _param_labels(p):
    return PARAM_NAMES[:p] if p <= len(PARAM_NAMES) else tuple(f"p{i}" for i in range(p))


def write_means_csv(path, reports: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "parameter", "mean", "ci_lo", "ci_hi", "stderr"])
        for label, rep in reports.items():
            for h, name in enumerate(_param_labels(rep.mean.shape[0])):
                w.writerow([label, name, *(f"{a[h]:.10g}" for a in (rep.mean, rep.ci_lo, rep.ci_hi, rep.stderr))])


def write_act_csv(path, reports: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "parameter", "tau", "tau_time_adjusted", "lag", "ms_per_iter"])
        for label, rep in reports.items():
            for h, name in enumerate(_param_labels(rep.tau.shape[0])):
                w.writerow([label, name, f"{rep.tau[h]:.6g}", f"{rep.tau_time[h]:.6g}", int(rep.lag[h]), f"{rep.ms_per_iter:.6g}"])


def format_means_table(reports: dict) -> str:
    names = _param_labels(next(iter(reports.values())).mean.shape[0])
    header = ["Scheme"] + [f"{n} {c}" for n in names for c in ("mean", "CI", "se")]
    rows = []
    for label, rep in reports.items():
        row = [label]
        for h in range(len(names)):
            row += [f"{rep.mean[h]:.4f}", f"({rep.ci_lo[h]:.4f}, {rep.ci_hi[h]:.4f})", f"{rep.stderr[h]:.5f}"]
        rows.append(row)
    return _align([header] + rows)


def format_act_table(reports: dict, gains: dict | None = None) -> str:
    names = _param_labels(next(iter(reports.values())).tau.shape[0])
    header = ["Scheme"] + [f"tau {n}" for n in names] + ["ms/iter"] + [f"tau*t {n}" for n in names]
    if gains:
        header += [f"gain {n}" for n in names]
    rows = []
    for label, rep in reports.items():
        row = [label] + [f"{t:.3g}" for t in rep.tau] + [f"{rep.ms_per_iter:.4f}"] + [f"{t:.3g}" for t in rep.tau_time]
        if gains:
            row += [f"{g:.3g}" for g in gains[label]]
        rows.append(row)
    return _align([header] + rows)


def _align(rows) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(wd) if c else cell.ljust(wd) for c, (cell, wd) in enumerate(zip(r, widths))) for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
