import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mg1mcmc.diagnostics import (
    ActReport,
    ChainArchive,
    DegenerateChainError,
    act,
    act_report,
    autocovariance,
    autocovariance_direct,
    efficiency_table,
    format_act_table,
    format_means_table,
    posterior_means,
    truncation_lag,
    write_act_csv,
    write_means_csv,
)


def ar1(phi, m, seed, runs=1):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((runs, m))
    x = np.empty((runs, m))
    x[:, 0] = e[:, 0] / math.sqrt(1 - phi**2)
    for t in range(1, m):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    return x


def ar1_fast(phi, m, seed, runs=1):
    from scipy.signal import lfilter

    rng = np.random.default_rng(seed)
    e = rng.standard_normal((runs, m))
    e[:, 0] /= math.sqrt(1 - phi**2)
    return lfilter([1.0], [1.0, -phi], e, axis=1)


def test_constant_runs():
    rep = posterior_means(ChainArchive(np.full((4, 100, 3), 2.5)))
    assert np.all(rep.mean == 2.5) and np.all(rep.stderr == 0)


def test_mean_and_stderr_example():
    traces = np.repeat(np.arange(1.0, 6.0)[:, None], 10, axis=1)
    rep = posterior_means(ChainArchive(traces))
    assert rep.mean[0] == pytest.approx(3.0)
    assert rep.stderr[0] == pytest.approx(math.sqrt(2.5) / math.sqrt(5), rel=1e-12)
    assert rep.stderr[0] == pytest.approx(0.7071, abs=1e-4)
    assert rep.ci_lo[0] == pytest.approx(3 - 2 * rep.stderr[0])


def test_single_run_has_no_stderr():
    with pytest.raises(ValueError):
        posterior_means(ChainArchive(np.zeros((1, 10, 3))))


def test_autocovariance_constant_is_zero():
    assert np.all(autocovariance(np.full(64, 3.0), 3.0, 10) == 0)


def test_autocovariance_alternating():
    m = 1000
    x = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    g = autocovariance(x, 0.0, 3)
    assert g[0] == pytest.approx(1.0, abs=1e-12)
    assert g[1] == pytest.approx(-(m - 1) / m, abs=1e-12)


def test_fft_matches_direct():
    x = np.random.default_rng(0).standard_normal(1024) + 0.3
    fast, slow = autocovariance(x, 0.1, 200), autocovariance_direct(x, 0.1, 200)
    assert np.max(np.abs(fast - slow)) <= 1e-8 * np.abs(slow[0])


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.integers(2, 300), elements=st.floats(-1e3, 1e3)), st.data())
def test_fft_matches_direct_property(x, data):
    k = data.draw(st.integers(0, x.shape[0] - 1))
    g = float(x.mean())
    fast, slow = autocovariance(x, g, k), autocovariance_direct(x, g, k)
    scale = max(float(np.dot(x - g, x - g)) / x.shape[0], 1e-300)
    assert np.all(np.abs(fast - slow) <= 1e-8 * scale + 1e-12)


def test_autocovariance_errors():
    with pytest.raises(ValueError):
        autocovariance([], 0.0, 0)
    with pytest.raises(ValueError):
        autocovariance(np.ones(5), 0.0, 5)


def test_truncation_rule():
    rho = np.array([1.0, 0.5, 0.2, 0.005, 0.3])
    assert truncation_lag(rho) == 3
    assert truncation_lag(np.array([1.0, 0.5, 0.4])) == 2


def test_iid_act_near_one():
    x = np.random.default_rng(1).standard_normal(100_000)
    tau, _, _ = act(autocovariance(x, x.mean(), 10_000))
    assert 0.8 <= tau <= 1.2


def test_ar1_act():
    x = ar1_fast(0.9, 1_000_000, seed=2)[0]
    tau, k, _ = act(autocovariance(x, x.mean(), 100_000))
    assert tau == pytest.approx(19.0, rel=0.15)
    assert 30 < k < 100


def test_ar1_generators_agree():
    assert np.allclose(ar1(0.5, 200, 3), ar1_fast(0.5, 200, 3), rtol=1e-12, atol=1e-12)


def test_constant_chain_is_degenerate():
    with pytest.raises(DegenerateChainError):
        act_report(ChainArchive(np.ones((3, 100, 3))))


def test_grand_mean_centering_inflates():
    x = ar1_fast(0.5, 5000, seed=4, runs=4)
    shifted = x.copy()
    shifted[2] += 1.0
    g = shifted.mean()
    grand = np.mean([autocovariance(r, g, 1)[0] for r in shifted])
    pooled = np.mean([autocovariance(r, r.mean(), 1)[0] for r in shifted])
    assert grand > pooled
    a = act_report(ChainArchive(x[:, :, None])).tau[0]
    b = act_report(ChainArchive(shifted[:, :, None])).tau[0]
    assert b > 5 * a


def test_posterior_means_permutation_invariant():
    traces = np.random.default_rng(5).standard_normal((5, 200, 3))
    a = posterior_means(ChainArchive(traces))
    b = posterior_means(ChainArchive(traces[[3, 0, 4, 1, 2]]))
    assert np.allclose(a.mean, b.mean, rtol=1e-14) and np.allclose(a.stderr, b.stderr, rtol=1e-12)


def test_act_report_units():
    x = ar1_fast(0.8, 20_000, seed=6, runs=3)
    base = act_report(ChainArchive(x[:, :, None], seconds_per_iter=2e-3))
    thinned = act_report(ChainArchive(x[:, :, None], seconds_per_iter=2e-3, thin=4))
    assert thinned.tau[0] == pytest.approx(4 * base.tau[0])
    assert base.ms_per_iter == pytest.approx(2.0)
    assert base.tau_time[0] == pytest.approx(2.0 * base.tau[0])


def test_efficiency_examples():
    rep = ActReport(np.array([3.0, 4.0, 5.0]), np.array([1, 1, 1]), 0.5)
    gains = efficiency_table({"Basic": rep, "Basic + All": rep})
    assert np.all(gains["Basic + All"] == 1)
    base = ActReport(np.array([700.0, 1, 1000.0]), np.ones(3), 1.0)
    best = ActReport(np.array([12.0, 1, 5.6]), np.ones(3), 1.0)
    gains = efficiency_table({"Basic": base, "Basic + All": best})["Basic + All"]
    assert gains[2] == pytest.approx(179, abs=0.5)
    assert gains[0] == pytest.approx(58, abs=0.5)
    with pytest.raises(ValueError):
        efficiency_table({"Basic + All": best})


def test_archive_from_results_and_tables(tmp_path):
    from mg1mcmc.model import Observations
    from mg1mcmc.presets import SMALL_DATA_TUNING
    from mg1mcmc.runner import run_chains

    res = run_chains(Observations([5.0, 4.0]), SMALL_DATA_TUNING, "all", 2000, 3, seed=0)
    arch = ChainArchive.from_results(res, 0.1, label="Basic + All")
    assert (arch.n_runs, arch.n_draws) == (3, 1800)
    assert set(arch.acceptance_rates()) == {"metropolis", "shift", "range", "rate"}
    means = {"Basic + All": posterior_means(arch)}
    acts = {"Basic + All": act_report(arch)}
    write_means_csv(tmp_path / "m.csv", means)
    write_act_csv(tmp_path / "a.csv", acts)
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert [r["parameter"] for r in rows] == ["eta1", "eta2", "eta3"]
    assert float(rows[0]["mean"]) == pytest.approx(means["Basic + All"].mean[0])
    assert len(list(csv.DictReader(open(tmp_path / "a.csv")))) == 3
    assert "Basic + All" in format_means_table(means)
    assert "tau eta3" in format_act_table(acts)
