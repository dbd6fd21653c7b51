import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mg1mcmc import kernels as K
from mg1mcmc.model import NaturalParameters, Observations, Parameters, Prior, SupportError, to_natural
from mg1mcmc.presets import TUNING
from mg1mcmc.runner import run_chain
from mg1mcmc.simulator import load_dataset

import kernel_props as P

PRIOR = Prior()
TUNE = K.TuningParams((0.5, 0.8, 0.4), 2, 0.5, 1.3, 1.3)


def state_for(y, theta, v, seed=0):
    obs = Observations(y)
    return obs, K.make_state(obs, to_natural(Parameters(*theta)).as_tuple(), v, PRIOR, seed)


# truncated exponential ----------------------------------------------------

def test_truncated_exponential_examples():
    ln2 = math.log(2)
    assert K.sample_truncated_exponential(1, 0, ln2, 0) == 0
    assert K.sample_truncated_exponential(1, 0, ln2, 1) == pytest.approx(ln2, rel=1e-15)
    assert K.sample_truncated_exponential(1, 0, ln2, 0.5) == pytest.approx(-math.log(0.75), rel=1e-14)


def test_truncated_exponential_inverts_cdf():
    rate, lo, hi = 0.01, 250.0, 400.0
    for u in np.linspace(0, 1, 101):
        v = K.sample_truncated_exponential(rate, lo, hi, u)
        cdf = (math.exp(-rate * lo) - math.exp(-rate * v)) / (math.exp(-rate * lo) - math.exp(-rate * hi))
        assert lo <= v <= hi
        assert cdf == pytest.approx(u, abs=1e-12)


def test_truncated_exponential_stable_for_large_rate_times_lower():
    v = K.sample_truncated_exponential(5.0, 1e4, 1e4 + 1, 0.5)
    assert 1e4 < v < 1e4 + 1 and math.isfinite(v)


@pytest.mark.parametrize(
    "args", [(1, 2, 1, 0.5), (0, 0, 1, 0.5), (1, 0, math.inf, 0.5), (1, 0, 1, 1.5), (1, math.nan, 1, 0.5)]
)
def test_truncated_exponential_errors(args):
    with pytest.raises(ValueError):
        K.sample_truncated_exponential(*args)


# Gibbs ---------------------------------------------------------------------

def test_gibbs_interval_first_customer():
    obs, state = state_for((5, 4), (1, 3, 0.2), (3, 6))
    assert K.conditional_interval(state, obs, 0) == (2, 4)


def test_gibbs_interval_middle_cases():
    obs, state = state_for(*P.GIBBS_CASES["middle_busy"][:3])
    assert K.conditional_interval(state, obs, 1) == (0.5, 2.5)
    obs, state = state_for(*P.GIBBS_CASES["middle_idle"][:3])
    assert K.conditional_interval(state, obs, 1) == (3.0, 5.0)


def test_gibbs_collapsed_interval_returns_point():
    # y_2 <= theta2 and v_1 == min(v_3, x_2 - theta1)
    obs, state = state_for((2.0, 1.5, 2.5), (1.0, 3.0, 0.2), (1.0, 1.0, 1.0))
    assert K.conditional_interval(state, obs, 1) == (1.0, 1.0)
    state = K.gibbs_update_one(state, obs, 1, PRIOR)
    assert state.v.v[1] == 1.0


@pytest.mark.parametrize("case", sorted(P.GIBBS_CASES))
def test_gibbs_conditional_matches_rejection(case):
    assert P.gibbs_ks(case, 100_000, seed=3) < 0.01


def test_gibbs_draws_within_interval():
    obs, state = state_for(*P.GIBBS_CASES["middle_idle"][:3])
    lo, hi = K.conditional_interval(state, obs, 1)
    for _ in range(1000):
        v = K.gibbs_update_one(state, obs, 1, PRIOR).v.v[1]
        assert lo <= v <= hi


def test_gibbs_sweep_n1_is_single_update():
    obs, s1 = state_for((5.0,), (1, 3, 0.2), (3.0,), seed=4)
    _, s2 = state_for((5.0,), (1, 3, 0.2), (3.0,), seed=4)
    assert K.gibbs_sweep(s1, obs).v.v[0] == K.gibbs_update_one(s2, obs, 0).v.v[0]


def test_gibbs_sweep_preserves_order_and_support():
    rng = np.random.default_rng(9)
    for _ in range(10_000 // 10):
        obs, v, theta = P.random_state(rng)
        state = K.make_state(obs, to_natural(theta).as_tuple(), v, PRIOR, int(rng.integers(1 << 30)))
        for _ in range(10):
            state = K.gibbs_sweep(state, obs, PRIOR)
            vv = state.v.v
            assert vv[0] >= 0 and np.all(np.diff(vv) >= 0)
            assert math.isfinite(state.log_post)
        assert P.state_consistency(obs, state) < 1e-9


def test_gibbs_from_corrupted_state_raises():
    # v_1 must lie in [0.3, 0.5] for the first customer but also below v_2 = 0.1
    obs = Observations((5.0, 4.0))
    bad = K.make_state(obs, (4.5, 0.2, math.log(0.2)), (0.0, 0.1), PRIOR, 0)
    with pytest.raises(SupportError):
        K.gibbs_update_one(bad, obs, 0, PRIOR)


# Metropolis ------------------------------------------------------------------

def test_metropolis_zero_step_always_accepts():
    obs, state = state_for((5, 4), (1, 3, 0.2), (3, 6))
    tuning = K.TuningParams((1e-300, 1e-300, 1e-300), 5)
    out = K.metropolis_eta(state, obs, PRIOR, tuning)
    assert out.stats.accepts("metropolis") == 5 == out.stats.proposals("metropolis")


def test_metropolis_rejects_negative_width():
    # eta2 at 1e-3 with a huge sd: almost every proposal leaves the prior box and is rejected
    obs, state = state_for((5, 4), (1, 1.001, 0.2), (3.5, 8.0))
    tuning = K.TuningParams((1e-9, 1e3, 1e-9), 50)
    out = K.metropolis_eta(state, obs, PRIOR, tuning)
    assert out.eta.eta2 >= 0
    assert out.stats.accepts("metropolis") < 10


def test_metropolis_acceptance_intermediate_table_tuning():
    obs = load_dataset("intermediate")
    res = run_chain(obs, TUNING["intermediate"], "basic", 7000, rng=1)
    assert res.stats.proposals("metropolis") >= 1e5
    assert 0.10 <= res.stats.rate("metropolis") <= 0.45


def test_metropolis_keeps_state_consistent():
    rng = np.random.default_rng(2)
    obs, v, theta = P.random_state(rng, 8)
    state = K.make_state(obs, to_natural(theta).as_tuple(), v, PRIOR, 3)
    for _ in range(200):
        state = K.metropolis_eta(state, obs, PRIOR, TUNE)
        assert P.state_consistency(obs, state) < 1e-9


# shift / range / rate --------------------------------------------------------

def test_shift_zero_is_identity():
    v, eta = np.array([1.0, 2.0]), np.array([1.0, 2.0, -1.0])
    vs, es = K.shift_proposal(v, eta, 0.0)
    assert np.array_equal(vs, v) and np.array_equal(es, eta)


def test_shift_past_first_arrival_rejected():
    obs, state = state_for((5, 4), (1, 3, 0.2), (3, 6))
    tuning = K.TuningParams((0.1, 0.1, 0.1), sigma2_shift=1e6)
    rejected = 0
    for _ in range(200):
        new = K.shift_update(state, obs, PRIOR, tuning)
        rejected += np.array_equal(new.v.v, state.v.v)
    assert rejected >= 195


def test_shift_margin_invariance():
    worst, checked = P.shift_margin_error(2000)
    assert checked > 1000 and worst < 1e-12


def test_range_and_rate_identity_at_c_one():
    rng = np.random.default_rng(4)
    obs, v, theta = P.random_state(rng, 5)
    eta = np.array(to_natural(theta).as_tuple())
    vs, es, lj = K.range_scale_proposal(v, eta, obs, 1.0, 1)
    assert np.allclose(vs, v, rtol=0, atol=1e-12) and np.array_equal(es, eta) and lj == 0
    vs, es, lj = K.rate_scale_proposal(v, eta, 1.0, -1)
    assert np.array_equal(vs, v) and np.array_equal(es, eta) and lj == 0
    state = K.make_state(obs, eta, v, PRIOR, 0)
    tuning = K.TuningParams((0.1, 0.1, 0.1), c_range=1.0, c_rate=1.0)
    assert K.rate_scale_update(state, obs, PRIOR, tuning).stats.accepts("rate") == 1
    assert K.range_scale_update(state, obs, PRIOR, tuning).stats.accepts("range") == 1


def test_involutions_and_jacobians():
    worst_map, worst_jac = P.involution_errors(2000)
    assert worst_map < 1e-10 and worst_jac == 0.0


def test_range_interarrival_identity():
    assert P.range_interarrival_error(2000) < 1e-12


def test_rate_jacobian_example():
    v = np.ones(50)
    _, _, lj = K.rate_scale_proposal(v, np.zeros(3), 1.004, 1)
    assert math.exp(lj) == pytest.approx(1.004**50, rel=1e-13)
    assert math.exp(lj) == pytest.approx(1.22092, abs=1e-5)


def test_nonergodicity_witness_exact():
    assert P.nonergodicity_witness() == 0


def test_nonergodicity_witness_through_kernels():
    worst, moved = P.nonergodicity_kernels(2000)
    assert moved > 100 and worst < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["shift", "range", "rate"]))
def test_joint_updates_keep_state_consistent(seed, which):
    rng = np.random.default_rng(seed)
    obs, v, theta = P.random_state(rng)
    state = K.make_state(obs, to_natural(theta).as_tuple(), v, PRIOR, seed)
    update = {"shift": K.shift_update, "range": K.range_scale_update, "rate": K.rate_scale_update}[which]
    for _ in range(20):
        state = update(state, obs, PRIOR, TUNE)
        assert math.isfinite(state.log_post)
        assert P.state_consistency(obs, state) < 1e-9


# composition -----------------------------------------------------------------

def test_scheme_labels():
    assert [s.label for s in K.SCHEMES.values()] == [
        "Basic", "Basic + Shift", "Basic + Range", "Basic + Rate", "Basic + All",
    ]
    assert K.get_scheme("ALL") == K.SchemeSpec(True, True, True)
    with pytest.raises(ValueError):
        K.get_scheme("nope")


def test_scheme_step_never_leaves_support():
    obs = load_dataset("rare")
    state = K.init_state(obs, PRIOR, 0)
    for _ in range(300):
        state = K.scheme_step(state, obs, PRIOR, TUNING["rare"], K.SCHEMES["all"])
        assert math.isfinite(state.log_post)
    assert P.state_consistency(obs, state) < 1e-9


@pytest.mark.parametrize("scheme", ["basic", "all"])
def test_compiled_runner_matches_scheme_step(scheme):
    obs = load_dataset("intermediate")
    tuning = TUNING["intermediate"]
    res = run_chain(obs, tuning, scheme, 300, rng=42, block_size=1)
    state = K.init_state(obs, PRIOR, np.random.default_rng(42))
    trace = []
    for _ in range(300):
        state = K.scheme_step(state, obs, PRIOR, tuning, K.get_scheme(scheme))
        trace.append(state.eta.as_tuple())
    assert np.array_equal(res.trace, np.array(trace))
    assert np.array_equal(res.stats.counts, state.stats.counts)
    assert np.array_equal(res.final_state.v.v, state.v.v)


def test_init_state_examples():
    for name, eta1 in (("intermediate", 4.04), ("rare", 2.49)):
        obs = load_dataset(name)
        s = K.init_state(obs, PRIOR, 0)
        assert s.eta.eta1 == pytest.approx(eta1, abs=1e-12)
        assert s.eta.eta2 == 5.0 and s.eta.eta3 == pytest.approx(math.log(1 / 6))
        assert np.all(np.diff(s.v.v) >= 0) and math.isfinite(s.log_post)


def test_init_state_outside_prior_raises():
    with pytest.raises(SupportError):
        K.init_state(Observations([20.0, 30.0]), PRIOR, 0)


def test_tuning_validation():
    with pytest.raises(ValueError):
        K.TuningParams((0.1, 0.1))
    with pytest.raises(ValueError):
        K.TuningParams((0.1, 0.1, 0.1), met_repeats=0)
    with pytest.raises(ValueError):
        K.TuningParams((0.1, 0.1, 0.1), c_rate=0)


def test_acceptance_stats_add():
    a = K.AcceptanceStats([[4, 1], [2, 2], [0, 0], [1, 0]])
    b = a + a
    assert b.proposals("metropolis") == 8 and b.accepts("shift") == 4
    assert set(a.rates()) == {"metropolis", "shift", "rate"}
    assert all(b.accepts(k) <= b.proposals(k) for k in ("metropolis", "shift", "range", "rate"))


@pytest.mark.slow
@pytest.mark.parametrize("scheme", ["basic", "shift", "range", "rate"])
def test_each_scheme_matches_oracle(scheme):
    from mg1mcmc.diagnostics import ChainArchive, posterior_means
    from mg1mcmc.oracle import load_golden
    from mg1mcmc.presets import SMALL_DATA_TUNING
    from mg1mcmc.runner import run_chains

    obs, mean, _, _ = load_golden()["n3"]
    res = run_chains(obs, SMALL_DATA_TUNING, scheme, 200_000, 20, seed=np.random.SeedSequence([2010, 7]))
    rep = posterior_means(ChainArchive.from_results(res, 0.1))
    z = (rep.mean - mean) / rep.stderr
    assert np.all(np.abs(z) < 3), z
