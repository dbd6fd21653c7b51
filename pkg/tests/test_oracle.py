import numpy as np
import pytest

from mg1mcmc.model import Observations, Prior
from mg1mcmc.oracle import (
    GOLDEN_PATH,
    OracleConvergenceError,
    QuadratureSpec,
    generate_golden,
    golden_datasets,
    importance_moments,
    load_golden,
    posterior_moments_oracle,
    quadrature_moments,
)


@pytest.fixture(scope="module")
def golden():
    return load_golden()


def test_golden_file_covers_datasets(golden):
    assert GOLDEN_PATH.exists()
    assert list(golden) == ["n1", "n2", "n3"]
    for name, obs in golden_datasets().items():
        assert np.array_equal(golden[name][0].y, obs.y)
        assert np.all(golden[name][2] > 0)


def test_golden_regenerates(tmp_path, golden):
    spec = next(iter(golden.values()))[3]
    fresh = load_golden(generate_golden(tmp_path / "g.csv", spec))
    for name, (_, mean, var, _) in golden.items():
        assert np.allclose(fresh[name][1], mean, rtol=1e-12, atol=0)
        assert np.allclose(fresh[name][2], var, rtol=1e-12, atol=0)


def test_quadrature_vs_importance_sampling(golden):
    obs, mean, var, _ = golden["n2"]
    is_mean, is_se = importance_moments(obs, n_samples=10_000_000, seed=1)
    z = (is_mean - mean) / is_se
    assert np.all(np.abs(z) < 3), z


def test_quadrature_vs_importance_sampling_n1(golden):
    obs, mean, _, _ = golden["n1"]
    is_mean, is_se = importance_moments(obs, n_samples=2_000_000, seed=2)
    assert np.all(np.abs(is_mean - mean) < 3 * is_se)


def test_grid_doubling_is_small(golden):
    obs = golden["n1"][0]
    spec = QuadratureSpec()
    a, va = quadrature_moments(obs, spec=spec)
    b, vb = quadrature_moments(obs, spec=spec.refined())
    assert np.all(np.abs(a - b) / np.maximum(np.abs(b), np.sqrt(vb)) < 0.005)


def test_non_convergence_is_reported():
    strict = QuadratureSpec(resolution=32, theta3_nodes=64, table_size=64, rel_tol=1e-12)
    with pytest.raises(OracleConvergenceError):
        posterior_moments_oracle(Observations([5.0]), spec=strict)


def test_oracle_rejects_large_n():
    with pytest.raises(ValueError):
        quadrature_moments(Observations([1.0, 2.0, 3.0, 4.0]))


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(resolution=16)
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    assert QuadratureSpec(40).refined().resolution == 80


def test_narrow_prior_changes_answer():
    obs = Observations([5.0])
    wide, _ = quadrature_moments(obs)
    narrow, _ = quadrature_moments(obs, Prior(theta1_range=(0.0, 2.0)))
    assert narrow[0] < 2.0 and narrow[0] < wide[0]
