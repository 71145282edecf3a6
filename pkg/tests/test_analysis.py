import math

import numpy as np
import pytest

from fakestat.analysis import (
    InsufficientPathsError,
    confluence_experiment,
    covariance_estimate,
    discretization_allowance,
    flatness_report,
    limit_covariance,
)
from fakestat.moments import MomentTrajectory
from fakestat.simulate import ModelConfig, PointMass, SchemeConfig, build_inputs, simulate_ensemble

# long-run covariance at alpha=0.9, lambda=1.2, v0=0.09 (quadrature oracle, log-time splitting)
C_ORACLE = {0.25: 0.05747284677524816, 0.5: 0.04066907068989655, 1.0: 0.022148710330887236}


def _traj(var, se, n_paths=1000, step=0.01):
    n = len(var)
    t = step * np.arange(n)
    z = np.zeros(n)
    return MomentTrajectory(t, z, z + 1e-3, np.asarray(var, float), np.asarray(se, float), n_paths)


def test_flatness_passes_and_fails():
    n = 101
    ok = flatness_report(_traj(np.full(n, 0.09), np.full(n, 1e-3)), 0.09, 0.9)
    assert ok.passed and ok.max_abs_z == 0.0
    allow = discretization_allowance(0.01, 0.9, 0.09)
    bad = flatness_report(_traj(np.full(n, 0.09 + allow + 0.01), np.full(n, 1e-3)), 0.09, 0.9)
    assert not bad.passed and bad.max_abs_z == pytest.approx(10.0)


def test_flatness_ignores_first_nodes():
    var = np.full(101, 0.09)
    var[1] = 5.0
    assert flatness_report(_traj(var, np.full(101, 1e-3)), 0.09, 0.9).passed


def test_flatness_needs_paths():
    with pytest.raises(InsufficientPathsError):
        flatness_report(_traj(np.ones(10), np.ones(10), n_paths=50), 1.0, 0.9)


def test_degenerate_zero_variance():
    n = 51
    zero = _traj(np.zeros(n), np.zeros(n))
    assert not flatness_report(zero, 0.09, 0.9).passed
    assert flatness_report(zero, 1e-300, 0.9, allowance=0.0).max_abs_z == math.inf


def test_flatness_translation_invariant():
    s = SchemeConfig(1.0, 50, 500, seed=2)
    reps = []
    for mu0 in (2.0, 0.2):
        m = ModelConfig.fig3(mu0=mu0)
        reps.append(flatness_report(simulate_ensemble(m, s).trajectory, m.v0, m.alpha).max_abs_z)
    assert reps[0] == pytest.approx(reps[1], rel=1e-6, abs=1e-9)


def test_limit_covariance_basics():
    assert limit_covariance(0.9, 1.2, 0.09, 0.0) == 0.09
    for d in (0.3, 2.0):
        assert limit_covariance(1.0, 1.2, 0.09, d) == pytest.approx(0.09 * math.exp(-1.2 * d), rel=1e-8)
    assert limit_covariance(0.9, 1.2, 0.09, -0.5) == limit_covariance(0.9, 1.2, 0.09, 0.5)
    vals = [limit_covariance(0.9, 1.2, 0.09, d) for d in (1.0, 5.0, 20.0)]
    assert vals[0] > vals[1] > vals[2] > 0
    with pytest.raises(ValueError):
        limit_covariance(0.5, 1.0, 0.09, 1.0)


@pytest.mark.parametrize("delta", sorted(C_ORACLE))
def test_limit_covariance_oracle(delta):
    assert limit_covariance(0.9, 1.2, 0.09, delta) == pytest.approx(C_ORACLE[delta], rel=1e-7)


def test_limit_covariance_continuous_at_zero():
    assert limit_covariance(0.9, 1.2, 0.09, 1e-7) == pytest.approx(0.09, rel=1e-3)


def test_covariance_estimate():
    rng = np.random.default_rng(0)
    M = 5000
    a = rng.standard_normal(M)
    b = 0.5 * a + math.sqrt(0.75) * rng.standard_normal(M)
    paths = np.stack([np.zeros(M), a, b], axis=1)
    t = np.array([0.0, 1.0, 2.0])
    est = covariance_estimate(paths, t, 1.0, [0.0, 1.0])
    assert est.cov[0] == pytest.approx(a.var(ddof=1))
    assert abs(est.cov[1] - 0.5) < 4 * est.se[1]
    with pytest.raises(InsufficientPathsError):
        covariance_estimate(paths[:999], t, 1.0, [0.0])
    with pytest.raises(ValueError):
        covariance_estimate(paths, t, 1.0, [2.0])
    const = covariance_estimate(np.ones((1000, 3)), t, 0.0, [0.0, 1.0])
    np.testing.assert_array_equal(const.cov, 0.0)


def test_covariance_estimate_self_consistent_with_trajectory():
    m = ModelConfig.fig3()
    s = SchemeConfig(1.0, 40, 1000, seed=4)
    res = simulate_ensemble(m, s, keep_paths=True)
    est = covariance_estimate(res.paths, res.trajectory.times, 0.5, [0.0])
    assert est.cov[0] == pytest.approx(res.trajectory.var_sample[20], rel=1e-10)


def test_shifted_covariance_stabilizes():
    m = ModelConfig.fig3()
    s = SchemeConfig(6.0, 600, 2000, seed=31)
    res = simulate_ensemble(m, s, keep_paths=True)
    t = res.trajectory.times
    a = covariance_estimate(res.paths, t, 3.0, [0.5])
    b = covariance_estimate(res.paths, t, 4.5, [0.5])
    assert abs(a.cov[0] - b.cov[0]) <= 4 * math.hypot(a.se[0], b.se[0])


def test_confluence_identical_laws_rejected():
    m = ModelConfig.fig3()
    s = SchemeConfig(1.0, 20, 50, seed=1)
    with pytest.raises(ValueError):
        confluence_experiment(m, s, None, PointMass(1.0), PointMass(1.0))


def test_confluence_contracts():
    m = ModelConfig.fig3()
    s = SchemeConfig(1.0, 100, 500, seed=9)
    res = confluence_experiment(m, s, None, PointMass(m.center + 1), PointMass(m.center - 1))
    assert res.delta2[0] == pytest.approx(4.0)
    assert np.all(res.ratio <= 1.0 + 4 * res.se_delta2 / res.delta2[0])
    assert res.ratio[-1] < res.ratio[10]


def test_confluence_ou_coupling():
    # constant kernel, constant sigma: the difference is deterministic, exp(-lam t) times delta_0
    lam = 3.0
    m = ModelConfig(1.0, lam, mu0=0.0, kappa0=0.2, kappa2=0.0, v0=0.05)
    s = SchemeConfig(1.0, 400, 20, seed=1)
    res = confluence_experiment(m, s, None, PointMass(1.0), PointMass(-1.0))
    np.testing.assert_allclose(res.ratio, np.exp(-2 * lam * res.times), atol=1e-12)
