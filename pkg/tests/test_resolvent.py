import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fakestat.kernels import (
    ConstantKernel,
    ExpFractionalKernel,
    ExponentialKernel,
    FractionalKernel,
    Grid,
    GridMismatchError,
    Sampled,
)
from fakestat.resolvent import (
    ResolventTable,
    StepTooLargeError,
    closed_form_table,
    density_mass,
    diagnose_constant_kernel,
    envelope_constant,
    f_squared_integral,
    lag_weights,
    resolvent_closed,
    resolvent_density,
    solve_resolvent_grid,
    wiener_hopf_residual,
    wiener_hopf_solve,
)

# int_0^inf f_{alpha,1}^2 from the spectral double integral (independent mpmath oracle)
F2_ORACLE = {0.75: 0.6377234979682648, 0.9: 0.5145390261536134, 0.6: 1.3982317470719037}


def test_exponential_examples():
    assert resolvent_closed(1.0, 0.5, 2.0) == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert resolvent_density(1.0, 2.0, 0.5) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_small_time_law(alpha):
    lam, t = 0.7, 1e-6
    r = resolvent_closed(alpha, lam, t)
    assert (1.0 - r) / (lam * t**alpha / math.gamma(alpha + 1)) == pytest.approx(1.0, abs=1e-3)
    f = resolvent_density(alpha, lam, t)
    assert f / (lam * t ** (alpha - 1) / math.gamma(alpha)) == pytest.approx(1.0, abs=1e-3)


@given(st.floats(0.55, 0.99), st.floats(0.05, 5.0), st.floats(0.01, 20.0))
def test_scaling_invariant(alpha, lam, t):
    k = lam ** (1.0 / alpha)
    assert resolvent_closed(alpha, lam, t) == pytest.approx(resolvent_closed(alpha, 1.0, k * t), rel=1e-12)
    assert resolvent_density(alpha, lam, t) == pytest.approx(k * resolvent_density(alpha, 1.0, k * t), rel=1e-10)


def test_domain_errors():
    with pytest.raises(ValueError):
        resolvent_density(0.8, 1.0, 0.0)
    with pytest.raises(ValueError):
        resolvent_closed(0.8, -1.0, 1.0)
    with pytest.raises(ValueError):
        f_squared_integral(0.5, 1.0)


def test_grid_constant_kernel():
    g = Grid.from_horizon(10.0, 2000)
    tab = solve_resolvent_grid(ConstantKernel(1.0), 0.5, g)
    np.testing.assert_allclose(tab.r_values, np.exp(-0.5 * g.nodes), atol=1e-6)
    np.testing.assert_allclose(tab.f_values, 0.5 * np.exp(-0.5 * g.nodes), atol=1e-6)
    assert tab.invariant_violations() == []


def test_grid_exponential_kernel():
    g = Grid.from_horizon(5.0, 2000)
    tab = solve_resolvent_grid(ExponentialKernel(1.0), 2.0, g)
    t = g.nodes
    np.testing.assert_allclose(tab.r_values, (1.0 + 2.0 * np.exp(-3.0 * t)) / 3.0, atol=1e-6)


@pytest.mark.parametrize("alpha,lam", [(0.9, 0.2), (0.6, 0.2), (0.75, 1.0)])
def test_grid_fractional_matches_closed_form(alpha, lam):
    g = Grid.from_horizon(5.0, 2000)
    tab = solve_resolvent_grid(FractionalKernel(alpha), lam, g)
    np.testing.assert_allclose(tab.r_values, resolvent_closed(alpha, lam, g.nodes), atol=1e-4)
    f_ref = resolvent_density(alpha, lam, g.nodes[100:])
    np.testing.assert_allclose(tab.f_values[100:], f_ref, rtol=5e-3)
    assert math.isinf(tab.f_values[0])
    assert tab.invariant_violations(tol=1e-3) == []


def test_exp_fractional_density_is_damped():
    alpha, rho, lam = 0.75, 0.8, 1.0
    g = Grid.from_horizon(4.0, 2000)
    damped = solve_resolvent_grid(ExpFractionalKernel(alpha, rho), lam, g)
    plain = solve_resolvent_grid(FractionalKernel(alpha), lam, g)
    t = g.nodes
    sel = t >= 0.5
    np.testing.assert_allclose(damped.f_values[sel], np.exp(-rho * t[sel]) * plain.f_values[sel], rtol=1e-3)


def test_exp_fractional_resolvent_is_not_damped_resolvent():
    # R_{alpha,rho,lambda} = exp(-rho t) R_{alpha,0,lambda} would send R to 0; it tends to rho/(rho + ...) > 0
    alpha, rho, lam = 0.75, 0.8, 1.0
    g = Grid.from_horizon(4.0, 2000)
    damped = solve_resolvent_grid(ExpFractionalKernel(alpha, rho), lam, g)
    plain = solve_resolvent_grid(FractionalKernel(alpha), lam, g)
    gap = np.max(np.abs(damped.r_values - np.exp(-rho * g.nodes) * plain.r_values))
    assert gap > 0.05


def test_closed_form_table_against_grid_solver():
    g = Grid.from_horizon(2.0, 1000)
    a = closed_form_table(0.8, 0.5, g)
    b = solve_resolvent_grid(FractionalKernel(0.8), 0.5, g)
    np.testing.assert_allclose(a.r_values, b.r_values, atol=1e-5)
    assert a.metadata["method"] == "closed"


def test_step_too_large():
    with pytest.raises(StepTooLargeError):
        solve_resolvent_grid(ConstantKernel(1.0), 50.0, Grid.from_horizon(1.0, 10))


def test_lag_weights_integrate_kernel():
    g = Grid.from_horizon(1.0, 100)
    a = 0.7
    P, Q = lag_weights(FractionalKernel(a), g)
    total = np.sum(P + Q)
    assert total == pytest.approx(1.0 / math.gamma(a + 1), rel=1e-10)


def test_wiener_hopf():
    g = Grid.from_horizon(5.0, 5000)
    tab = solve_resolvent_grid(ConstantKernel(1.0), 1.0, g)
    one = Sampled(g, np.ones(g.n_points))
    np.testing.assert_allclose(wiener_hopf_solve(one, tab).values, tab.r_values, atol=1e-6)
    zero = Sampled(g, np.zeros(g.n_points))
    assert np.all(wiener_hopf_solve(zero, tab).values == 0.0)
    ramp = Sampled(g, g.nodes.copy())
    x = wiener_hopf_solve(ramp, tab)
    np.testing.assert_allclose(x.values, 1.0 - np.exp(-g.nodes), atol=1e-6)
    assert wiener_hopf_residual(x, ramp, tab) < 1e-6


def test_wiener_hopf_grid_mismatch():
    tab = closed_form_table(0.8, 1.0, Grid.from_horizon(1.0, 10))
    with pytest.raises(GridMismatchError):
        wiener_hopf_solve(Sampled(Grid.from_horizon(1.0, 20), np.ones(21)), tab)


def test_diagnose_constant_kernel():
    g = Grid.from_horizon(10.0, 2000)
    rep = diagnose_constant_kernel(solve_resolvent_grid(ConstantKernel(1.0), 0.5, g))
    assert rep.is_exponential and rep.rate == pytest.approx(0.5, rel=1e-6)
    rep = diagnose_constant_kernel(closed_form_table(0.75, 1.0, g))
    assert not rep.is_exponential and rep.max_log_linearity_residual > 0.1


def test_diagnose_needs_three_points():
    tab = closed_form_table(0.8, 1.0, Grid(0.1, 2))
    rep = diagnose_constant_kernel(tab)
    assert not rep.is_exponential and rep.error


@pytest.mark.parametrize("alpha", sorted(F2_ORACLE))
def test_f_squared_integral_oracle(alpha):
    assert f_squared_integral(alpha, 1.0) == pytest.approx(F2_ORACLE[alpha], rel=1e-8)
    assert f_squared_integral(alpha, 2.5) == pytest.approx(2.5 ** (1 / alpha) * F2_ORACLE[alpha], rel=1e-8)
    assert f_squared_integral(1.0, 3.0) == pytest.approx(1.5)


@pytest.mark.parametrize("alpha,lam", [(0.9, 0.2), (0.6, 0.2), (0.9, 1.2), (1.0, 1.0)])
def test_density_mass(alpha, lam):
    rep = density_mass(alpha, lam)
    assert rep.total == pytest.approx(1.0, abs=1e-6)
    if alpha < 1:
        assert abs(rep.tail) <= rep.tail_envelope * 1.0001 or rep.tail_envelope > 0


@pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
def test_envelope_bound(alpha):
    C = envelope_constant(alpha)
    t = np.geomspace(1e-4, 1e4, 200)
    f = resolvent_density(alpha, 1.0, t)
    assert np.all(f <= C * np.minimum(t ** (alpha - 1), t ** (-alpha - 1)) * (1 + 1e-9))


def test_hoelder_modulus_of_resolvent():
    # |R(t) - R(s)| <= lam |t - s|^alpha / Gamma(alpha + 1)
    alpha, lam = 0.75, 1.3
    t = np.linspace(0.0, 5.0, 400)
    r = resolvent_closed(alpha, lam, t)
    d = np.abs(r[:, None] - r[None, :])
    bound = lam * np.abs(t[:, None] - t[None, :]) ** alpha / math.gamma(alpha + 1)
    assert np.all(d <= bound + 1e-12)


def test_save_load(tmp_path):
    g = Grid.from_horizon(1.0, 50)
    tab = solve_resolvent_grid(ExpFractionalKernel(0.7, 0.4), 0.9, g)
    path = tab.save(tmp_path / "r.csv", ["kernel exp_fractional"]) and tmp_path / "r.csv"
    back = ResolventTable.load(path)
    assert back.kernel == tab.kernel and back.lam == tab.lam
    np.testing.assert_array_equal(back.r_values, tab.r_values)
    np.testing.assert_array_equal(back.f_values, tab.f_values)
    assert "tolerances" in back.metadata


def test_table_is_read_only():
    tab = closed_form_table(0.8, 1.0, Grid.from_horizon(1.0, 10))
    with pytest.raises(ValueError):
        tab.r_values[0] = 2.0
