import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special as sp

from fakestat.special import (
    alpha_from_hurst,
    beta,
    check_alpha,
    h_alpha,
    hurst_from_alpha,
    log_gamma,
    mittag_leffler,
    mittag_leffler_alpha_alpha,
)

# (alpha, z, E_alpha(z), E_{alpha,alpha}(z)) from a 60-digit mpmath power series
ML_ORACLE = [
    (0.5, -1.0, 0.427583576155807, 0.13660600739194928),
    (0.5, -4.0, 0.13699945762506139, 0.016191753047510727),
    (0.75, -2.5, 0.15642695861194744, 0.055222034307775473),
    (0.9, -8.0, 0.017095144580796806, 0.0025808143045736156),
    (0.6, -15.0, 0.03075949125646348, 0.0012559189916879758),
    (0.95, -20.0, 0.0028432225780766326, 0.00015040174846745852),
    (0.75, -30.0, 0.0095166926931171289, 0.00024622074958261616),
    # close to alpha = 1 the algebraic tail x^-1 / Gamma(1 - alpha) competes with exp(-x)
    (0.97, -25.0, 0.0013256193659706417, 5.6103662409091434e-05),
    (0.99, -15.0, 0.0007831669685167621, 6.171904891046835e-05),
    (0.999, -19.0, 5.9332115778728666e-05, 3.5543939234906026e-06),
    (0.999999, -12.5, 3.824277006892859e-06, 3.73646737094104e-06),
]


@pytest.mark.parametrize("alpha,z,e1,ea", ML_ORACLE)
def test_mittag_leffler_against_high_precision_series(alpha, z, e1, ea):
    assert mittag_leffler(alpha, z) == pytest.approx(e1, rel=1e-9, abs=1e-12)
    assert mittag_leffler_alpha_alpha(alpha, z) == pytest.approx(ea, rel=1e-8, abs=1e-12)


def test_half_order_closed_form():
    x = np.array([0.1, 0.5, 1.0, 2.0, 3.0])
    exact = sp.erfcx(x)  # E_{1/2}(-x) = exp(x^2) erfc(x)
    np.testing.assert_allclose(mittag_leffler(0.5, -x), exact, rtol=1e-9)


def test_alpha_one_is_exponential():
    t = np.linspace(0, 30, 301)
    np.testing.assert_allclose(mittag_leffler(1.0, -t), np.exp(-t), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(mittag_leffler_alpha_alpha(1.0, -t), np.exp(-t), rtol=1e-10, atol=1e-14)


def test_continuity_at_alpha_one():
    t = np.linspace(0.0, 20.0, 201)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        near = mittag_leffler(1.0 - 1e-9, -t)
    np.testing.assert_allclose(near, np.exp(-t), rtol=0, atol=1e-8)


def test_zero_argument_and_scalar_shape():
    assert mittag_leffler(0.7, 0.0) == 1.0
    assert mittag_leffler_alpha_alpha(0.7, 0.0) == pytest.approx(1.0 / math.gamma(0.7))
    assert np.ndim(mittag_leffler(0.7, -1.0)) == 0


@given(st.floats(0.55, 0.99), st.floats(0.0, 40.0))
def test_mittag_leffler_is_completely_monotone_sample(alpha, x):
    # E_alpha(-x) lies in (0, 1] and decreases in x
    a = mittag_leffler(alpha, -x)
    b = mittag_leffler(alpha, -(x + 0.5))
    assert 0.0 < b <= a <= 1.0 + 1e-15


@given(st.floats(0.55, 0.95))
def test_spectral_density_laplace_property(alpha):
    t = 1.3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, _ = integrate.quad(lambda u: math.exp(-t * u) * h_alpha(alpha, u), 0, 1, limit=200)
        tail, _ = integrate.quad(lambda u: math.exp(-t * u) * h_alpha(alpha, u), 1, np.inf, limit=200)
    assert head + tail == pytest.approx(mittag_leffler(alpha, -t**alpha), rel=1e-6)


def test_beta_and_log_gamma():
    assert beta(1.0, 1.0) == pytest.approx(1.0)
    assert beta(0.5, 0.5) == pytest.approx(math.pi)
    assert log_gamma(5.0) == pytest.approx(math.log(24.0))
    with pytest.raises(ValueError):
        log_gamma(0.0)
    with pytest.raises(ValueError):
        beta(-1.0, 1.0)


def test_hurst_alpha_roundtrip():
    assert alpha_from_hurst(0.4) == pytest.approx(0.9)
    assert hurst_from_alpha(0.9) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        alpha_from_hurst(0.7)


@pytest.mark.parametrize("bad", [0.0, -0.2, 1.2, math.nan])
def test_check_alpha_rejects(bad):
    with pytest.raises(ValueError):
        check_alpha(bad)


def test_h_alpha_domain():
    with pytest.raises(ValueError):
        h_alpha(0.7, 0.0)
    with pytest.raises(ValueError):
        h_alpha(1.0, 1.0)
