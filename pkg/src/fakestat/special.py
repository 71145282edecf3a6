"""Scalar special functions on the negative real axis.

Log-Gamma and Beta, the Mittag-Leffler functions ``E_alpha`` and
``E_{alpha,alpha}`` for nonpositive arguments, and the spectral density
``H_alpha`` whose Laplace transform is ``t -> E_alpha(-t**alpha)``.

Every function accepts scalars or numpy arrays and returns the same shape.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special as sp

__all__ = [
    "PrecisionWarning",
    "check_alpha",
    "alpha_from_hurst",
    "hurst_from_alpha",
    "log_gamma",
    "beta",
    "mittag_leffler",
    "mittag_leffler_alpha_alpha",
    "h_alpha",
]

# Series is tried for |z| <= Z_SWITCH; points whose rounding estimate exceeds
# SERIES_ABS_TOL fall through to the Laplace representation.
Z_SWITCH = 10.0
SERIES_ABS_TOL = 1e-12
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11
_EPS = np.finfo(float).eps


class PrecisionWarning(RuntimeWarning):
    """Neither the series nor the quadrature reached the requested tolerance."""


def check_alpha(alpha: float, *, allow_one: bool = True) -> float:
    alpha = float(alpha)
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"alpha must lie in {bound}, got {alpha!r}")
    return alpha


def alpha_from_hurst(hurst: float) -> float:
    """Roughness index of the fractional kernel, ``alpha = H + 1/2``."""
    if not 0.0 < hurst <= 0.5:
        raise ValueError(f"Hurst exponent must lie in (0, 1/2], got {hurst!r}")
    return hurst + 0.5


def hurst_from_alpha(alpha: float) -> float:
    return check_alpha(alpha) - 0.5


def log_gamma(x):
    """``ln Gamma(x)`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("log_gamma is only defined for x > 0")
    out = sp.gammaln(x)
    return out[()] if out.ndim == 0 else out


def beta(a, b):
    """Euler Beta function ``Gamma(a) Gamma(b) / Gamma(a + b)``, via log-Gamma."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("beta requires a > 0 and b > 0")
    out = np.exp(sp.gammaln(a) + sp.gammaln(b) - sp.gammaln(a + b))
    return out[()] if out.ndim == 0 else out


def h_alpha(alpha: float, u):
    """Spectral density ``H_alpha(u)`` for ``0 < alpha < 1`` and ``u > 0``.

    ``E_alpha(-t**alpha) = int_0^inf exp(-t u) H_alpha(u) du``.
    """
    alpha = check_alpha(alpha, allow_one=False)
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("h_alpha is singular at u = 0 and undefined for u < 0")
    ua = u**alpha
    out = (
        math.sin(alpha * math.pi)
        / math.pi
        * u ** (alpha - 1.0)
        / (ua * ua + 2.0 * ua * math.cos(math.pi * alpha) + 1.0)
    )
    return out[()] if out.ndim == 0 else out


def _series(alpha: float, beta_: float, x: np.ndarray):
    """Compensated sum of ``sum_k (-x)^k / Gamma(alpha k + beta_)``.

    Returns the sum and an estimate of its absolute rounding error, taken as
    ``eps * sum_k |term_k|`` times a safety factor.
    """
    total = np.zeros_like(x)
    comp = np.zeros_like(x)
    abs_total = np.zeros_like(x)
    logx = np.log(np.where(x > 0, x, 1.0))
    k = 0
    while True:
        if k == 0:
            mag = np.full_like(x, math.exp(-sp.gammaln(beta_)))
        else:
            mag = np.where(x > 0, np.exp(k * logx - sp.gammaln(alpha * k + beta_)), 0.0)
        term = mag if k % 2 == 0 else -mag
        # Neumaier summation
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
        abs_total += mag
        k += 1
        # terms decay monotonically once alpha*k + beta_ exceeds x**(1/alpha)
        past_peak = alpha * k + beta_ > np.max(x) ** (1.0 / alpha) + 2.0
        if k > 2 and past_peak and np.all(mag <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
        if k > 4000:
            break
    return total + comp, 8.0 * _EPS * abs_total


def _quad(func, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)
    return val, err


def _laplace_point(alpha: float, x: float, density: bool) -> tuple[float, float]:
    """One point of the H_alpha representation in angular form.

    With ``w = u**alpha`` the representation reads
    ``E_alpha(-x) = sin(pi a)/(pi a) int_0^inf exp(-(x w)^(1/a)) / q(w) dw``,
    ``q(w) = w^2 + 2 w cos(pi a) + 1``. The further substitution
    ``w = sin(phi) / sin(pi a - phi)`` turns ``sin(pi a) dw / q(w)`` into ``dphi``:

        E_alpha(-x)       = 1/(pi a) int_0^{pi a} exp(-(x w)^(1/a)) dphi,
        E_{a,a}(-x) = x^((1-a)/a)/(pi a) int_0^{pi a} w^(1/a) exp(-(x w)^(1/a)) dphi.

    The integrands are bounded even when ``a`` is close to 1, where ``1/q`` in
    the original variable degenerates into a spike at ``w = 1``; what is left
    is two boundary layers of width ``pi (1 - a)``, integrated separately.
    """
    inv_a = 1.0 / alpha
    top = math.pi * alpha

    def w_of(phi):
        den = math.sin(top - phi)
        return math.inf if den <= 0.0 else math.sin(phi) / den

    if density:
        def integrand(phi):
            w = w_of(phi)
            if not math.isfinite(w):
                return 0.0
            y = (x * w) ** inv_a
            return 0.0 if y > 745.0 else w**inv_a * math.exp(-y)
    else:
        def integrand(phi):
            w = w_of(phi)
            return 0.0 if not math.isfinite(w) else math.exp(-((x * w) ** inv_a))

    # boundary layers of width ~pi (1 - a) at both ends carry the algebraic tail
    b = min(top / 3.0, 50.0 * math.pi * (1.0 - alpha))
    val, err = 0.0, 0.0
    for lo, hi in ((0.0, b), (b, top - b), (top - b, top)):
        v, e = _quad(integrand, lo, hi)
        val, err = val + v, err + e
    val, err = val / top, err / top
    if density:
        scale = x ** ((1.0 - alpha) / alpha)
        val, err = val * scale, err * scale
    return val, err


def _mittag_leffler_neg(alpha: float, beta_: float, z, density: bool):
    alpha = check_alpha(alpha)
    z = np.asarray(z, dtype=float)
    if np.any(~(z <= 0)):
        raise ValueError("only the negative real axis z <= 0 is supported")
    x = np.atleast_1d(-z).astype(float)
    if alpha == 1.0:
        out = np.exp(-x)
    else:
        out = np.empty_like(x)
        use_series = x <= Z_SWITCH
        need_quad = ~use_series
        if np.any(use_series):
            vals, err = _series(alpha, beta_, x[use_series])
            out[use_series] = vals
            bad = err > SERIES_ABS_TOL
            idx = np.flatnonzero(use_series)[bad]
            need_quad[idx] = True
        for i in np.flatnonzero(need_quad):
            val, err = _laplace_point(alpha, x[i], density)
            if err > max(1e-9, 1e-9 * abs(val)):
                warnings.warn(
                    f"Mittag-Leffler evaluation at z={-x[i]:g} only reached "
                    f"abs error {err:.2e}",
                    PrecisionWarning,
                    stacklevel=3,
                )
            out[i] = val
    out = out.reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def mittag_leffler(alpha: float, z):
    """``E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`` for ``z <= 0``.

    The alternating series is used near the origin; where its cancellation
    error is too large the Laplace representation through ``H_alpha`` is
    integrated instead. ``alpha = 1`` returns ``exp(z)`` exactly.

    Examples
    --------
    >>> round(float(mittag_leffler(1.0, -2.0)), 10)
    0.1353352832
    >>> float(mittag_leffler(0.9, 0.0))
    1.0
    """
    return _mittag_leffler_neg(alpha, 1.0, z, density=False)


def mittag_leffler_alpha_alpha(alpha: float, z):
    """Two-parameter ``E_{alpha,alpha}(z)`` for ``z <= 0``.

    This is the series behind the Mittag-Leffler density,
    ``f_{alpha,lambda}(t) = lambda t^(alpha-1) E_{alpha,alpha}(-lambda t^alpha)``.
    """
    return _mittag_leffler_neg(alpha, float(alpha), z, density=True)
