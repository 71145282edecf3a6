"""The stabilizer ``varsigma^2`` that makes the variance of a scaled Volterra process flat.

For the fractional kernel ``K_alpha`` and ``1/2 < alpha < 1``

    varsigma^2_{alpha,lambda,c}(t) = 2 lambda c t^(1-alpha) sum_k (-1)^k c_k (lambda t^alpha)^k,

where the coefficients ``c_k`` depend on ``alpha`` only. They solve the power-series
form of ``c lambda^2 (1 - R^2) = f^2 * varsigma^2``: with ``a_k = 1/Gamma(alpha k + 1)``,
``b_k = 1/Gamma(alpha (k + 1))``, ``ct_k = c_k Gamma(alpha k + 2 - alpha)`` and
``bt_l = (b*b)_l Gamma(alpha (l + 2) - 1)``,

    sum_l bt_l ct_(k-l) = (a*b)_k Gamma(alpha (k + 1)).

This triangular solve is a power-series division and loses roughly a third of a
digit per coefficient in double precision, so it is carried out with mpmath.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy import integrate, special as sp

from .kernels import laplace_numeric
from .resolvent import (
    ResolventTable,
    f_squared_integral,
    resolvent_closed,
    resolvent_density,
)
from .special import check_alpha, mittag_leffler_alpha_alpha

__all__ = [
    "StabilizerSeries",
    "BoundCertificate",
    "TruncationError",
    "NegativeStabilizerError",
    "GrowthBoundError",
    "compute_coeffs",
    "eval_sigma2",
    "intrinsic_sigma2",
    "residual_check",
    "asymptote_check",
    "verify_growth_bound",
    "root_test",
    "positivity_scan",
    "laplace_identity_gap",
]

TRUNCATION_TOL = 1e-12  # last retained term relative to the sum
ROUNDING_TOL = 1e-10  # double-precision rounding estimate that triggers mpmath
NEGATIVITY_TOL = 1e-12
_EPS = np.finfo(float).eps


class TruncationError(ArithmeticError):
    """The retained coefficients do not resolve the series at this argument."""


class NegativeStabilizerError(ValueError):
    pass


class GrowthBoundError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BoundCertificate:
    """``|c_k| <= K_const * A_const**k / Gamma(alpha k + 2 - alpha)`` for all computed k."""

    K_const: float
    A_const: float


@dataclass(frozen=True)
class StabilizerSeries:
    alpha: float
    signs: np.ndarray
    log_abs: np.ndarray  # ln |c_k|
    scaled: np.ndarray  # c_k * Gamma(alpha k + 2 - alpha)
    bound_cert: BoundCertificate | None = None
    precision_digits: int = 0
    coeff_rel_error: float = 0.0
    _mp_coeffs: tuple = field(default=(), repr=False, compare=False)

    @property
    def trunc_order(self) -> int:
        return len(self.log_abs) - 1

    @property
    def c_coeffs(self) -> np.ndarray:
        """``c_k`` as doubles; far coefficients may underflow to zero."""
        with np.errstate(under="ignore"):
            return self.signs * np.exp(self.log_abs)

    @property
    def c0(self) -> float:
        return float(self.signs[0] * math.exp(self.log_abs[0]))

    def with_certificate(self, cert: BoundCertificate) -> "StabilizerSeries":
        return replace(self, bound_cert=cert)

    def to_csv(self, path, header_lines=()):
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["k", "c_k", "log_abs_c_k", "sign", "c_k_scaled"])
            c = self.c_coeffs
            for k in range(self.trunc_order + 1):
                w.writerow(
                    [
                        k,
                        format(float(c[k]), ".17g"),
                        format(float(self.log_abs[k]), ".17g"),
                        int(self.signs[k]),
                        format(float(self.scaled[k]), ".17g"),
                    ]
                )


def _recursion(alpha: float, K: int, dps: int):
    with mp.workdps(dps):
        a = mp.mpf(alpha)
        A = [1 / mp.gamma(a * k + 1) for k in range(K + 1)]
        B = [1 / mp.gamma(a * (k + 1)) for k in range(K + 1)]
        rhs = [mp.fsum(A[j] * B[n - j] for j in range(n + 1)) * mp.gamma(a * (n + 1)) for n in range(K + 1)]
        bt = [mp.fsum(B[j] * B[n - j] for j in range(n + 1)) * mp.gamma(a * (n + 2) - 1) for n in range(K + 1)]
        ct = []
        for n in range(K + 1):
            acc = rhs[n] - mp.fsum(bt[l] * ct[n - l] for l in range(1, n + 1))
            ct.append(acc / bt[0])
        c = [x / mp.gamma(a * k + 2 - a) for k, x in enumerate(ct)]
    return ct, c


@lru_cache(maxsize=32)
def _coeffs_cached(alpha: float, K: int) -> StabilizerSeries:
    if alpha == 1.0:
        signs = np.zeros(K + 1)
        signs[0] = 1.0
        log_abs = np.full(K + 1, -math.inf)
        log_abs[0] = 0.0
        scaled = np.zeros(K + 1)
        scaled[0] = 1.0
        coeffs = (mp.mpf(1),) + (mp.mpf(0),) * K
        return StabilizerSeries(1.0, signs, log_abs, scaled, BoundCertificate(1.0, 1.0), 0, 0.0, coeffs)

    dps = 25 + int(0.4 * K)
    ct, c = _recursion(alpha, K, dps)
    ct_hi, c_hi = _recursion(alpha, K, dps + 20)
    with mp.workdps(dps + 20):
        rel = max((abs((x - y) / y) if y != 0 else abs(x)) for x, y in zip(c, c_hi))
    rel = float(rel)
    if not rel < 1e-17:
        raise ArithmeticError(f"coefficient recursion did not stabilise (relative change {rel:.2e})")
    with mp.workdps(dps + 20):
        signs = np.array([float(mp.sign(x)) for x in c_hi])
        log_abs = np.array([float(mp.log(abs(x))) if x != 0 else -math.inf for x in c_hi])
        scaled = np.array([float(x) for x in ct_hi])
    for arr in (signs, log_abs, scaled):
        arr.setflags(write=False)
    return StabilizerSeries(alpha, signs, log_abs, scaled, None, dps + 20, rel, tuple(c_hi))


def compute_coeffs(alpha: float, K: int = 400) -> StabilizerSeries:
    """Coefficients ``c_0 .. c_K`` of the stabilizer series.

    ``alpha = 1`` returns the exponential-kernel series ``c_0 = 1``, ``c_k = 0``.

    >>> s = compute_coeffs(0.9, 20)
    >>> round(s.c0, 12) == round(math.gamma(0.9)**2 / (math.gamma(0.8) * math.gamma(1.1)), 12)
    True
    """
    alpha = check_alpha(alpha)
    if alpha <= 0.5:
        raise ValueError("the stabilizer series needs alpha > 1/2 (f_alpha must be square integrable)")
    if int(K) != K or K < 1:
        raise ValueError("K must be a positive integer")
    return _coeffs_cached(float(alpha), int(K))


# ---------------------------------------------------------------- evaluation


def _series_sum(series: StabilizerSeries, s: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """``sum_k (-1)^k c_k s^k`` for ``s >= 0``.

    Terms are formed as ``exp(ln|c_k| + k ln s)``; rows whose rounding estimate
    (formation plus summation) is too large are redone in mpmath.
    """
    out = np.empty_like(s)
    if series.alpha == 1.0:
        out[:] = 1.0
        return out
    K = series.trunc_order
    k = np.arange(K + 1)
    alt = series.signs * np.where(k % 2 == 0, 1.0, -1.0)
    err_weight = _EPS * (8.0 + np.abs(series.log_abs))
    for lo in range(0, len(s), chunk):
        sv = s[lo : lo + chunk]
        pos = sv > 0
        ls = np.log(np.where(pos, sv, 1.0))[:, None]
        with np.errstate(under="ignore", over="ignore"):
            mags = np.exp(series.log_abs[None, :] + k[None, :] * ls)
        mags[~pos, 1:] = 0.0
        total = mags @ alt
        last = mags[:, -1]
        bad = ~(last <= TRUNCATION_TOL * np.abs(total))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise TruncationError(
                f"{K + 1} coefficients do not resolve the series at lambda t^alpha = {sv[i]:g} "
                f"(last term {last[i]:.2e}, sum {total[i]:.2e})"
            )
        rounding = mags @ err_weight + (mags * (k[None, :] * np.abs(ls) * _EPS)).sum(axis=1)
        for i in np.flatnonzero(rounding > ROUNDING_TOL * np.abs(total)):
            total[i] = _series_sum_mp(series, float(sv[i]), rounding[i] / abs(total[i]))
        out[lo : lo + chunk] = total
    return out


def _series_sum_mp(series: StabilizerSeries, s: float, loss: float) -> float:
    digits = 20 + int(max(0.0, math.log10(max(loss, 1.0) / _EPS)))
    if series.coeff_rel_error * loss / _EPS > ROUNDING_TOL:
        raise TruncationError(f"coefficients are not accurate enough at lambda t^alpha = {s:g}")
    with mp.workdps(max(digits, 30)):
        sm = mp.mpf(s)
        total = mp.fsum(((-1) ** k) * ck * sm**k for k, ck in enumerate(series._mp_coeffs))
        return float(total)


def intrinsic_sigma2(series: StabilizerSeries, s):
    """``varsigma^2_alpha(s) = 2 s^((1-alpha)/alpha) sum_k (-1)^k c_k s^k``.

    ``varsigma^2_{alpha,lambda,c}(t) = c lambda^(2 - 1/alpha) varsigma^2_alpha(lambda t^alpha)``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(~(s >= 0)):
        raise ValueError("the intrinsic stabilizer is defined for s >= 0")
    flat = np.atleast_1d(s).ravel()
    a = series.alpha
    out = 2.0 * flat ** ((1.0 - a) / a) * _series_sum(series, flat)
    out = out.reshape(s.shape)
    return out[()] if out.ndim == 0 else out


def eval_sigma2(series: StabilizerSeries, lam: float, c: float, t):
    """``varsigma^2_{alpha,lambda,c}(t)``; it vanishes at ``t = 0`` when ``alpha < 1``."""
    if not lam > 0 or not c > 0:
        raise ValueError("lambda and c must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0)):
        raise ValueError("the stabilizer is evaluated for t >= 0")
    a = series.alpha
    flat = np.atleast_1d(t).ravel()
    out = 2.0 * lam * c * flat ** (1.0 - a) * _series_sum(series, lam * flat**a)
    out = out.reshape(t.shape)
    return out[()] if out.ndim == 0 else out


# ------------------------------------------------------------------- checks


def _check_table(series: StabilizerSeries, lam: float, table: ResolventTable):
    if table.alpha is None or not math.isclose(table.alpha, series.alpha, rel_tol=1e-12):
        raise ValueError("the resolvent table was built for a different alpha")
    if not math.isclose(table.lam, lam, rel_tol=1e-12):
        raise ValueError("the resolvent table was built for a different lambda")


def convolution_f2_sigma2(series: StabilizerSeries, lam: float, c: float, t: np.ndarray,
                          epsrel: float = 1e-10) -> np.ndarray:
    """``(f_lambda^2 * varsigma^2)(t)`` for an array of times, by adaptive quadrature.

    With ``s = t u`` and ``1 - u = w^p``, ``p = 1/(2 alpha - 1)``, the
    ``(t - s)^(2 alpha - 2)`` endpoint of ``f^2`` is absorbed into ``dw``.
    """
    a = series.alpha
    t = np.asarray(t, dtype=float)
    if a == 1.0:
        return c * lam**2 * (1.0 - np.exp(-2.0 * lam * t))
    p = 1.0 / (2.0 * a - 1.0)

    def integrand(w):
        if w == 0.0:
            # f^2(t - s) (t - s)^(2 - 2 alpha) -> lambda^2 / Gamma(alpha)^2 as s -> t
            lead = (lam / math.gamma(a)) ** 2
            return t * p * t ** (2 * a - 2) * lead * eval_sigma2(series, lam, c, t)
        v = w**p
        r = t * v
        f_reg = lam * mittag_leffler_alpha_alpha(a, -lam * r**a)  # f(r) = f_reg r^(alpha-1)
        u = 1.0 - v
        return t * p * t ** (2 * a - 2) * f_reg**2 * eval_sigma2(series, lam, c, t * u)

    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=epsrel, limit=2000)
    return val


def residual_check(series: StabilizerSeries, lam: float, c: float, table: ResolventTable,
                   t_min: float = 0.1, max_nodes: int = 200) -> float:
    """Max over grid nodes ``t_i >= t_min`` of the relative residual of
    ``c lambda^2 (1 - R^2) = f^2 * varsigma^2``.

    At most ``max_nodes`` nodes are used, evenly spread over the eligible ones.
    """
    _check_table(series, lam, table)
    t = table.times
    idx = np.flatnonzero(t >= t_min)
    if len(idx) > max_nodes:
        idx = idx[np.unique(np.linspace(0, len(idx) - 1, max_nodes).round().astype(int))]
    tt = t[idx]
    lhs = c * lam**2 * (1.0 - table.r_values[idx] ** 2)
    rhs = convolution_f2_sigma2(series, lam, c, tt)
    return float(np.max(np.abs(lhs - rhs) / lhs))


@dataclass(frozen=True)
class AsymptoteReport:
    limit: float
    value_at_T: float
    T: float
    relative_gap_at_T: float


def asymptote_check(series: StabilizerSeries, lam: float, c: float, table: ResolventTable,
                    T: float | None = None) -> AsymptoteReport:
    """Compare ``varsigma^2(T)`` with its long-run limit ``c lambda^2 / int f^2``."""
    _check_table(series, lam, table)
    f2 = table.metadata.get("f2_integral")
    if f2 is None:
        f2 = f_squared_integral(series.alpha, lam)
    limit = c * lam**2 / f2
    T = table.grid.horizon if T is None else float(T)
    val = float(eval_sigma2(series, lam, c, T))
    return AsymptoteReport(limit, val, T, abs(val / limit - 1.0))


def verify_growth_bound(series: StabilizerSeries, k_max_search: float = 1e6,
                        A_max: float = 100.0, n_grid: int = 4000) -> BoundCertificate:
    """Smallest ``A in [2^alpha, A_max]`` on a geometric grid admitting a constant
    ``K <= k_max_search`` with ``|c_k| Gamma(alpha k + 2 - alpha) <= K A^k``.

    ``K`` is at least ``max(1, 1/Gamma(2 - alpha))``.
    """
    a = series.alpha
    if series.trunc_order < 20:
        raise ValueError("at least 20 coefficients are needed for a meaningful bound")
    if a == 1.0:
        return BoundCertificate(1.0, 2.0)
    log_scaled = np.log(np.abs(series.scaled[1:]))
    k = np.arange(1, series.trunc_order + 1)
    k_floor = max(1.0, 1.0 / math.gamma(2.0 - a), abs(series.scaled[0]))
    for A in np.geomspace(2.0**a, A_max, n_grid):
        logK = float(np.max(log_scaled - k * math.log(A)))
        K_const = max(k_floor, math.exp(min(logK, 700.0)))
        if K_const <= k_max_search:
            return BoundCertificate(K_const, float(A))
    worst = int(k[np.argmax(log_scaled - k * math.log(A_max))])
    raise GrowthBoundError(f"no (K, A) in [1, {k_max_search:g}] x [2^alpha, {A_max:g}]; worst k = {worst}")


def root_test(series: StabilizerSeries, k_min: int = 50) -> tuple[bool, np.ndarray]:
    """Is ``|c_k|^(1/k)`` strictly decreasing for ``k >= k_min``? Returns the flag and the roots."""
    k = np.arange(1, series.trunc_order + 1)
    roots = np.exp(series.log_abs[1:] / k)
    tail = roots[k_min - 1 :]
    return bool(np.all(np.diff(tail) < 0)), roots


@dataclass(frozen=True)
class PositivityReport:
    min_value: float
    argmin: float


def positivity_scan(series: StabilizerSeries, lam: float, c: float, T: float, step: float,
                    raise_on_negative: bool = True) -> PositivityReport:
    """Minimum of ``varsigma^2`` on the grid ``0, step, ..., T``."""
    n = int(round(T / step))
    t = np.linspace(0.0, n * step, n + 1)
    v = eval_sigma2(series, lam, c, t)
    i = int(np.argmin(v))
    rep = PositivityReport(float(v[i]), float(t[i]))
    if raise_on_negative and rep.min_value < -NEGATIVITY_TOL:
        raise NegativeStabilizerError(
            f"varsigma^2 reaches {rep.min_value:.3e} at t = {rep.argmin:g}"
        )
    return rep


def laplace_identity_gap(series: StabilizerSeries, lam: float, c: float, t: float) -> float:
    """Relative gap in ``t L[f^2](t) L[varsigma^2](t) = 2 c lambda^2 L[R f](t)``."""
    a = series.alpha
    g = 2.0 * a - 2.0

    def f2(u):
        return float(resolvent_density(a, lam, u)) ** 2

    def s2(u):
        return float(eval_sigma2(series, lam, c, u))

    def rf(u):
        return float(resolvent_closed(a, lam, u) * resolvent_density(a, lam, u))

    # exp(-t u) < 1e-18 beyond the cut, which keeps the series in range
    cut = 42.0 / t
    lf2 = laplace_numeric(f2, t, singularity_exponent=g)
    ls2 = laplace_numeric(s2, t, singularity_exponent=1.0 - a, upper=cut)
    lrf = laplace_numeric(rf, t, singularity_exponent=a - 1.0)
    lhs = t * lf2 * ls2
    rhs = 2.0 * c * lam**2 * lrf
    return abs(lhs / rhs - 1.0)
