"""Resolvents ``R_lambda`` of ``R + lambda K * R = 1`` and densities ``f = -R'``.

Closed forms cover the fractional kernel, where ``R = E_alpha(-lambda t^alpha)``.
Any other kernel goes through a product-integration solver on a uniform grid.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, special as sp

from .kernels import (
    FractionalKernel,
    Grid,
    GridMismatchError,
    Kernel,
    Sampled,
    convolve_grid,
    kernel_from_dict,
    read_columns,
    write_columns,
)
from .special import check_alpha, mittag_leffler, mittag_leffler_alpha_alpha

__all__ = [
    "ResolventTable",
    "StepTooLargeError",
    "ConstantKernelReport",
    "MassReport",
    "resolvent_closed",
    "resolvent_density",
    "solve_resolvent_grid",
    "closed_form_table",
    "lag_weights",
    "wiener_hopf_solve",
    "wiener_hopf_residual",
    "diagnose_constant_kernel",
    "f_squared_integral",
    "density_mass",
    "envelope_constant",
]

LOG_LINEARITY_TOL = 1e-6
TOLERANCES = {"ml_series_abs": 1e-12, "quad_epsrel": 1e-11, "log_linearity": LOG_LINEARITY_TOL}


class StepTooLargeError(ValueError):
    """The diagonal weight of the implicit update is not contractive."""


def resolvent_closed(alpha: float, lam: float, t):
    """``R_{alpha,lambda}(t) = E_alpha(-lambda t^alpha)`` for ``t >= 0``."""
    alpha = check_alpha(alpha)
    _check_lambda(lam)
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0)):
        raise ValueError("the resolvent is evaluated for t >= 0")
    return mittag_leffler(alpha, -lam * t**alpha)


def resolvent_density(alpha: float, lam: float, t):
    """Mittag-Leffler density ``f_{alpha,lambda}(t) = lambda t^(alpha-1) E_{alpha,alpha}(-lambda t^alpha)``."""
    alpha = check_alpha(alpha)
    _check_lambda(lam)
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("the density is evaluated for t > 0 (it blows up like t^(alpha-1) at 0)")
    if alpha == 1.0:
        out = lam * np.exp(-lam * t)
        return out[()] if out.ndim == 0 else out
    return lam * t ** (alpha - 1.0) * mittag_leffler_alpha_alpha(alpha, -lam * t**alpha)


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")


# --------------------------------------------------------------------- table


@dataclass
class ResolventTable:
    """Grid samples of ``R_lambda`` and ``f_lambda``; ``f_values[0]`` is inf for singular kernels."""

    kernel: Kernel
    lam: float
    grid: Grid
    r_values: np.ndarray
    f_values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r_values = np.asarray(self.r_values, dtype=float)
        self.f_values = np.asarray(self.f_values, dtype=float)
        n = self.grid.n_points
        if self.r_values.shape != (n,) or self.f_values.shape != (n,):
            raise GridMismatchError("table columns do not match the grid")
        self.r_values.setflags(write=False)
        self.f_values.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def r(self) -> Sampled:
        return Sampled(self.grid, self.r_values)

    @property
    def f(self) -> Sampled:
        return Sampled(self.grid, self.f_values, exponent=self.kernel.exponent)

    @property
    def alpha(self) -> float | None:
        return getattr(self.kernel, "alpha", 1.0 if self.kernel.exponent == 0 else None)

    def invariant_violations(self, tol: float = 1e-6) -> list[str]:
        """Check ``R(0)=1``, monotonicity, positivity and ``int_0^t f = 1 - R``."""
        out = []
        r, f = self.r_values, self.f_values
        if abs(r[0] - 1.0) > 1e-14:
            out.append(f"R(0) = {r[0]!r}")
        if np.any(np.diff(r) > tol):
            out.append("R is not nonincreasing")
        if np.any(r <= 0) or np.any(r > 1 + tol):
            out.append("R leaves (0, 1]")
        if np.any(f[1:] < -tol):
            out.append("f has negative values")
        if math.isfinite(f[0]):
            h = self.grid.step
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))])
            err = np.max(np.abs(cum - (1.0 - r)))
            if err > tol:
                out.append(f"trapezoid of f differs from 1 - R by {err:.2e}")
        return out

    # -- serialization
    def save(self, path, header_lines=()) -> Path:
        """Write ``<path>`` as CSV (t, R, f) and ``<stem>.json`` with the metadata."""
        path = Path(path)
        write_columns(path, {"t": self.times, "R": self.r_values, "f": self.f_values}, header_lines)
        meta = {
            "kernel": self.kernel.to_dict(),
            "lambda": self.lam,
            "step": self.grid.step,
            "n_points": self.grid.n_points,
            **self.metadata,
        }
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
        return sidecar

    @classmethod
    def load(cls, path) -> "ResolventTable":
        path = Path(path)
        cols = read_columns(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        kernel = kernel_from_dict(meta.pop("kernel"))
        grid = Grid(meta.pop("step"), meta.pop("n_points"))
        lam = meta.pop("lambda")
        return cls(kernel, lam, grid, cols["R"], cols["f"], meta)


# --------------------------------------------------------------- grid solver

_GL_X = 0.5 * (np.polynomial.legendre.leggauss(12)[0] + 1.0)
_GL_W = 0.5 * np.polynomial.legendre.leggauss(12)[1]


def lag_weights(kernel: Kernel, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """``P_m = int_0^h K(mh+s)(1-s/h) ds`` and ``Q_m = int_0^h K(mh+s)(s/h) ds``.

    The first lag uses Gauss-Jacobi nodes for the power ``s**exponent``; the
    others use 12-point Gauss-Legendre.
    """
    h = grid.step
    n = grid.n_points - 1
    gam = kernel.exponent
    P = np.empty(n)
    Q = np.empty(n)
    xj, wj = sp.roots_jacobi(10, 0.0, gam)
    u = 0.5 * (xj + 1.0)
    wj = wj / 2.0 ** (gam + 1.0)
    phi = kernel.regular(h * u)
    P[0] = h ** (gam + 1.0) * np.sum(wj * phi * (1.0 - u))
    Q[0] = h ** (gam + 1.0) * np.sum(wj * phi * u)
    if n > 1:
        m = np.arange(1, n)[:, None]
        kv = kernel((m + _GL_X[None, :]) * h) * (h * _GL_W[None, :])
        P[1:] = kv @ (1.0 - _GL_X)
        Q[1:] = kv @ _GL_X
    return P, Q


def solve_resolvent_grid(kernel: Kernel, lam: float, grid: Grid) -> ResolventTable:
    """Solve ``R + lam K * R = 1`` with ``R`` piecewise linear between nodes.

    The convolution against each panel is integrated exactly in ``K`` (lag
    weights ``P``, ``Q``) and the diagonal term is implicit. ``f`` then comes
    from ``f = lam K - lam K * f`` evaluated with the panel means of ``f``.
    """
    _check_lambda(lam)
    P, Q = lag_weights(kernel, grid)
    if lam * (P[0] + Q[0]) >= 1.0:
        raise StepTooLargeError(
            f"lambda * int_0^h K = {lam * (P[0] + Q[0]):.3g} >= 1; refine the grid"
        )
    n = grid.n_points
    R = np.empty(n)
    R[0] = 1.0
    diag = 1.0 + lam * P[0]
    for i in range(1, n):
        acc = np.dot(R[:i], Q[i - 1 :: -1])
        if i > 1:
            acc += np.dot(R[1:i], P[i - 1 : 0 : -1])
        R[i] = (1.0 - lam * acc) / diag

    h = grid.step
    W = P + Q  # int over a whole panel at lag m
    fbar = (R[:-1] - R[1:]) / h
    f = np.empty(n)
    t = grid.nodes
    f[0] = math.inf if kernel.singular else lam * float(kernel(0.0))
    kt = kernel(t[1:])
    for i in range(1, n):
        f[i] = lam * kt[i - 1] - lam * np.dot(fbar[:i], W[i - 1 :: -1])
    meta = {"method": "grid", "f2_integral": _maybe_f2(kernel, lam), "tolerances": dict(TOLERANCES)}
    return ResolventTable(kernel, float(lam), grid, R, f, meta)


def closed_form_table(alpha: float, lam: float, grid: Grid) -> ResolventTable:
    """Table for the fractional kernel from ``E_alpha`` and ``E_{alpha,alpha}``."""
    alpha = check_alpha(alpha)
    t = grid.nodes
    R = resolvent_closed(alpha, lam, t)
    f = np.empty_like(t)
    f[1:] = resolvent_density(alpha, lam, t[1:])
    f[0] = lam if alpha == 1.0 else math.inf
    kernel = FractionalKernel(alpha)
    meta = {"method": "closed", "f2_integral": _maybe_f2(kernel, lam), "tolerances": dict(TOLERANCES)}
    return ResolventTable(kernel, float(lam), grid, R, f, meta)


def _maybe_f2(kernel: Kernel, lam: float):
    if isinstance(kernel, FractionalKernel) and kernel.alpha > 0.5:
        return f_squared_integral(kernel.alpha, lam)
    return None


# -------------------------------------------------------------- Wiener-Hopf


def wiener_hopf_solve(g: Sampled, table: ResolventTable) -> Sampled:
    """Solution ``x = g - f_lambda * g`` of ``x + lambda K * x = g``."""
    if not g.grid.matches(table.grid):
        raise GridMismatchError("g and the resolvent table live on different grids")
    conv = convolve_grid(table.f, g)
    return Sampled(g.grid, np.asarray(g.values) - conv.values)


def wiener_hopf_residual(x: Sampled, g: Sampled, table: ResolventTable) -> float:
    """Max-norm of ``x + lambda K * x - g`` on the grid nodes ``t_i``, ``i >= 1``."""
    k = table.kernel.sample(table.grid)
    res = np.asarray(x.values) + table.lam * convolve_grid(k, x).values - np.asarray(g.values)
    return float(np.max(np.abs(res[1:])))


# -------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class ConstantKernelReport:
    is_exponential: bool
    max_log_linearity_residual: float
    rate: float
    error: str | None = None


def diagnose_constant_kernel(table: ResolventTable) -> ConstantKernelReport:
    """Is ``R_lambda`` exactly exponential on the grid?

    A genuinely stationary regime with a nondegenerate diffusion forces
    ``R_lambda(t) = exp(-kappa t)``, which is the constant-kernel case. The
    test is a least-squares line through ``ln R`` and its worst residual.
    """
    t = table.times
    r = table.r_values
    if len(t) < 3:
        return ConstantKernelReport(False, math.nan, math.nan, "at least 3 grid points are needed")
    if np.any(r <= 0):
        return ConstantKernelReport(False, math.nan, math.nan, "R must be positive to take logs")
    y = np.log(r)
    A = np.stack([np.ones_like(t), t], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.max(np.abs(A @ coef - y)))
    return ConstantKernelReport(resid <= LOG_LINEARITY_TOL, resid, float(-coef[1]))


# ----------------------------------------------------- integrals of f_alpha


def _quiet_quad(func, a, b, **kw):
    kw.setdefault("limit", 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(func, a, b, **kw)


def _tail_coeffs(alpha: float):
    """Leading terms of ``f_{alpha,1}(t) ~ a t^(-alpha-1) + b t^(-2 alpha-1)``."""
    a = alpha * sp.rgamma(1.0 - alpha)
    b = -2.0 * alpha * sp.rgamma(1.0 - 2.0 * alpha)
    return a, b


def _f1(alpha, t):
    return float(t ** (alpha - 1.0) * mittag_leffler_alpha_alpha(alpha, -(t**alpha)))


@lru_cache(maxsize=64)
def _f2_unit(alpha: float, t_cut: float = 1e4) -> float:
    head, _ = _quiet_quad(
        lambda t: float(mittag_leffler_alpha_alpha(alpha, -(t**alpha))) ** 2,
        0.0, 1.0, weight="alg", wvar=(2.0 * alpha - 2.0, 0.0), epsabs=1e-13, epsrel=1e-11,
    )
    # [1, t_cut] in log time
    body, _ = _quiet_quad(
        lambda s: _f1(alpha, math.exp(s)) ** 2 * math.exp(s),
        0.0, math.log(t_cut), epsabs=1e-13, epsrel=1e-11,
    )
    a, b = _tail_coeffs(alpha)
    tail = a * a * t_cut ** (-2 * alpha - 1) / (2 * alpha + 1) + 2 * a * b * t_cut ** (
        -3 * alpha - 1
    ) / (3 * alpha + 1)
    return head + body + tail


def f_squared_integral(alpha: float, lam: float) -> float:
    """``int_0^inf f_{alpha,lambda}(t)^2 dt``, finite iff ``alpha > 1/2``.

    Uses ``int f_{alpha,lambda}^2 = lambda^(1/alpha) int f_{alpha,1}^2``.
    """
    alpha = check_alpha(alpha)
    _check_lambda(lam)
    if alpha <= 0.5:
        raise ValueError("f_alpha is square integrable only for alpha > 1/2")
    if alpha == 1.0:
        return lam / 2.0
    return lam ** (1.0 / alpha) * _f2_unit(float(alpha))


@dataclass(frozen=True)
class MassReport:
    finite: float
    tail: float
    cutoff: float
    tail_envelope: float

    @property
    def total(self) -> float:
        return self.finite + self.tail


@lru_cache(maxsize=64)
def _mass_unit(alpha: float, x_cut: float) -> tuple[float, float]:
    s_cut = x_cut ** (1.0 / alpha)
    head, _ = _quiet_quad(
        lambda t: float(mittag_leffler_alpha_alpha(alpha, -(t**alpha))),
        0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=1e-13, epsrel=1e-11,
    )
    body, _ = _quiet_quad(
        lambda s: _f1(alpha, math.exp(s)) * math.exp(s),
        0.0, math.log(s_cut), epsabs=1e-13, epsrel=1e-11,
    )
    return head + body, s_cut


def density_mass(alpha: float, lam: float, x_cut: float = 1000.0) -> MassReport:
    """``int_0^inf f_{alpha,lambda}`` as a quadrature up to ``T`` plus an analytic tail.

    ``T`` solves ``lambda T^alpha = x_cut``. The tail is the two-term
    expansion ``int_T^inf f = sum_k (-1)^(k+1) x_cut^-k / Gamma(1 - alpha k)``.
    ``tail_envelope`` is the cruder bound obtained from the upper envelope of
    the spectral density, reported for comparison.
    """
    alpha = check_alpha(alpha)
    _check_lambda(lam)
    T = (x_cut / lam) ** (1.0 / alpha)
    if alpha == 1.0:
        return MassReport(-math.expm1(-x_cut), math.exp(-x_cut), T, math.exp(-x_cut))
    finite, _ = _mass_unit(float(alpha), float(x_cut))
    tail = sum((-1) ** (k + 1) * sp.rgamma(1.0 - alpha * k) * x_cut ** (-k) for k in (1, 2))
    envelope = (
        math.gamma(alpha + 1.0) / (math.pi * math.sin(math.pi * alpha)) * x_cut ** (-1.0) / alpha
    )
    return MassReport(finite, float(tail), T, envelope)


def envelope_constant(alpha: float) -> float:
    """``C_alpha`` with ``f_{alpha,1}(t) <= C_alpha min(t^(alpha-1), t^(-alpha-1))``.

    ``E_{alpha,alpha}(-x) <= 1/Gamma(alpha)`` gives the small-time part and the
    bound ``u H_alpha(u) <= u^alpha / (pi sin(pi alpha))`` the large-time part.
    """
    alpha = check_alpha(alpha, allow_one=False)
    return max(
        1.0 / math.gamma(alpha),
        math.gamma(alpha + 1.0) / (math.pi * math.sin(math.pi * alpha)),
    )
