"""Convolution kernels, uniform grids and product-integration convolution.

Each kernel is written ``K(t) = t**exponent * regular(t)`` with ``regular``
smooth on ``[0, inf)``. Grid convolutions use that split to integrate the
power-law endpoint exactly.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, special as sp

from .special import check_alpha, log_gamma

__all__ = [
    "Kernel",
    "ConstantKernel",
    "ExponentialKernel",
    "FractionalKernel",
    "ExpFractionalKernel",
    "Grid",
    "Sampled",
    "GridMismatchError",
    "QuadratureError",
    "eval_kernel",
    "convolve_grid",
    "laplace_numeric",
    "kernel_from_dict",
]

class GridMismatchError(ValueError):
    pass


class QuadratureError(RuntimeError):
    """Adaptive quadrature exhausted its panel budget before converging."""


class Kernel:
    """Base class; subclasses set ``exponent`` and implement ``regular``."""

    exponent: float = 0.0

    def regular(self, t):
        raise NotImplementedError

    @property
    def singular(self) -> bool:
        return self.exponent < 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("kernels are defined on t >= 0")
        if self.singular and np.any(t == 0):
            raise ValueError(f"{type(self).__name__} is singular at t = 0")
        with np.errstate(divide="ignore"):
            out = np.where(t > 0, t**self.exponent, 1.0 if self.exponent == 0 else 0.0)
        out = out * self.regular(t)
        return out[()] if out.ndim == 0 else out

    def sample(self, grid: "Grid") -> "Sampled":
        t = grid.nodes
        values = np.empty_like(t)
        values[1:] = self(t[1:])
        values[0] = math.inf if self.singular else float(self(0.0))
        return Sampled(grid, values, exponent=self.exponent)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    level: float = 1.0

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("level must be positive")

    def regular(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.level)

    def to_dict(self):
        return {"variant": "constant", "level": self.level}


@dataclass(frozen=True)
class ExponentialKernel(Kernel):
    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def regular(self, t):
        return np.exp(-self.rho * np.asarray(t, dtype=float))

    def to_dict(self):
        return {"variant": "exponential", "rho": self.rho}


@dataclass(frozen=True)
class FractionalKernel(Kernel):
    """``K_alpha(t) = t**(alpha - 1) / Gamma(alpha)``."""

    alpha: float = 0.75
    exponent: float = field(init=False, repr=False)

    def __post_init__(self):
        check_alpha(self.alpha)
        object.__setattr__(self, "exponent", self.alpha - 1.0)

    @property
    def square_integrable(self) -> bool:
        return self.alpha > 0.5

    def regular(self, t):
        return np.full_like(np.asarray(t, dtype=float), math.exp(-log_gamma(self.alpha)))

    def to_dict(self):
        return {"variant": "fractional", "alpha": self.alpha}


@dataclass(frozen=True)
class ExpFractionalKernel(Kernel):
    """``K_{alpha,rho}(t) = exp(-rho t) t**(alpha - 1) / Gamma(alpha)``."""

    alpha: float = 0.75
    rho: float = 1.0
    exponent: float = field(init=False, repr=False)

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        object.__setattr__(self, "exponent", self.alpha - 1.0)

    @property
    def square_integrable(self) -> bool:
        return self.alpha > 0.5

    def regular(self, t):
        return np.exp(-self.rho * np.asarray(t, dtype=float) - log_gamma(self.alpha))

    def to_dict(self):
        return {"variant": "exp_fractional", "alpha": self.alpha, "rho": self.rho}


def eval_kernel(spec: Kernel, t):
    return spec(t)


_VARIANTS = {
    "constant": ConstantKernel,
    "exponential": ExponentialKernel,
    "fractional": FractionalKernel,
    "exp_fractional": ExpFractionalKernel,
}


def kernel_from_dict(data: dict) -> Kernel:
    """Inverse of ``Kernel.to_dict``."""
    data = dict(data)
    try:
        cls = _VARIANTS[data.pop("variant")]
    except KeyError as exc:
        raise ValueError(f"unknown kernel variant in {data!r}") from exc
    return cls(**data)


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_i = i * step``, ``i = 0 .. n_points - 1``."""

    step: float
    n_points: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError("a grid needs at least two points")

    @classmethod
    def from_horizon(cls, T: float, n_steps: int) -> "Grid":
        return cls(T / n_steps, int(n_steps) + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.n_points)

    @property
    def horizon(self) -> float:
        return self.step * (self.n_points - 1)

    def matches(self, other: "Grid") -> bool:
        return self.n_points == other.n_points and math.isclose(
            self.step, other.step, rel_tol=1e-12
        )


@dataclass
class Sampled:
    """Function samples on a grid.

    ``exponent`` declares power-law behaviour ``t**exponent`` at the origin;
    when it is negative, ``values[0]`` is ignored.
    """

    grid: Grid
    values: np.ndarray
    exponent: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise GridMismatchError("sample count does not match the grid")
        if self.exponent <= -1.0:
            raise ValueError("only integrable singularities (exponent > -1) are supported")
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, func: Callable, grid: Grid, exponent: float = 0.0) -> "Sampled":
        t = grid.nodes
        values = np.empty_like(t)
        values[1:] = func(t[1:])
        values[0] = math.inf if exponent < 0 else func(np.array([0.0]))[0]
        return cls(grid, values, exponent)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def singular_at_zero(self) -> bool:
        return self.exponent < 0.0

    def regular_part(self) -> np.ndarray:
        """Samples of ``values / t**exponent``; the origin value is extrapolated."""
        if self.exponent == 0.0:
            return np.array(self.values)
        t = self.grid.nodes
        phi = np.empty_like(t)
        phi[1:] = self.values[1:] / t[1:] ** self.exponent
        phi[0] = 2.0 * phi[1] - phi[2] if len(t) > 2 else phi[1]
        return phi

    def to_csv(self, path, header_lines=()):
        write_columns(path, {"t": self.times, "value": self.values}, header_lines)


def write_columns(path, columns: dict, header_lines=()):
    """Write equal-length columns as CSV with 17 significant digits."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    with path.open("w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def read_columns(path) -> dict:
    with Path(path).open() as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    names = next(reader)
    body = [list(map(float, r)) for r in reader if r]
    arr = np.array(body, dtype=float).reshape(len(body), len(names))
    return {n: arr[:, i] for i, n in enumerate(names)}


_TINY = 1e-200
_GL01_X = 0.5 * (np.polynomial.legendre.leggauss(6)[0] + 1.0)
_GL01_W = 0.5 * np.polynomial.legendre.leggauss(6)[1]


def _jacobi01(q: int, gam: float):
    """Nodes/weights on [0, 1] for the weight ``u**gam``."""
    x, w = sp.roots_jacobi(q, 0.0, gam)
    return 0.5 * (x + 1.0), w / 2.0 ** (gam + 1.0)


class _Factor:
    """Precomputed pieces of ``t**exponent * phi(t)`` with ``phi`` linear per panel."""

    def __init__(self, s: Sampled):
        self.gam = s.exponent
        self.phi = s.regular_part()
        self.h = s.grid.step
        n = s.grid.n_points
        self.xj, self.wj = _jacobi01(6, self.gam)
        # owner role: weighted samples on panels m >= 1 and on the first panel
        m = np.arange(1, n - 1)[:, None]
        x = _GL01_X[None, :]
        self.own = np.zeros((n - 1, len(_GL01_X)))
        if n > 2:
            self.own[1:] = (
                ((m + x) * self.h) ** self.gam * self.h * _GL01_W[None, :]
                * (self.phi[1:-1, None] * (1 - x) + self.phi[2:, None] * x)
            )
        self.own0 = (
            self.h ** (self.gam + 1.0) * self.wj
            * (self.phi[0] * (1 - self.xj) + self.phi[1] * self.xj)
        )

    def other(self, k: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Values at ``s = (k - x) h`` for integer ``k >= 1`` and fractions ``x``."""
        k = k[:, None]
        lin = self.phi[k - 1] * x + self.phi[k] * (1 - x)
        if self.gam == 0.0:
            return lin
        return ((k - x) * self.h) ** self.gam * lin


def _half_sum(owner: _Factor, other: _Factor, i: int, m_hi: int) -> float:
    """Owner-lag panels ``m < m_hi`` of ``int owner(tau) other(t_i - tau) dtau``."""
    if m_hi <= 0:
        return 0.0
    total = float(np.dot(owner.own0, other.other(np.array([i]), owner.xj[None, :])[0]))
    if m_hi > 1:
        m = np.arange(1, m_hi)
        vals = other.other(i - m, _GL01_X[None, :])
        total += float(np.sum(owner.own[1:m_hi] * vals))
    return total


def _first_panel_both_singular(f: Sampled, g: Sampled) -> float:
    """``int_0^h tau^a phi_f(tau) (h - tau)^b phi_g(h - tau) dtau`` via Gauss-Jacobi."""
    h = f.grid.step
    a, b = f.exponent, g.exponent
    x, w = sp.roots_jacobi(6, b, a)  # weight (1-x)^b (1+x)^a on [-1, 1]
    tau = 0.5 * h * (x + 1.0)
    pf, pg = f.regular_part(), g.regular_part()
    phi_f = pf[0] + (pf[1] - pf[0]) * tau / h
    phi_g = pg[0] + (pg[1] - pg[0]) * (h - tau) / h
    return float(np.sum(w * phi_f * phi_g) * (0.5 * h) ** (a + b + 1.0))


def convolve_grid(f: Sampled, g: Sampled) -> Sampled:
    """Product-integration approximation of ``(f * g)(t_i) = int_0^t_i f(t_i - s) g(s) ds``.

    Each factor is ``t**exponent`` times a regular part that is linear between
    nodes. The integral at ``t_i`` is split at ``t_{i//2}`` so that each half
    has a single singular endpoint; that panel uses Gauss-Jacobi nodes for the
    power weight and the remaining panels 6-point Gauss-Legendre.
    """
    if not f.grid.matches(g.grid):
        raise GridMismatchError("convolve_grid needs both operands on the same grid")
    n = f.grid.n_points
    ff, gg = _Factor(f), _Factor(g)
    out = np.zeros(n)
    for i in range(1, n):
        if i == 1:
            if f.singular_at_zero and g.singular_at_zero:
                out[1] = _first_panel_both_singular(f, g)
            elif g.singular_at_zero:
                out[1] = _half_sum(gg, ff, 1, 1)
            else:
                out[1] = _half_sum(ff, gg, 1, 1)
            continue
        j = i // 2
        out[i] = _half_sum(ff, gg, i, j) + _half_sum(gg, ff, i, i - j)
    return Sampled(f.grid, out, exponent=0.0)


def laplace_numeric(f: Callable[[float], float], t: float, singularity_exponent: float = 0.0,
                    tol: float = 1e-9, upper: float = math.inf) -> float:
    """``int_0^upper exp(-t u) f(u) du`` for ``t > 0`` (the Laplace transform when ``upper = inf``).

    ``singularity_exponent`` declares ``f(u) ~ u**gamma`` near zero; that part
    is integrated with an algebraic weight on ``(0, 1]``.
    """
    if not t > 0:
        raise ValueError("the Laplace transform is evaluated for t > 0 only")
    gam = float(singularity_exponent)
    if gam <= -1.0:
        raise ValueError("singularity exponent must exceed -1")
    if not upper > 1.0:
        raise ValueError("upper limit must exceed 1")
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if gam != 0.0:
                # the algebraic-weight rule samples the endpoint u = 0 itself
                head, e1 = integrate.quad(
                    lambda u: math.exp(-t * u) * f(max(u, _TINY)) * max(u, _TINY) ** (-gam),
                    0.0, 1.0, weight="alg", wvar=(gam, 0.0),
                    epsabs=0.1 * tol, epsrel=1e-11, limit=400,
                )
            else:
                head, e1 = integrate.quad(
                    lambda u: math.exp(-t * u) * f(u), 0.0, 1.0,
                    epsabs=0.1 * tol, epsrel=1e-11, limit=400,
                )
            tail, e2 = integrate.quad(
                lambda u: math.exp(-t * u) * f(u), 1.0, upper,
                epsabs=0.1 * tol, epsrel=1e-11, limit=400,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"Laplace transform at t={t:g} did not converge: {exc}") from exc
    if e1 + e2 > tol:
        raise QuadratureError(f"Laplace transform at t={t:g}: error estimate {e1 + e2:.2e}")
    return head + tail
