"""Post-processing of simulated ensembles: flatness, confluence and covariances."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .moments import MomentAccumulator, MomentTrajectory
from .resolvent import ResolventTable, _f2_unit, _tail_coeffs, resolvent_density
from .simulate import ModelConfig, SchemeConfig, SimulationInputs, build_inputs, simulate_block, _blocks
from .special import check_alpha

__all__ = [
    "MomentTrajectory",
    "MomentAccumulator",
    "FlatnessReport",
    "ConfluenceResult",
    "CovarianceEstimate",
    "InsufficientPathsError",
    "flatness_report",
    "discretization_allowance",
    "confluence_experiment",
    "covariance_estimate",
    "limit_covariance",
    "moment_bound",
]

Z_THRESHOLD = 4.0


class InsufficientPathsError(ValueError):
    pass


@dataclass(frozen=True)
class FlatnessReport:
    max_abs_z: float
    passed: bool
    worst_time: float
    allowance: float
    z: np.ndarray

    @property
    def pass_(self) -> bool:
        return self.passed


def discretization_allowance(step: float, alpha: float, v0: float) -> float:
    """``2 step^min(alpha, 1/2) v0``, the tolerated Euler bias of the variance."""
    return 2.0 * step ** min(alpha, 0.5) * v0


def flatness_report(traj: MomentTrajectory, v0: float, alpha: float,
                    allowance: float | None = None, threshold: float = Z_THRESHOLD) -> FlatnessReport:
    """Is the variance trajectory flat at ``v0``?

    ``z_k = max(0, |var_k - v0| - allowance) / se_var_k`` over nodes with
    ``t_k >= 2 step``; the trajectory passes iff ``max z_k <= threshold``.
    """
    if traj.n_paths < 100:
        raise InsufficientPathsError("flatness needs at least 100 paths")
    step = traj.step
    if allowance is None:
        allowance = discretization_allowance(step, alpha, v0)
    sel = traj.times >= 2.0 * step - 1e-12
    excess = np.maximum(0.0, np.abs(traj.var[sel] - v0) - allowance)
    se = traj.se_var[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(excess > 0, excess / se, 0.0)
    i = int(np.argmax(z))
    zmax = float(z[i])
    return FlatnessReport(zmax, zmax <= threshold, float(traj.times[sel][i]), float(allowance), z)


def moment_bound(model: ModelConfig) -> float:
    """Uniform bound on ``||X_t - mu0/lambda||_2`` for the stabilized model.

    ``max(sqrt(c) sigma(mu0/lambda) / (rho^(1/4) (1 - sqrt(rho))), ||X_0 - mu0/lambda||_2)``
    with ``rho = c kappa2``; without a quadratic term the first entry is ``sqrt(c kappa0)``.
    """
    rho = model.c * model.kappa2
    s0 = math.sqrt(model.kappa0)
    x0_l2 = math.sqrt(model.x0_law.second_moment_about(model.center))
    if rho == 0.0:
        return max(math.sqrt(model.c) * s0, x0_l2)
    return max(math.sqrt(model.c) * s0 / (rho**0.25 * (1.0 - math.sqrt(rho))), x0_l2)


# ---------------------------------------------------------------- confluence


@dataclass(frozen=True)
class ConfluenceResult:
    times: np.ndarray
    delta2: np.ndarray
    se_delta2: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.delta2 / self.delta2[0]


def confluence_experiment(model: ModelConfig, scheme: SchemeConfig, inputs: SimulationInputs | None,
                          law_a, law_b, block_size: int = 1000) -> ConfluenceResult:
    """``delta^2_t = mean((X^a_t - X^b_t)^2)`` for two initial laws driven by the same noise.

    Path ``m`` of both runs uses the same substream, whose Brownian increments
    are drawn before the initial value.
    """
    if inputs is None:
        inputs = build_inputs(model, scheme)
    acc = MomentAccumulator(scheme.grid.nodes, 0.0)
    for first, count in _blocks(scheme.n_paths, block_size):
        xa = simulate_block(model, scheme, inputs, first, count, law_a)
        xb = simulate_block(model, scheme, inputs, first, count, law_b)
        acc.add_block(xa - xb)
    traj = acc.result()
    if not traj.var[0] > 0:
        raise ValueError("the two initial laws coincide (delta_0 = 0); nothing to contract")
    return ConfluenceResult(traj.times, traj.var, traj.se_var)


# ---------------------------------------------------------------- covariance


@dataclass(frozen=True)
class CovarianceEstimate:
    t_base: float
    offsets: np.ndarray
    nodes: np.ndarray
    cov: np.ndarray
    se: np.ndarray


def covariance_estimate(paths: np.ndarray, times: np.ndarray, t_base: float, offsets,
                        min_paths: int = 1000) -> CovarianceEstimate:
    """Sample covariances ``Cov(X_{t_base}, X_{t_base + d})`` at the nearest grid nodes.

    The standard error is that of the mean of centered cross products.
    """
    paths = np.asarray(paths, dtype=float)
    times = np.asarray(times, dtype=float)
    M = paths.shape[0]
    if M < min_paths:
        raise InsufficientPathsError(f"covariance estimates need at least {min_paths} paths, got {M}")
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    if t_base + offsets.max() > times[-1] + 1e-9:
        raise ValueError("t_base + max offset exceeds the simulated horizon")
    i0 = int(np.argmin(np.abs(times - t_base)))
    nodes = np.array([int(np.argmin(np.abs(times - (t_base + d)))) for d in offsets])
    a = paths[:, i0] - paths[:, i0].mean()
    cov = np.empty(len(nodes))
    se = np.empty(len(nodes))
    for j, k in enumerate(nodes):
        b = paths[:, k] - paths[:, k].mean()
        prod = a * b
        cov[j] = prod.sum() / (M - 1)
        se[j] = prod.std(ddof=1) / math.sqrt(M)
    return CovarianceEstimate(float(times[i0]), offsets, nodes, cov, se)


def _quiet_quad(func, a, b, **kw):
    kw.setdefault("limit", 400)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(func, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            raise ArithmeticError(f"covariance quadrature did not converge: {exc}") from exc


@lru_cache(maxsize=256)
def _lagged_overlap_unit(alpha: float, d: float, t_cut: float = 1e4) -> float:
    """``int_0^inf f_{alpha,1}(d + u) f_{alpha,1}(u) du``."""

    def f1(t):
        return float(resolvent_density(alpha, 1.0, t))

    g = alpha - 1.0
    if g != 0.0:
        head, _ = _quiet_quad(lambda u: f1(d + u) * f1(max(u, 1e-200)) * max(u, 1e-200) ** (-g),
                              0.0, 1.0, weight="alg", wvar=(g, 0.0), epsabs=1e-14, epsrel=1e-11)
    else:
        head, _ = _quiet_quad(lambda u: f1(d + u) * f1(u) if u > 0 else f1(d), 0.0, 1.0,
                              epsabs=1e-14, epsrel=1e-11)
    body, _ = _quiet_quad(lambda s: f1(d + math.exp(s)) * f1(math.exp(s)) * math.exp(s),
                          0.0, math.log(t_cut), epsabs=1e-14, epsrel=1e-11)
    tail = 0.0
    if alpha < 1.0:
        a, _ = _tail_coeffs(alpha)
        tail = a * a * t_cut ** (-2 * alpha - 1) / (2 * alpha + 1)
    return head + body + tail


def limit_covariance(alpha: float, lam: float, v0: float, delta: float,
                     table: ResolventTable | None = None) -> float:
    """``C(delta) = v0 int_0^inf f(delta + u) f(u) du / int_0^inf f^2``, the long-run covariance.

    Computed on ``f_{alpha,1}`` via ``f_{alpha,lambda}(t) = lambda^(1/alpha) f_{alpha,1}(lambda^(1/alpha) t)``;
    ``delta = 0`` returns ``v0`` exactly.
    """
    alpha = check_alpha(alpha)
    if alpha <= 0.5:
        raise ValueError("the long-run covariance needs alpha > 1/2")
    delta = abs(float(delta))
    if delta == 0.0:
        return float(v0)
    d = lam ** (1.0 / alpha) * delta
    if alpha == 1.0:
        norm = 0.5
    elif table is not None and table.metadata.get("f2_integral") is not None:
        norm = table.metadata["f2_integral"] / lam ** (1.0 / alpha)
    else:
        norm = _f2_unit(alpha)
    return float(v0) * _lagged_overlap_unit(alpha, d) / norm
