"""Euler scheme for the stabilized scaled Volterra equation with quadratic diffusion.

The equation ``X_t = X_0 + int_0^t K(t-s)(mu0 - lambda X_s) ds + int_0^t K(t-s) varsigma(s) sigma(X_s) dW_s``
is simulated in its reduced form

    X_t = mu0/lambda + (X_0 - mu0/lambda) R(t) + (1/lambda) int_0^t f(t-s) varsigma(s) sigma(X_s) dW_s,

discretised on ``t_k = k T/n`` with left-point coefficients:

    X_k = mu0/lambda + (X_0 - mu0/lambda) R(t_k)
          + (1/lambda) sum_{l=1..k} f(t_k - t_{l-1}) varsigma(t_{l-1}) sigma(X_{l-1}) dW_l.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import Grid
from .moments import MomentAccumulator, MomentTrajectory
from .resolvent import ResolventTable, closed_form_table
from .special import alpha_from_hurst, check_alpha
from .stabilizer import StabilizerSeries, compute_coeffs, eval_sigma2, positivity_scan

__all__ = [
    "Gaussian",
    "PointMass",
    "ModelConfig",
    "SchemeConfig",
    "SimulationInputs",
    "EnsembleResult",
    "sigma_x",
    "path_stream",
    "build_inputs",
    "euler_path",
    "simulate_block",
    "simulate_ensemble",
    "scheme_moments",
]


@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise ValueError("variance must be nonnegative")

    def draw(self, rng: np.random.Generator) -> float:
        return self.mean + math.sqrt(self.var) * rng.standard_normal()

    def second_moment_about(self, m: float) -> float:
        return self.var + (self.mean - m) ** 2


@dataclass(frozen=True)
class PointMass:
    x: float

    @property
    def mean(self) -> float:
        return self.x

    def draw(self, rng: np.random.Generator) -> float:
        return self.x

    def second_moment_about(self, m: float) -> float:
        return (self.x - m) ** 2


@dataclass(frozen=True)
class ModelConfig:
    """Parameters of the stabilized model with ``sigma(x)^2 = kappa0 + kappa1 y + kappa2 y^2``, ``y = x - mu0/lambda``.

    ``c = v0 / (kappa0 + v0 kappa2)`` is derived; the default initial law is
    ``N(mu0/lambda, v0)``.
    """

    alpha: float
    lam: float
    mu0: float = 2.0
    kappa0: float = 0.25
    kappa1: float = 0.0
    kappa2: float = 0.384
    v0: float = 0.09
    x0_law: Gaussian | PointMass | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if min(self.kappa0, self.kappa1, self.kappa2) < 0:
            raise ValueError("kappa coefficients must be nonnegative")
        if self.kappa1**2 > 4.0 * self.kappa0 * self.kappa2:
            raise ValueError("kappa1^2 <= 4 kappa0 kappa2 is required (nonnegative radicand)")
        if self.kappa2 == 0.0 and self.kappa1 != 0.0:
            raise ValueError("kappa1 must be 0 when kappa2 is 0")
        if not self.v0 > 0:
            raise ValueError("v0 must be positive")
        if self.kappa0 == 0.0 and self.kappa2 == 0.0:
            pass  # degenerate noiseless model, c undefined but harmless
        elif self.c * self.kappa2 >= 1.0:
            raise ValueError("c kappa2 < 1 is required")
        if self.x0_law is None:
            object.__setattr__(self, "x0_law", Gaussian(self.center, self.v0))

    @classmethod
    def from_hurst(cls, hurst: float, lam: float, **kw) -> "ModelConfig":
        return cls(alpha_from_hurst(hurst), lam, **kw)

    @classmethod
    def fig3(cls, **overrides) -> "ModelConfig":
        """H = 0.4, mu0 = 2, v0 = 0.09, lambda = 1.2, kappa0 = 0.25, kappa2 = 0.384."""
        params = dict(alpha=0.9, lam=1.2, mu0=2.0, kappa0=0.25, kappa1=0.0, kappa2=0.384, v0=0.09)
        params.update(overrides)
        return cls(**params)

    @property
    def center(self) -> float:
        return self.mu0 / self.lam

    @property
    def c(self) -> float:
        denom = self.kappa0 + self.v0 * self.kappa2
        return self.v0 / denom if denom > 0 else math.inf

    @property
    def hurst(self) -> float:
        return self.alpha - 0.5

    def with_law(self, law) -> "ModelConfig":
        return ModelConfig(self.alpha, self.lam, self.mu0, self.kappa0, self.kappa1,
                           self.kappa2, self.v0, law)


@dataclass(frozen=True)
class SchemeConfig:
    T: float
    n_steps: int
    n_paths: int
    seed: int = 0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def step(self) -> float:
        return self.T / self.n_steps

    @property
    def grid(self) -> Grid:
        return Grid.from_horizon(self.T, self.n_steps)


def sigma_x(model: ModelConfig, x):
    """``sqrt(kappa0 + kappa1 y + kappa2 y^2)`` with ``y = x - mu0/lambda``."""
    y = np.asarray(x, dtype=float) - model.center
    rad = model.kappa0 + model.kappa1 * y + model.kappa2 * y * y
    if np.any(rad < -1e-14):
        raise ValueError("negative radicand in sigma(x); check kappa1^2 <= 4 kappa0 kappa2")
    out = np.sqrt(np.maximum(rad, 0.0))
    return out[()] if out.ndim == 0 else out


def path_stream(seed: int, path_index: int) -> np.random.Generator:
    """Independent, order-free substream for one path: Philox keyed by ``(seed, path_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(path_index),))))


@dataclass(frozen=True)
class SimulationInputs:
    """Arrays shared by all paths: ``R(t_k)``, ``f`` at lags ``j h`` and ``varsigma(t_k)``."""

    table: ResolventTable
    stab: StabilizerSeries | None
    r: np.ndarray
    f_lags: np.ndarray  # f_lags[j] = f(j h), j >= 1; entry 0 unused
    varsigma: np.ndarray
    ablated: bool = False


def build_inputs(model: ModelConfig, scheme: SchemeConfig, K: int = 400,
                 stabilizer: bool = True, stab: StabilizerSeries | None = None) -> SimulationInputs:
    """Resolvent table, stabilizer series and node values for a run.

    ``stabilizer=False`` replaces ``varsigma`` by 1 (the unstabilized ablation).
    The positivity guard is applied on ``[0, T]`` before anything is simulated.
    """
    grid = scheme.grid
    table = closed_form_table(model.alpha, model.lam, grid)
    t = grid.nodes
    f_lags = np.array(table.f_values)
    f_lags[0] = math.nan
    if stabilizer:
        if stab is None:
            stab = compute_coeffs(model.alpha, K)
        positivity_scan(stab, model.lam, model.c, scheme.T, scheme.step)
        varsigma = np.sqrt(np.maximum(eval_sigma2(stab, model.lam, model.c, t), 0.0))
    else:
        varsigma = np.ones_like(t)
    for arr in (f_lags, varsigma):
        arr.setflags(write=False)
    return SimulationInputs(table, stab, np.array(table.r_values), f_lags, varsigma, not stabilizer)


def _drive(model: ModelConfig, inputs: SimulationInputs, dW: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Scheme values at all nodes for a block: ``dW`` is (B, n), ``x0`` is (B,)."""
    B, n = dW.shape
    if len(inputs.r) != n + 1:
        raise ValueError("inputs were built for a different number of steps")
    m = model.center
    F = inputs.f_lags
    X = np.empty((B, n + 1))
    X[:, 0] = x0
    xi = np.empty((B, n))  # varsigma(t_{l-1}) sigma(X_{l-1}) dW_l
    inv_lam = 1.0 / model.lam
    for k in range(1, n + 1):
        xi[:, k - 1] = inputs.varsigma[k - 1] * sigma_x(model, X[:, k - 1]) * dW[:, k - 1]
        # lags t_k - t_{l-1} = (k - l + 1) h for l = 1..k run from k h down to h
        X[:, k] = m + (x0 - m) * inputs.r[k] + inv_lam * (xi[:, :k] @ F[k:0:-1])
    return X


def _draw_block(model: ModelConfig, scheme: SchemeConfig, first: int, count: int, law=None):
    law = model.x0_law if law is None else law
    n = scheme.n_steps
    sq = math.sqrt(scheme.step)
    dW = np.empty((count, n))
    x0 = np.empty(count)
    for b in range(count):
        rng = path_stream(scheme.seed, first + b)
        # increments first, then X_0: different initial laws share the same noise
        dW[b] = sq * rng.standard_normal(n)
        x0[b] = law.draw(rng)
    return dW, x0


def simulate_block(model: ModelConfig, scheme: SchemeConfig, inputs: SimulationInputs,
                   first: int, count: int, law=None) -> np.ndarray:
    """Paths ``first .. first + count - 1`` as an array of shape (count, n + 1)."""
    dW, x0 = _draw_block(model, scheme, first, count, law)
    return _drive(model, inputs, dW, x0)


def euler_path(model: ModelConfig, scheme: SchemeConfig, inputs: SimulationInputs,
               path_index: int = 0) -> np.ndarray:
    return simulate_block(model, scheme, inputs, path_index, 1)[0]


@dataclass
class EnsembleResult:
    trajectory: MomentTrajectory
    paths: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def _blocks(n_paths: int, block_size: int):
    return [(s, min(block_size, n_paths - s)) for s in range(0, n_paths, block_size)]


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def simulate_ensemble(model: ModelConfig, scheme: SchemeConfig, inputs: SimulationInputs | None = None,
                      *, keep_paths: bool = False, threads: int | None = None,
                      block_size: int = 1000, law=None) -> EnsembleResult:
    """Simulate ``n_paths`` paths and accumulate per-node moments.

    Blocks of ``block_size`` consecutive path indices are the unit of work and
    are merged in index order, so the output does not depend on ``threads``.
    """
    if inputs is None:
        inputs = build_inputs(model, scheme)
    threads = default_threads() if threads is None else max(1, int(threads))
    blocks = _blocks(scheme.n_paths, block_size)
    acc = MomentAccumulator(scheme.grid.nodes, model.center)
    kept = [] if keep_paths else None

    def work(blk):
        return simulate_block(model, scheme, inputs, blk[0], blk[1], law)

    if threads == 1:
        results = map(work, blocks)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, blocks)
    try:
        for X in results:
            acc.add_block(X)
            if kept is not None:
                kept.append(X)
    finally:
        if threads != 1:
            pool.shutdown()
    paths = np.concatenate(kept, axis=0) if kept is not None else None
    info = {"c": model.c, "ablated": inputs.ablated, "block_size": block_size, "blocks": len(blocks)}
    return EnsembleResult(acc.result(), paths, info)


# -------------------------------------------------------- exact scheme moments


def scheme_moments(model: ModelConfig, inputs: SimulationInputs, step: float, law=None,
                   lag_nodes: np.ndarray | None = None):
    """Exact mean and second moment about ``mu0/lambda`` of the discrete scheme.

    The increments are centered and independent of the past, so with
    ``Y_k = X_k - mu0/lambda``

        E Y_k   = (E X_0 - mu0/lambda) R_k,
        E Y_k^2 = E (X_0 - mu0/lambda)^2 R_k^2
                  + lambda^-2 sum_l f_{k-l+1}^2 varsigma_{l-1}^2 h E sigma^2(X_{l-1}),

    with ``E sigma^2(X) = kappa0 + kappa1 E Y + kappa2 E Y^2``. When
    ``lag_nodes`` is given, also returns ``E Y_j Y_{j+d}`` for the node
    offsets ``d`` in it, for every ``j``.
    """
    law = model.x0_law if law is None else law
    m = model.center
    R = inputs.r
    F = inputs.f_lags
    n = len(R) - 1
    s2 = inputs.varsigma**2
    ey = (law.mean - m) * R
    second0 = law.second_moment_about(m)
    V = np.empty(n + 1)
    V[0] = second0
    w = np.empty(n)  # varsigma^2 h E sigma^2 at node l-1
    for k in range(1, n + 1):
        w[k - 1] = s2[k - 1] * step * (model.kappa0 + model.kappa1 * ey[k - 1] + model.kappa2 * V[k - 1])
        V[k] = second0 * R[k] ** 2 + np.dot(w[:k], F[k:0:-1] ** 2) / model.lam**2
    if lag_nodes is None:
        return ey, V
    cross = {}
    for d in np.atleast_1d(lag_nodes).astype(int):
        out = np.full(n + 1, np.nan)
        for j in range(0, n + 1 - d):
            k = j + d
            acc = second0 * R[j] * R[k]
            if j >= 1:
                acc += np.dot(w[:j], F[j:0:-1] * F[k : k - j : -1]) / model.lam**2
            out[j] = acc
        cross[int(d)] = out
    return ey, V, cross
