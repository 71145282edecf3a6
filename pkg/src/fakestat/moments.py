"""Per-node moment trajectories and their mergeable one-pass accumulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import write_columns

__all__ = ["MomentAccumulator", "MomentTrajectory"]


@dataclass
class _Running:
    """Count, mean and centered sum of squares (Welford/Chan form) per node."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_block(cls, x: np.ndarray) -> "_Running":
        mean = x.mean(axis=0)
        return cls(x.shape[0], mean, ((x - mean) ** 2).sum(axis=0))

    def merge(self, other: "_Running") -> "_Running":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        return _Running(n, mean, m2)


class MomentAccumulator:
    """Accumulates ``Y = X - center`` and ``Y^2`` over blocks of paths.

    Blocks must be merged in a fixed order for bit-reproducible output; the
    ensemble driver merges by block index.
    """

    def __init__(self, times: np.ndarray, center: float):
        self.times = np.asarray(times, dtype=float)
        self.center = float(center)
        self._y: _Running | None = None
        self._y2: _Running | None = None

    def add_block(self, paths: np.ndarray) -> None:
        y = np.asarray(paths, dtype=float) - self.center
        by, by2 = _Running.from_block(y), _Running.from_block(y * y)
        if self._y is None:
            self._y, self._y2 = by, by2
        else:
            self._y, self._y2 = self._y.merge(by), self._y2.merge(by2)

    def result(self) -> "MomentTrajectory":
        if self._y is None:
            raise ValueError("no paths were accumulated")
        n = self._y.n
        dof = max(n - 1, 1)
        var_y = self._y.m2 / dof
        var_y2 = self._y2.m2 / dof
        return MomentTrajectory(
            times=self.times,
            mean=self._y.mean + self.center,
            se_mean=np.sqrt(var_y / n),
            var=self._y2.mean,
            se_var=np.sqrt(var_y2 / n),
            n_paths=n,
            center=self.center,
            var_sample=var_y if n > 1 else np.zeros_like(var_y),
        )


@dataclass
class MomentTrajectory:
    """Moments of the simulated process at the grid nodes.

    ``var`` is the center-based estimator ``mean((X - center)^2)`` with
    ``center = mu0/lambda``; ``var_sample`` is the unbiased sample variance.
    """

    times: np.ndarray
    mean: np.ndarray
    se_mean: np.ndarray
    var: np.ndarray
    se_var: np.ndarray
    n_paths: int
    center: float = 0.0
    var_sample: np.ndarray | None = None

    @property
    def sqrt_var(self) -> np.ndarray:
        return np.sqrt(self.var)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path, header_lines=(), sample_centered: bool = False):
        var = self.var_sample if sample_centered else self.var
        write_columns(
            path,
            {
                "t": self.times,
                "mean": self.mean,
                "se_mean": self.se_mean,
                "var": var,
                "se_var": self.se_var,
                "sqrt_var": np.sqrt(var),
            },
            header_lines,
        )
