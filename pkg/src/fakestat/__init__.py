"""Numerical toolkit for fake stationary scaled Volterra processes.

Mittag-Leffler functions and fractional-kernel resolvents, the stabilizer that
keeps the variance of a mean-reverting rough Volterra process constant, an
Euler scheme for the stabilized process and the statistics used to check it.
"""

__version__ = "0.1.0"

from .special import alpha_from_hurst, beta, h_alpha, log_gamma, mittag_leffler, mittag_leffler_alpha_alpha
from .kernels import ConstantKernel, ExpFractionalKernel, ExponentialKernel, FractionalKernel, Grid, Sampled
from .resolvent import ResolventTable, closed_form_table, resolvent_closed, resolvent_density, solve_resolvent_grid
from .stabilizer import StabilizerSeries, compute_coeffs, eval_sigma2
from .simulate import Gaussian, ModelConfig, PointMass, SchemeConfig, build_inputs, simulate_ensemble
from .analysis import MomentTrajectory, flatness_report, limit_covariance

__all__ = [
    "alpha_from_hurst", "beta", "h_alpha", "log_gamma", "mittag_leffler", "mittag_leffler_alpha_alpha",
    "ConstantKernel", "ExpFractionalKernel", "ExponentialKernel", "FractionalKernel", "Grid", "Sampled",
    "ResolventTable", "closed_form_table", "resolvent_closed", "resolvent_density", "solve_resolvent_grid",
    "StabilizerSeries", "compute_coeffs", "eval_sigma2",
    "Gaussian", "ModelConfig", "PointMass", "SchemeConfig", "build_inputs", "simulate_ensemble",
    "MomentTrajectory", "flatness_report", "limit_covariance",
]
