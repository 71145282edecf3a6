"""Command-line driver: ``fakestat {stabilizer,resolvent,simulate,covariance,confluence,validate}``.

Parameters come from presets (``--fig1/--fig2/--fig3``), then an optional
``--config`` file of ``key=value`` lines, then explicit flags, in increasing
priority. Every CSV starts with ``#`` provenance lines.

Exit codes: 0 success, 1 a reported check failed, 2 usage error,
3 a numerical guard refused the configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import confluence_experiment, covariance_estimate, flatness_report, limit_covariance
from .kernels import (
    ConstantKernel,
    ExpFractionalKernel,
    ExponentialKernel,
    FractionalKernel,
    Grid,
    QuadratureError,
    write_columns,
)
from .resolvent import StepTooLargeError, closed_form_table, solve_resolvent_grid
from .simulate import ModelConfig, PointMass, SchemeConfig, build_inputs, simulate_ensemble
from .special import alpha_from_hurst
from .stabilizer import (
    NegativeStabilizerError,
    TruncationError,
    compute_coeffs,
    eval_sigma2,
    positivity_scan,
    verify_growth_bound,
    GrowthBoundError,
)

PRESETS = {
    "fig1": {"hurst": 0.4, "lambda": 0.2, "c": 0.3, "T": 10.0, "steps": 1000},
    "fig2": {"hurst": 0.1, "lambda": 0.2, "c": 0.3, "T": 10.0, "steps": 1000},
    "fig3": {"hurst": 0.4, "mu0": 2.0, "v0": 0.09, "lambda": 1.2, "kappa0": 0.25, "kappa1": 0.0,
             "kappa2": 0.384, "T": 1.0, "steps": 1000, "paths": 100_000},
}
DESK = {"steps": 500, "paths": 20_000}

DEFAULTS = {
    "alpha": 0.9, "lambda": 1.2, "mu0": 2.0, "v0": 0.09, "kappa0": 0.25, "kappa1": 0.0,
    "kappa2": 0.384, "T": 1.0, "steps": 500, "paths": 1000, "seed": 0, "K": 400,
}

_GRID_KEYS = ("alpha", "lambda", "T", "steps", "K")
_MODEL_KEYS = _GRID_KEYS + ("mu0", "v0", "kappa0", "kappa1", "kappa2", "paths", "seed")
COMMAND_KEYS = {
    "stabilizer": _GRID_KEYS,
    "resolvent": _GRID_KEYS,
    "simulate": _MODEL_KEYS,
    "covariance": _MODEL_KEYS,
    "confluence": _MODEL_KEYS,
}

FLOAT_KEYS = {"alpha", "hurst", "lambda", "c", "mu0", "v0", "kappa0", "kappa1", "kappa2", "T",
              "rho", "t_base", "shift"}
INT_KEYS = {"steps", "paths", "seed", "threads", "K", "block_size"}


class GuardError(RuntimeError):
    pass


# ------------------------------------------------------------------- config


def read_config_file(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lam":
            key = "lambda"
        out[key] = _coerce(key, value)
    return out


def _coerce(key, value):
    if key in FLOAT_KEYS:
        return float(value)
    if key in INT_KEYS:
        return int(value)
    return value


def resolve(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    for name in ("fig1", "fig2", "fig3"):
        if getattr(args, name, False):
            cfg.update(PRESETS[name])
    if getattr(args, "desk", False):
        cfg.update(DESK)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config", "fig1", "fig2", "fig3", "desk", "func") or value is None:
            continue
        cfg[key] = value
    # a flag for one of alpha/hurst overrides the other from lower layers
    if args.alpha is not None:
        cfg.pop("hurst", None)
    elif getattr(args, "hurst", None) is not None:
        cfg.pop("alpha", None)
    if "hurst" in cfg and "alpha" not in cfg:
        cfg["alpha"] = alpha_from_hurst(cfg["hurst"])
    cfg.pop("hurst", None)
    for key in COMMAND_KEYS.get(args.command, tuple(DEFAULTS)):
        cfg.setdefault(key, DEFAULTS[key])
    return cfg


def provenance(command: str, cfg: dict, deterministic: bool) -> list[str]:
    lines = [f"fakestat {__version__} {command}"]
    lines += [f"{k} = {cfg[k]}" for k in sorted(cfg) if k not in ("out", "gnuplot_script", "deterministic", "threads")]
    if not deterministic:
        lines.append(f"created {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
    return lines


def _model(cfg: dict, law=None) -> ModelConfig:
    return ModelConfig(cfg["alpha"], cfg["lambda"], cfg["mu0"], cfg["kappa0"], cfg["kappa1"],
                       cfg["kappa2"], cfg["v0"], law)


def _scheme(cfg: dict) -> SchemeConfig:
    return SchemeConfig(cfg["T"], cfg["steps"], cfg["paths"], cfg["seed"])


def _out(cfg: dict, default: str) -> Path:
    return Path(cfg.get("out") or default)


def _emit_gnuplot(cfg: dict, csv_path: Path, x: str, ys: list[str], columns: list[str]):
    target = cfg.get("gnuplot_script")
    if not target:
        return
    idx = {name: i + 1 for i, name in enumerate(columns)}
    plots = ", ".join(
        f"'{csv_path}' every ::1 using {idx[x]}:{idx[y]} with lines title '{y}'" for y in ys
    )
    Path(target).write_text(
        "set datafile separator ','\nset datafile commentschars '#'\n"
        f"set xlabel '{x}'\nplot {plots}\n"
    )


# ----------------------------------------------------------------- commands


def cmd_stabilizer(cfg: dict, echo) -> int:
    cfg.setdefault("c", 0.3)
    alpha, lam, c, T = cfg["alpha"], cfg["lambda"], cfg["c"], cfg["T"]
    series = compute_coeffs(alpha, cfg["K"])
    step = T / cfg["steps"]
    positivity_scan(series, lam, c, T, step)
    t = Grid.from_horizon(T, cfg["steps"]).nodes
    s2 = eval_sigma2(series, lam, c, t)
    out = _out(cfg, "stabilizer.csv")
    cols = {"t": t, "sigma": np.sqrt(np.maximum(s2, 0.0)), "sigma2": s2}
    write_columns(out, cols, provenance("stabilizer", cfg, cfg["deterministic"]))
    _emit_gnuplot(cfg, out, "t", ["sigma"], list(cols))
    echo(f"c_0 = {series.c0:.12g}; min sigma^2 on [0,{T:g}] = {s2.min():.6g}; wrote {out}")
    if cfg.get("coeffs_out"):
        series.to_csv(cfg["coeffs_out"], provenance("stabilizer-coefficients", cfg, cfg["deterministic"]))
    if alpha < 1.0 and series.trunc_order >= 20:
        try:
            cert = verify_growth_bound(series)
            echo(f"growth bound certificate: K = {cert.K_const:.4g}, A = {cert.A_const:.4g}")
        except GrowthBoundError as exc:
            echo(f"growth bound: {exc}")
            return 1
    return 0


def cmd_resolvent(cfg: dict, echo) -> int:
    kind = cfg.get("kernel") or "fractional"
    alpha, lam = cfg["alpha"], cfg["lambda"]
    grid = Grid.from_horizon(cfg["T"], cfg["steps"])
    rho = cfg.get("rho") or 1.0
    kernels = {
        "fractional": lambda: FractionalKernel(alpha),
        "constant": lambda: ConstantKernel(1.0),
        "exponential": lambda: ExponentialKernel(rho),
        "exp_fractional": lambda: ExpFractionalKernel(alpha, rho),
    }
    kernel = kernels[kind]()
    if cfg.get("method") == "closed":
        if kind != "fractional":
            raise GuardError("closed form is only available for the fractional kernel")
        table = closed_form_table(alpha, lam, grid)
    else:
        table = solve_resolvent_grid(kernel, lam, grid)
    out = _out(cfg, "resolvent.csv")
    sidecar = table.save(out, provenance("resolvent", cfg, cfg["deterministic"]))
    _emit_gnuplot(cfg, out, "t", ["R", "f"], ["t", "R", "f"])
    echo(f"R({cfg['T']:g}) = {table.r_values[-1]:.10g}; wrote {out} and {sidecar}")
    return 0


def cmd_simulate(cfg: dict, echo) -> int:
    model = _model(cfg)
    scheme = _scheme(cfg)
    echo(f"derived c = v0/(kappa0 + v0 kappa2) = {model.c:.6f}")
    inputs = build_inputs(model, scheme, cfg["K"], stabilizer=not cfg.get("no_stabilizer"))
    res = simulate_ensemble(model, scheme, inputs, keep_paths=bool(cfg.get("dump_paths")),
                            threads=cfg.get("threads"))
    traj = res.trajectory
    out = _out(cfg, "moments.csv")
    header = provenance("simulate", cfg, cfg["deterministic"])
    traj.to_csv(out, header, sample_centered=bool(cfg.get("sample_centered")))
    _emit_gnuplot(cfg, out, "t", ["sqrt_var"], ["t", "mean", "se_mean", "var", "se_var", "sqrt_var"])
    if cfg.get("dump_paths"):
        M, n1 = res.paths.shape
        write_columns(cfg["dump_paths"], {
            "path_id": np.repeat(np.arange(M), n1),
            "t": np.tile(traj.times, M),
            "x": res.paths.ravel(),
        }, header)
    status = 0
    if traj.n_paths >= 100:
        rep = flatness_report(traj, model.v0, model.alpha)
        echo(f"flatness: max z = {rep.max_abs_z:.3f} ({'pass' if rep.passed else 'fail'}), "
             f"allowance {rep.allowance:.3g}")
        if cfg.get("check_flatness") and not rep.passed:
            status = 1
    echo(f"wrote {out}")
    return status


def cmd_covariance(cfg: dict, echo) -> int:
    model = _model(cfg)
    scheme = _scheme(cfg)
    t_base = cfg.get("t_base") or 8.0
    deltas = np.array([float(x) for x in str(cfg.get("deltas") or "0,0.25,0.5,1").split(",")])
    if scheme.n_paths < 1000:
        raise GuardError("covariance estimates need --paths >= 1000")
    res = simulate_ensemble(model, scheme, build_inputs(model, scheme, cfg["K"]), keep_paths=True,
                            threads=cfg.get("threads"))
    est = covariance_estimate(res.paths, res.trajectory.times, t_base, deltas)
    limits = np.array([limit_covariance(model.alpha, model.lam, model.v0, d) for d in deltas])
    z = (est.cov - limits) / est.se
    out = _out(cfg, "covariance.csv")
    cols = {"delta": deltas, "mc_cov": est.cov, "se": est.se, "limit_cov": limits, "z": z}
    write_columns(out, cols, provenance("covariance", cfg, cfg["deterministic"]))
    _emit_gnuplot(cfg, out, "delta", ["mc_cov", "limit_cov"], list(cols))
    for d, m, s, lim, zz in zip(deltas, est.cov, est.se, limits, z):
        echo(f"delta={d:g}: MC {m:.6f} +- {s:.6f}, limit {lim:.6f}, z = {zz:+.2f}")
    echo(f"wrote {out}")
    return 0 if np.all(np.abs(z[deltas > 0]) <= 3.0) else 1


def cmd_confluence(cfg: dict, echo) -> int:
    model = _model(cfg)
    scheme = _scheme(cfg)
    shift = cfg.get("shift") or 1.0
    res = confluence_experiment(model, scheme, build_inputs(model, scheme, cfg["K"]),
                                PointMass(model.center + shift), PointMass(model.center - shift))
    out = _out(cfg, "confluence.csv")
    cols = {"t": res.times, "delta2": res.delta2, "se_delta2": res.se_delta2, "ratio": res.ratio}
    write_columns(out, cols, provenance("confluence", cfg, cfg["deterministic"]))
    _emit_gnuplot(cfg, out, "t", ["ratio"], list(cols))
    ok = bool(np.all(res.ratio <= 1.0))
    echo(f"max ratio {res.ratio.max():.4f}, final ratio {res.ratio[-1]:.4f}; wrote {out}")
    return 0 if ok else 1


def cmd_validate(cfg: dict, echo) -> int:
    from .validation import SUITES, run_checks

    results = run_checks(SUITES[cfg.get("suite") or "all"], echo)
    failed = [r for r in results if not r.passed]
    echo(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {
    "stabilizer": cmd_stabilizer,
    "resolvent": cmd_resolvent,
    "simulate": cmd_simulate,
    "covariance": cmd_covariance,
    "confluence": cmd_confluence,
    "validate": cmd_validate,
}


# ------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, model: bool, scheme: bool):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, help="roughness index in (1/2, 1]")
    g.add_argument("--hurst", type=float, help="Hurst exponent H = alpha - 1/2")
    p.add_argument("--lambda", dest="lambda", type=float, help="mean-reversion intensity")
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--steps", type=int, help="number of time steps on [0, T]")
    p.add_argument("--K", type=int, help="number of stabilizer coefficients (default 400)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="omit the timestamp from provenance headers")
    p.add_argument("--gnuplot-script", dest="gnuplot_script", help="also write a gnuplot script")
    for fig in ("fig1", "fig2", "fig3"):
        p.add_argument(f"--{fig}", action="store_true", help=f"{fig} preset")
    p.add_argument("--desk", action="store_true", help="desk-scale preset (n=500, M=20000)")
    if model:
        p.add_argument("--mu0", type=float)
        p.add_argument("--v0", type=float, help="target variance")
        p.add_argument("--kappa0", type=float)
        p.add_argument("--kappa1", type=float)
        p.add_argument("--kappa2", type=float)
    if scheme:
        p.add_argument("--paths", type=int, help="Monte Carlo size M")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fakestat", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"fakestat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stabilizer", help="curve t -> varsigma(t)")
    _common(p, model=False, scheme=False)
    p.add_argument("--c", type=float, help="stabilizer constant c")
    p.add_argument("--coeffs-out", dest="coeffs_out", help="also write (k, c_k)")

    p = sub.add_parser("resolvent", help="resolvent table (t, R, f)")
    _common(p, model=False, scheme=False)
    p.add_argument("--kernel", choices=["fractional", "constant", "exponential", "exp_fractional"])
    p.add_argument("--rho", type=float)
    p.add_argument("--method", choices=["grid", "closed"])

    p = sub.add_parser("simulate", help="variance trajectory of the Euler scheme")
    _common(p, model=True, scheme=True)
    p.add_argument("--no-stabilizer", dest="no_stabilizer", action="store_true", default=None,
                   help="ablation: replace varsigma by 1")
    p.add_argument("--dump-paths", dest="dump_paths", help="CSV of all paths (path_id, t, x)")
    p.add_argument("--sample-centered", dest="sample_centered", action="store_true", default=None)
    p.add_argument("--check-flatness", dest="check_flatness", action="store_true", default=None,
                   help="exit 1 if the flatness test fails")

    p = sub.add_parser("covariance", help="Monte Carlo covariance vs the long-run limit")
    _common(p, model=True, scheme=True)
    p.add_argument("--t-base", dest="t_base", type=float)
    p.add_argument("--deltas", help="comma-separated offsets")

    p = sub.add_parser("confluence", help="L2 contraction of two coupled solutions")
    _common(p, model=True, scheme=True)
    p.add_argument("--shift", type=float, help="initial points mu0/lambda +- shift")

    p = sub.add_parser("validate", help="run named checks")
    p.add_argument("suite", nargs="?", default="all",
                   choices=["special", "resolvent", "stabilizer", "simulate", "all"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    echo = print
    if args.command == "validate":
        return cmd_validate({"suite": args.suite}, echo)
    try:
        cfg = resolve(args)
        cfg["deterministic"] = bool(cfg.get("deterministic"))
        return COMMANDS[args.command](cfg, echo)
    except (GuardError, NegativeStabilizerError, TruncationError, StepTooLargeError,
            QuadratureError, ValueError, ArithmeticError) as exc:
        print(f"fakestat: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
