import subprocess
import sys

import numpy as np
import pytest

from fakestat.cli import build_parser, main, read_config_file, resolve
from fakestat.kernels import read_columns


def run(argv):
    return main([str(a) for a in argv])


def test_stabilizer_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    coeffs = tmp_path / "c.csv"
    rc = run(["stabilizer", "--fig1", "--steps", 100, "--K", 100, "--out", out, "--coeffs-out", coeffs])
    assert rc == 0
    text = out.read_text()
    assert "# alpha = 0.9" in text and "# c = 0.3" in text and "# created" in text
    cols = read_columns(out)
    assert cols["sigma"][0] == 0.0 and np.all(cols["sigma2"] >= 0)
    assert "growth bound certificate" in capsys.readouterr().out
    assert read_columns(coeffs)["k"][-1] == 100


def test_deterministic_output_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--fig3", "--steps", 20, "--paths", 200, "--seed", 5, "--deterministic"]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b, "--threads", 2]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "created" not in a.read_text()


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nhurst = 0.25\nlambda=0.7\nsteps = 40 # trailing\n")
    assert read_config_file(cfg) == {"hurst": 0.25, "lambda": 0.7, "steps": 40}
    parser = build_parser()
    c = resolve(parser.parse_args(["stabilizer", "--fig1", "--config", str(cfg), "--steps", "10"]))
    assert c["alpha"] == pytest.approx(0.75)  # config over preset
    assert c["lambda"] == 0.7
    assert c["steps"] == 10  # flag over config
    assert c["c"] == 0.3  # preset survives
    c = resolve(parser.parse_args(["stabilizer", "--config", str(cfg), "--alpha", "0.6"]))
    assert c["alpha"] == 0.6


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha 0.9\n")
    assert run(["stabilizer", "--config", cfg]) == 3


def test_presets():
    parser = build_parser()
    c = resolve(parser.parse_args(["simulate", "--fig3"]))
    assert (c["steps"], c["paths"], c["alpha"]) == (1000, 100_000, pytest.approx(0.9))
    c = resolve(parser.parse_args(["simulate", "--fig3", "--desk"]))
    assert (c["steps"], c["paths"]) == (500, 20_000)
    c = resolve(parser.parse_args(["stabilizer", "--fig2"]))
    assert c["alpha"] == pytest.approx(0.6) and "paths" not in c


def test_resolvent_command(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["resolvent", "--kernel", "exponential", "--rho", 1, "--lambda", 2, "--T", 2,
                "--steps", 400, "--out", out]) == 0
    cols = read_columns(out)
    np.testing.assert_allclose(cols["R"], (1 + 2 * np.exp(-3 * cols["t"])) / 3, atol=1e-5)
    assert out.with_suffix(".json").exists()
    assert run(["resolvent", "--kernel", "constant", "--method", "closed", "--out", out]) == 3


def test_simulate_flags(tmp_path, capsys):
    out, paths = tmp_path / "m.csv", tmp_path / "p.csv"
    rc = run(["simulate", "--fig3", "--steps", 20, "--paths", 150, "--out", out, "--dump-paths", paths,
              "--check-flatness", "--gnuplot-script", tmp_path / "m.gp"])
    assert rc in (0, 1)
    assert "derived c" in capsys.readouterr().out
    p = read_columns(paths)
    assert len(p["x"]) == 150 * 21 and p["path_id"][-1] == 149
    assert (tmp_path / "m.gp").read_text().count("plot") == 1


def test_ablation_fails_flatness(tmp_path):
    rc = run(["simulate", "--fig3", "--steps", 250, "--paths", 4000, "--no-stabilizer", "--check-flatness",
              "--out", tmp_path / "m.csv"])
    assert rc == 1


def test_guard_exit_codes(tmp_path):
    assert run(["simulate", "--v0", -1, "--out", tmp_path / "x.csv"]) == 3
    assert run(["covariance", "--paths", 10, "--out", tmp_path / "x.csv"]) == 3
    assert run(["resolvent", "--kernel", "constant", "--lambda", 500, "--steps", 10,
                "--out", tmp_path / "x.csv"]) == 3


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["stabilizer", "--alpha", "0.9", "--hurst", "0.4"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_confluence_command(tmp_path):
    out = tmp_path / "c.csv"
    assert run(["confluence", "--fig3", "--steps", 50, "--paths", 100, "--out", out]) == 0
    cols = read_columns(out)
    assert cols["ratio"][0] == 1.0 and cols["ratio"][-1] < 1.0


def test_covariance_command(tmp_path):
    out = tmp_path / "cov.csv"
    rc = run(["covariance", "--fig3", "--T", 3, "--steps", 150, "--paths", 1000, "--t-base", 2,
              "--deltas", "0,0.5", "--out", out])
    assert rc in (0, 1)
    cols = read_columns(out)
    assert cols["limit_cov"][0] == pytest.approx(0.09)


def test_validate_special(capsys):
    assert run(["validate", "special"]) == 0
    assert "[PASS]  1" in capsys.readouterr().out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "fakestat.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("fakestat ")
