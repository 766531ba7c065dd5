from __future__ import annotations

import json
import math
import os
import subprocess
import sys

import pytest

from fracwave import __version__
from fracwave.cli import main
from fracwave.config import build_problem, parse_config, parse_number
from fracwave.errors import ParseError, ValidationError

MINIMAL = """\
[domain]
domain = interval
L = pi
[problem]
s = 0.5
gamma = 1.5
T = 1
[data]
g = mode:1
"""


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------- config parsing

def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.gamma == 1.5 and cfg.s == 0.5 and cfg.T == 1.0
    assert cfg.L == pytest.approx(math.pi)
    assert cfg.n_modes == 4 and cfg.init_rule == "fractional_taylor"
    resolved = cfg.resolved_text
    for key in ("n_modes", "levels", "init_rule", "theta", "seed", "suite"):
        assert f"{key} =" in resolved
    assert parse_config(resolved).config_hash == cfg.config_hash


def test_sectionless_config():
    flat = "\n".join(line for line in MINIMAL.splitlines() if not line.startswith("["))
    assert parse_config(flat).config_hash == parse_config(MINIMAL).config_hash


def test_gamma_out_of_range():
    with pytest.raises(ValidationError, match=r"gamma must lie in \(1,2\]"):
        parse_config(MINIMAL.replace("gamma = 1.5", "gamma = 2.5"))


def test_theta_too_large():
    with pytest.raises(ValidationError, match=r"theta must be < 2\*sqrt\(lambda_1\)"):
        parse_config(MINIMAL + "[weight]\ntheta = 10\n")


def test_unknown_key_has_line_number():
    with pytest.raises(ParseError) as info:
        parse_config(MINIMAL + "[scheme]\nbogus = 3\n")
    assert info.value.line == 11


def test_duplicate_and_junk_lines():
    with pytest.raises(ParseError):
        parse_config(MINIMAL + "[problem]\ns = 0.4\n")
    with pytest.raises(ParseError) as info:
        parse_config("[problem]\njust some words\n")
    assert info.value.line == 2


def test_parse_number():
    assert parse_number("pi/2") == pytest.approx(math.pi / 2)
    assert parse_number("-2**3 + 1") == -7.0
    with pytest.raises(ValueError):
        parse_number("__import__('os')")


def test_forcing_and_data_presets():
    cfg = parse_config(MINIMAL.replace("g = mode:1", "g = bump:2\nh = mode:2:0.5\nf = all:const:1;1:sine:2,3"))
    prob = build_problem(cfg)
    assert prob.h.coeffs[1] == 0.5
    assert prob.g.coeffs[0] > 0 and abs(prob.g.coeffs[1]) < 1e-12
    # entries apply left to right, so the mode-1 entry replaces the blanket profile there
    assert prob.forcing(1).f(0.5) == pytest.approx(2 * math.sin(1.5))
    assert prob.forcing(3).f(0.5) == pytest.approx(1.0)


# ---------------------------------------------------------------- CLI runs

def test_solve_single_mode(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", write_config(tmp_path, MINIMAL), "--out", str(out)]) == 0
    text = (out / "solution.csv").read_text()
    assert text.startswith(f"# fracwave {__version__} command=solve config_sha256=")
    assert text.splitlines()[1] == "t,x,u"
    summary = json.loads((out / "solve_summary.json").read_text())
    assert summary["residual_max"] <= 1e-7
    assert (out / "resolved_config.ini").exists()


def test_convergence_manufactured(tmp_path):
    out = tmp_path / "conv"
    cfg = write_config(tmp_path, MINIMAL + "[scheme]\nmanufactured = true\nlevels = 6..10\n")
    assert main(["convergence", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "convergence_summary.json").read_text())
    assert summary["smooth"] is True
    assert summary["fitted_order"] == pytest.approx(1.5, abs=0.1)
    for key in ("scheme", "gamma", "s", "fitted_order", "smooth"):
        assert key in summary
    assert (out / "orders.csv").read_text().splitlines()[1] == "tau,error,observed_order"


def test_convergence_rough_data(tmp_path):
    out = tmp_path / "rough"
    cfg = write_config(tmp_path, MINIMAL + "[scheme]\nmanufactured = false\n")
    assert main(["convergence", "--config", cfg, "--out", str(out), "--levels", "4"]) == 0
    summary = json.loads((out / "convergence_summary.json").read_text())
    assert summary["smooth"] is False and summary["fitted_order"] < 1.5 - 0.2


def test_regularity_expected_divergence_passes(tmp_path):
    out = tmp_path / "reg"
    cfg = write_config(tmp_path, MINIMAL + "[regularity]\nrho = 1.8\nexpect = diverge\n")
    assert main(["regularity", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "regularity.csv").read_text().splitlines()
    assert lines[1] == "quantity,parameter,value,theory,ratio,verdict"
    assert any("expect_diverge" in line and line.endswith("PASS") for line in lines)


def test_regularity_failed_verdict_exit_one(tmp_path):
    out = tmp_path / "reg_fail"
    cfg = write_config(tmp_path, MINIMAL + "[regularity]\nrho = 2.2\nexpect = diverge\n")
    assert main(["regularity", "--config", cfg, "--out", str(out)]) == 1
    assert json.loads((out / "regularity_summary.json").read_text())["verdict"] == "FAIL"


@pytest.mark.parametrize("suite", ["space", "spacetime"])
def test_regularity_other_suites(tmp_path, suite):
    out = tmp_path / suite
    cfg = write_config(tmp_path, MINIMAL + "[weight]\ntheta = 0.5\n[regularity]\nsigma = 0.2\n")
    assert main(["regularity", "--config", cfg, "--out", str(out), "--suite", suite]) == 0


def test_extend_and_psibounds(tmp_path):
    out = tmp_path / "ext"
    assert main(["extend", "--config", write_config(tmp_path, MINIMAL), "--out", str(out)]) == 0
    assert (out / "extension.csv").read_text().splitlines()[1] == "t,x,y,U"
    assert (out / "profiles.csv").read_text().splitlines()[1] == "k,y,psi,psi_prime"
    pb = tmp_path / "pb"
    assert main(["psibounds", "--s", "0.3", "--theta", "0.5", "--ellmax", "6", "--out", str(pb)]) == 0
    assert (pb / "psibounds.csv").read_text().splitlines()[1] == "ell,Psi,normalized_ratio,kappa_hat"


def test_validation_error_exit_two(tmp_path, capsys):
    out = tmp_path / "bad"
    cfg = write_config(tmp_path, MINIMAL.replace("gamma = 1.5", "gamma = 2.5"))
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 2
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "ValidationError" and "gamma" in report["message"]
    assert json.loads((out / "error.json").read_text()) == report


def test_parse_error_reports_line(tmp_path, capsys):
    cfg = write_config(tmp_path, MINIMAL + "[scheme]\nbogus = 3\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert json.loads(capsys.readouterr().err)["line"] == 11


def test_missing_config_exit_two(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.ini")]) == 2


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACWAVE_THREADS", "zero")
    assert main(["solve", "--config", write_config(tmp_path, MINIMAL), "--out", str(tmp_path / "o")]) == 2


def _snapshot(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_determinism_across_runs_and_threads(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, MINIMAL.replace("g = mode:1", "g = bump\nf = all:sine:1,2"))
    out = tmp_path / "run"
    snaps = []
    for threads in ("1", "4", "4"):
        monkeypatch.setenv("FRACWAVE_THREADS", threads)
        for cmd in ("solve", "extend"):
            assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
        snaps.append(_snapshot(out))
    assert snaps[0] == snaps[1] == snaps[2]


def test_output_dir_does_not_change_hash(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    heads = []
    for name in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / name)]) == 0
        heads.append((tmp_path / name / "solution.csv").read_bytes())
    assert heads[0] == heads[1]


def test_ml_subcommand(capsys):
    assert main(["ml", "--gamma", "2", "--mu", "1", "--z", "-4"]) == 0
    value = float(capsys.readouterr().out.split()[0])
    assert value == pytest.approx(math.cos(2.0), abs=1e-14)


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "fracwave.cli", "--version"], capture_output=True, text=True,
                         env={**os.environ, "FRACWAVE_THREADS": "1"})
    assert res.returncode == 0 and res.stdout.strip() == f"fracwave {__version__}"
