"""Command line entry point ``fracwave``.

Subcommands write CSV files with a ``#`` metadata header plus JSON sidecars
into the output directory.  Exit codes: 0 when every verdict passes, 1 when
any verdict fails, 2 on an execution error (a JSON error report is written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_domain, build_problem, parse_config
from .discretization import convergence_sweep, manufactured_cubic
from .errors import FracWaveError, ValidationError
from .extension import (ExtensionField, factorial_growth_fit, mode_energy, psi, psi_prime,
                        trace_norm_identity)
from .mlfunc import ml
from .reglab import (blowup_theory, broadband_mode_numbers, fit_blowup_exponent, space_regularity_fit,
                     space_time_regularity_check, weighted_time_norm)
from .spectral import Interval, ModeExpansion, make_domain, unit_mode
from .wavesolve import FracWaveProblem, residual_check, solve_mode, volterra_residual

__all__ = ["main", "run", "Artifacts", "threads", "pmap", "fmt", "csv_text", "header_line"]

RESIDUAL_TOL = 1e-7
ORDER_TOL = 0.1
ROUGH_MARGIN = 0.2
SLOPE_TOL = 0.05
NORMALIZED_TOL = 1e-12  # rounding allowance on ratios equal to 1 by construction


def fmt(x) -> str:
    """Shortest repr that round-trips, so output bytes depend only on the value."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _json_value(x):
    if isinstance(x, dict):
        return {str(k): _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else fmt(v)
    return x


def threads() -> int:
    """Worker cap from FRACWAVE_THREADS (default 1)."""
    text = os.environ.get("FRACWAVE_THREADS", "1").strip() or "1"
    try:
        n = int(text)
    except ValueError:
        raise ValidationError("FRACWAVE_THREADS must be a positive integer") from None
    if n < 1:
        raise ValidationError("FRACWAVE_THREADS must be a positive integer")
    return n


def pmap(fn, items) -> list:
    """Ordered map over items, parallel up to the FRACWAVE_THREADS cap."""
    items = list(items)
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def header_line(command: str, config_hash: str) -> str:
    return f"# fracwave {__version__} command={command} config_sha256={config_hash}\n"


def csv_text(command: str, config_hash: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header_line(command, config_hash))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([fmt(v) for v in row] for row in rows)
    return buf.getvalue()


@dataclass
class Artifacts:
    """Serialized writer for one run's output directory."""

    out: Path
    command: str
    config_hash: str
    written: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, columns, rows) -> Path:
        return self._write(name, csv_text(self.command, self.config_hash, columns, rows))

    def json(self, name: str, payload: dict) -> Path:
        body = {"fracwave_version": __version__, "command": self.command,
                "config_sha256": self.config_hash, **payload}
        return self._write(name, json.dumps(_json_value(body), indent=2, sort_keys=True) + "\n")

    def text(self, name: str, body: str) -> Path:
        return self._write(name, body)

    def _write(self, name: str, body: str) -> Path:
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
        self.written.append(name)
        return path


def _artifacts(cfg: RunConfig, command: str) -> Artifacts:
    art = Artifacts(Path(cfg.out), command, cfg.config_hash)
    art.text("resolved_config.ini", cfg.resolved_text)
    return art


def _x_grid(cfg: RunConfig) -> np.ndarray:
    # interior points; rectangles are sampled along the midline x2 = Ly/2
    x = cfg.L * np.arange(1, cfg.x_points + 1) / (cfg.x_points + 1)
    if cfg.domain == "rectangle":
        return np.stack([x, np.full_like(x, cfg.Ly / 2.0)], axis=-1)
    return x


def _t_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.t_points == 1:
        return np.array([cfg.T])
    return cfg.T * np.arange(cfg.t_points) / (cfg.t_points - 1)


# ---------------------------------------------------------------- commands

def cmd_solve(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    art = _artifacts(cfg, "solve")
    t = _t_grid(cfg)
    x = _x_grid(cfg)
    xs = x if x.ndim == 1 else x[:, 0]
    ks = range(1, prob.domain.n_modes + 1)

    def history(k):
        traj = solve_mode(prob, k)
        return traj.u(t), traj.du(t), traj.caputo_du(t)

    hist = pmap(history, ks)
    U = np.stack([h[0] for h in hist])
    basis = prob.domain.basis_at(x)
    field_vals = U.T @ basis
    art.csv("solution.csv", ("t", "x", "u"),
            ((ti, xi, field_vals[i, j]) for i, ti in enumerate(t) for j, xi in enumerate(xs)))
    art.csv("modes.csv", ("k", "t", "u_k", "du_k", "caputo_du_k"),
            ((k, ti, hist[k - 1][0][i], hist[k - 1][1][i], hist[k - 1][2][i])
             for k in ks for i, ti in enumerate(t)))
    t_res = t[t >= min(0.01, cfg.T)]
    worst = max(pmap(lambda k: residual_check(prob, k, t_res), ks))
    # independent integrated-form check at two times
    t_vol = np.array([cfg.T / 2.0, cfg.T])
    worst_vol = max(pmap(lambda k: volterra_residual(prob, k, t_vol), ks))
    passed = worst <= RESIDUAL_TOL and worst_vol <= RESIDUAL_TOL
    art.json("solve_summary.json", {"n_modes": prob.domain.n_modes, "gamma": cfg.gamma, "s": cfg.s,
                                    "residual_max": worst, "volterra_residual_max": worst_vol,
                                    "residual_tol": RESIDUAL_TOL, "verdict": "PASS" if passed else "FAIL"})
    return 0 if passed else 1


def cmd_extend(cfg: RunConfig) -> int:
    prob = build_problem(cfg)
    fld = ExtensionField(prob, cfg.beta, cfg.theta)
    art = _artifacts(cfg, "extend")
    t = _t_grid(cfg)
    x = _x_grid(cfg)
    xs = x if x.ndim == 1 else x[:, 0]
    y = cfg.y_max * np.arange(cfg.y_points) / max(cfg.y_points - 1, 1)
    basis = prob.domain.basis_at(x)
    P = fld.psi_matrix(y)
    coeffs = np.stack([solve_mode(prob, k).u(t) for k in range(1, prob.domain.n_modes + 1)])
    rows = []
    for i, ti in enumerate(t):
        vals = (coeffs[:, i, None, None] * P[:, :, None] * basis[:, None, :]).sum(axis=0)
        rows.extend((ti, xi, yj, vals[j, m]) for m, xi in enumerate(xs) for j, yj in enumerate(y))
    art.csv("extension.csv", ("t", "x", "y", "U"), rows)
    prows = []
    for k, prof in enumerate(fld.profiles, start=1):
        p0 = np.atleast_1d(psi(prof, y))
        p1 = np.atleast_1d(psi_prime(prof, y))
        prows.extend((k, yj, p0[j], p1[j]) for j, yj in enumerate(y))
    art.csv("profiles.csv", ("k", "y", "psi", "psi_prime"), prows)
    energies = pmap(mode_energy, fld.profiles)
    rel = [abs(e / (p.d_s * p.lam ** p.s) - 1.0) for e, p in zip(energies, fld.profiles)]
    lhs, rhs = trace_norm_identity(fld, cfg.T)
    trace_err = float(np.max(np.abs(P[:, 0] - 1.0)))
    passed = max(rel) <= 1e-6 and trace_err <= 1e-12 and abs(lhs - rhs) <= 1e-6 * max(abs(rhs), 1e-300)
    art.json("extend_summary.json", {"beta": cfg.beta, "theta": cfg.theta, "energy_rel_err_max": max(rel),
                                     "trace_psi0_err": trace_err, "trace_norm_lhs": lhs,
                                     "trace_norm_rhs": rhs, "verdict": "PASS" if passed else "FAIL"})
    return 0 if passed else 1


def cmd_psibounds(s: float, theta: float, ell_max: int, beta: float, lam: float, out: str) -> int:
    fit = factorial_growth_fit(s, theta, lam, ell_max, beta)
    canon = f"s={s!r} theta={theta!r} ellmax={ell_max} beta={beta!r} lam={lam!r}"
    art = Artifacts(Path(out), "psibounds", hashlib.sha256(canon.encode()).hexdigest())
    art.csv("psibounds.csv", ("ell", "Psi", "normalized_ratio", "kappa_hat"),
            ((ell, v, r, fit.kappa_hat) for ell, v, r in zip(fit.ells, fit.psi_values, fit.normalized)))
    passed = max(fit.normalized[1:] if fit.ells[0] == 0 else fit.normalized) <= 1.0 + NORMALIZED_TOL
    art.json("psibounds_summary.json", {"s": s, "theta": theta, "beta": beta, "lam": lam, "ell_max": ell_max,
                                        "kappa_hat": fit.kappa_hat, "argmax_ell": fit.argmax,
                                        "verdict": "PASS" if passed else "FAIL"})
    return 0 if passed else 1


def cmd_convergence(cfg: RunConfig) -> int:
    art = _artifacts(cfg, "convergence")
    if cfg.manufactured:
        dom = build_domain(cfg)
        prob, exact = manufactured_cubic(dom, cfg.s, cfg.gamma, cfg.T)
        sweep = convergence_sweep(prob, cfg.levels, cfg.init_rule, exact)
    else:
        prob = build_problem(cfg)
        sweep = convergence_sweep(prob, cfg.levels, cfg.init_rule)
    art.csv("orders.csv", ("tau", "error", "observed_order"), zip(sweep.taus, sweep.errors, sweep.observed))
    target = 3.0 - cfg.gamma
    if cfg.manufactured:
        passed = abs(sweep.fitted_order - target) <= ORDER_TOL
    else:
        passed = sweep.fitted_order < target - ROUGH_MARGIN
    art.json("convergence_summary.json", {"scheme": cfg.scheme, "gamma": cfg.gamma, "s": cfg.s,
                                          "fitted_order": sweep.fitted_order, "smooth": cfg.manufactured,
                                          "expected_order": target, "init_rule": cfg.init_rule,
                                          "verdict": "PASS" if passed else "FAIL"})
    return 0 if passed else 1


def _row(quantity, parameter, value, theory, verdict_ok) -> tuple:
    ratio = value / theory if (theory not in (0.0, None) and math.isfinite(value)) else float("nan")
    return (quantity, parameter, value, float("nan") if theory is None else theory, ratio,
            "PASS" if verdict_ok else "FAIL")


def _time_rows(cfg: RunConfig) -> list:
    gamma, s = cfg.gamma, cfg.s
    rows = []
    if gamma < 2.0:
        dom = make_domain(Interval(math.pi), 1)
        zero = ModeExpansion.zeros(dom)
        pg = FracWaveProblem(dom, s, gamma, 1.0, unit_mode(dom, 1), zero)
        for q, r in ((2, 0.0), (3, -s)):
            fit = fit_blowup_exponent(pg, q, r)
            th = blowup_theory(gamma, q, "g")
            rows.append(_row(f"blowup_slope_q{q}_g", f"gamma={fmt(gamma)}", fit.exponent_hat, th,
                             abs(fit.exponent_hat - th) <= SLOPE_TOL))
        ks = broadband_mode_numbers(gamma, s)
        bdom = make_domain(Interval(math.pi, ks), len(ks))
        bzero = ModeExpansion.zeros(bdom)
        ph = FracWaveProblem(bdom, s, gamma, 1.0, bzero, ModeExpansion(bdom, np.ones(len(ks))))
        fit = fit_blowup_exponent(ph, 3, -s)
        th = blowup_theory(gamma, 3, "h")
        rows.append(_row("blowup_slope_q3_h", f"gamma={fmt(gamma)}", fit.exponent_hat, th,
                         abs(fit.exponent_hat - th) <= SLOPE_TOL))
    prob = build_problem(cfg)
    threshold = 5.0 - 2.0 * gamma
    cases = [(threshold + 0.2, "finite"), (threshold - 0.2, "diverge")] if gamma < 2.0 else []
    if cfg.rho is not None:
        cases.append((cfg.rho, cfg.expect))
    for rho, expect in cases:
        res = weighted_time_norm(prob, rho, cfg.q)
        if expect == "auto":
            expect = "finite" if res.endpoint_exponent is None or res.endpoint_exponent > -1.0 else "diverge"
        ok = res.finite if expect == "finite" else not res.finite
        rows.append(_row(f"weighted_norm_q{cfg.q}_expect_{expect}", f"rho={fmt(rho)}", res.value,
                         None, ok))
    return rows


def _space_rows(cfg: RunConfig) -> list:
    fld = ExtensionField(build_problem(cfg), cfg.beta, cfg.theta)
    fit = space_regularity_fit(fld, cfg.sigma, cfg.nu, cfg.ell_max)
    rows = []
    for v in ("dy", "grad_dy", "L_dy"):
        rows.append(_row(f"kappa_hat_{v}", f"sigma={fmt(cfg.sigma)};nu={fmt(cfg.nu)}", fit.kappa_hat[v],
                         None, math.isfinite(fit.kappa_hat[v])))
        for ell, r in zip(fit.ells, fit.normalized[v]):
            rows.append(_row(f"normalized_{v}", f"ell={ell}", r, 1.0, r <= 1.0 + NORMALIZED_TOL))
    return rows


def _spacetime_rows(cfg: RunConfig) -> list:
    fld = ExtensionField(build_problem(cfg), cfg.beta, cfg.theta)
    rho = cfg.rho if cfg.rho is not None else 5.0 - 2.0 * cfg.gamma + 0.2
    res = space_time_regularity_check(fld, cfg.sigma, cfg.nu, rho, cfg.ell_max)
    expect = cfg.expect
    if expect == "auto":
        expect = "finite" if res.endpoint_exponent is None or res.endpoint_exponent > -1.0 else "diverge"
    rows = [_row(f"spacetime_expect_{expect}", f"rho={fmt(rho)}", res.kappa_hat, None,
                 res.finite if expect == "finite" else not res.finite)]
    if res.finite:
        for ell, r in zip(res.ells, res.normalized):
            rows.append(_row("normalized_spacetime", f"ell={ell}", r, 1.0, r <= 1.0 + NORMALIZED_TOL))
    return rows


def cmd_regularity(cfg: RunConfig) -> int:
    art = _artifacts(cfg, "regularity")
    rows = {"time": _time_rows, "space": _space_rows, "spacetime": _spacetime_rows}[cfg.suite](cfg)
    art.csv("regularity.csv", ("quantity", "parameter", "value", "theory", "ratio", "verdict"), rows)
    failed = [r[0] + "[" + r[1] + "]" for r in rows if r[-1] != "PASS"]
    art.json("regularity_summary.json", {"suite": cfg.suite, "gamma": cfg.gamma, "s": cfg.s,
                                         "rows": len(rows), "failed": failed,
                                         "verdict": "FAIL" if failed else "PASS"})
    return 1 if failed else 0


def cmd_ml(gamma: float, mu: float, z: float) -> int:
    rep = ml((gamma, mu), z)
    print(f"{fmt(rep.value)} {rep.method.value} est_abs_error={fmt(rep.est_abs_error)}")
    return 0


def cmd_accept(seed: int, out: str) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(seed, Path(out))
    return 0 if all(r.passed for r in results) else 1


def run(config: RunConfig, command: str) -> int:
    """Execute one configured command and return its exit code."""
    handlers = {"solve": cmd_solve, "extend": cmd_extend, "convergence": cmd_convergence,
                "regularity": cmd_regularity}
    return handlers[command](config)


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracwave", description="Fractional wave solver and verification lab")
    p.add_argument("--version", action="version", version=f"fracwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    m = sub.add_parser("ml", help="evaluate one Mittag-Leffler value (debugging)")
    m.add_argument("--gamma", type=float, required=True)
    m.add_argument("--mu", type=float, required=True)
    m.add_argument("--z", type=float, required=True)
    for name in ("solve", "extend", "convergence", "regularity"):
        c = sub.add_parser(name)
        c.add_argument("--config", required=True)
        c.add_argument("--out")
        c.add_argument("--seed", type=int)
        if name == "convergence":
            c.add_argument("--levels", type=int, help="number of refinement levels starting at tau = T/2^6")
        if name == "regularity":
            c.add_argument("--suite", choices=("time", "space", "spacetime"))
    b = sub.add_parser("psibounds")
    b.add_argument("--s", type=float, required=True)
    b.add_argument("--theta", type=float, required=True)
    b.add_argument("--ellmax", type=int, required=True)
    b.add_argument("--beta", type=float, default=0.0)
    b.add_argument("--lam", type=float, default=1.0)
    b.add_argument("--out", default="fracwave_out")
    a = sub.add_parser("accept", help="run the full acceptance suite")
    a.add_argument("--seed", type=int, default=42)
    a.add_argument("--out", default="fracwave_accept")
    return p


def _load(args) -> RunConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read config {args.config!r}: {exc}") from None
    cfg = parse_config(text)
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.seed is not None:
        changes["seed"] = str(args.seed)
    if getattr(args, "levels", None) is not None:
        if args.levels < 3:
            raise ValidationError("--levels must be at least 3")
        start = min(cfg.levels)
        changes["levels"] = f"{start}..{start + args.levels - 1}"
    if getattr(args, "suite", None) is not None:
        changes["suite"] = args.suite
    return cfg.replace(**changes) if changes else cfg


def _report_error(exc: BaseException, out: str | None) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "fracwave_version": __version__}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    sys.stderr.write(text)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text, encoding="utf-8")
        except OSError:
            pass


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = getattr(args, "out", None)
    try:
        threads()
        if args.command == "ml":
            return cmd_ml(args.gamma, args.mu, args.z)
        if args.command == "psibounds":
            return cmd_psibounds(args.s, args.theta, args.ellmax, args.beta, args.lam, args.out)
        if args.command == "accept":
            return cmd_accept(args.seed, args.out)
        cfg = _load(args)
        out = cfg.out
        return run(cfg, args.command)
    except (FracWaveError, ValueError, ArithmeticError, OSError) as exc:
        _report_error(exc, out)
        return 2


if __name__ == "__main__":
    sys.exit(main())
