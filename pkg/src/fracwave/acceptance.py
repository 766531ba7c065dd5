"""Acceptance suite: eleven quantitative checks run by ``fracwave accept``.

Each criterion returns a list of metric rows (name, value, threshold, ok).
Wall-clock times are printed but never written, so the files depend only on
the seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .cli import NORMALIZED_TOL, csv_text, fmt
from .discretization import (convergence_sweep, discrete_l2_norm, frac_integral, manufactured_cubic,
                             uniform_grid)
from .extension import (ExtensionField, ExtensionProfile, bessel_k, bessel_k_branch, conormal_limit,
                        evaluate_extension, factorial_growth_fit, mode_energy, phi_integral, psi_integral)
from .mlfunc import ml_array, ml_value
from .reglab import (blowup_theory, broadband_mode_numbers, fit_blowup_exponent, space_regularity_fit,
                     weighted_time_norm)
from .spectral import Interval, ModeExpansion, make_domain, unit_mode
from .wavesolve import (ZERO_FORCING, FracWaveProblem, constant_forcing, evaluate_solution, mode_derivative,
                        polynomial_forcing, residual_check, sine_forcing, volterra_residual)

__all__ = ["Metric", "CriterionResult", "CRITERIA", "run_criterion", "run_suite", "run_acceptance"]


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    threshold: str
    ok: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "ok", bool(self.ok))


@dataclass
class CriterionResult:
    number: int
    title: str
    metrics: list
    runtime: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(m.ok for m in self.metrics)

    @property
    def line(self) -> str:
        worst = next((m for m in self.metrics if not m.ok), None)
        detail = f"first failure {worst.name}={fmt(worst.value)} (need {worst.threshold})" if worst \
            else f"{len(self.metrics)} check{'' if len(self.metrics) == 1 else 's'}"
        verdict = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {verdict}  {self.title}: {detail} [{self.runtime:.1f}s]"


def _rel(a, b) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _data(name: str) -> dict:
    return json.loads(resources.files("fracwave").joinpath(f"data/{name}").read_text(encoding="utf-8"))


# ---------------------------------------------------------------- 1 Mittag-Leffler

def criterion_1(rng: np.random.Generator) -> list:
    start = time.perf_counter()
    z = np.linspace(-100.0, 5.0, 421)
    neg = z[z < 0]
    w = np.sqrt(-neg)
    checks = [
        ("exp", ml_array(1.0, 1.0, z), np.exp(z)),
        ("cos", ml_array(2.0, 1.0, neg), np.cos(w)),
        ("sin_over_t", ml_array(2.0, 2.0, neg), np.sin(w) / w),
    ]
    pos = z[z > 0]
    checks.append(("cosh", ml_array(2.0, 1.0, pos), np.cosh(np.sqrt(pos))))
    metrics = []
    for name, got, ref in checks:
        err = float(np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))))
        metrics.append(Metric(f"closed_form_{name}", err, "<= 1e-10", err <= 1e-10))
    oracle = _data("ml_oracle.json")
    worst = 0.0
    for row in oracle["random"]:
        got = ml_value(row["gamma"], row["mu"], row["z"])
        worst = max(worst, _rel(got, float(row["value"])))
    metrics.append(Metric("oracle_50_points", worst, "<= 1e-12", worst <= 1e-12))
    metrics.append(Metric("oracle_points_checked", len(oracle["random"]), "== 50",
                          len(oracle["random"]) == 50))
    elapsed = time.perf_counter() - start
    metrics.append(Metric("runtime_under_10s", float(elapsed < 10.0), "== 1", elapsed < 10.0))
    return metrics


# ---------------------------------------------------------------- 2 representation residual

def _random_forcing(rng: np.random.Generator):
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return ZERO_FORCING
    if kind == 1:
        return constant_forcing(float(rng.normal()))
    if kind == 2:
        return sine_forcing(float(rng.normal()), float(rng.uniform(0.5, 3.0)), float(rng.uniform(0, math.pi)))
    return polynomial_forcing([float(c) for c in rng.normal(size=3)])


def criterion_2(rng: np.random.Generator) -> list:
    worst_direct = 0.0
    worst_volterra = 0.0
    for _ in range(20):
        gamma = float(rng.choice([2.0, rng.uniform(1.05, 2.0)], p=[0.1, 0.9]))
        s = float(rng.uniform(0.1, 0.9))
        k = int(rng.integers(1, 9))
        T = float(rng.uniform(1.0, 3.0))
        dom = make_domain(Interval(math.pi, (k,)), 1)
        g = ModeExpansion(dom, rng.normal(size=1))
        h = ModeExpansion(dom, rng.normal(size=1))
        prob = FracWaveProblem(dom, s, gamma, T, g, h, (_random_forcing(rng),))
        t = np.linspace(0.01, T, 25)
        worst_direct = max(worst_direct, residual_check(prob, 1, t))
        worst_volterra = max(worst_volterra, volterra_residual(prob, 1, t[[12, 24]]))
    return [Metric("residual_check_max", worst_direct, "<= 1e-7", worst_direct <= 1e-7),
            Metric("volterra_residual_max", worst_volterra, "<= 1e-7", worst_volterra <= 1e-7)]


# ---------------------------------------------------------------- 3 gamma = 2 closed form

def _forcing_from(spec: dict):
    args = [float(a) for a in spec["args"]]
    return {"const": lambda: constant_forcing(*args), "sine": lambda: sine_forcing(*args),
            "poly": lambda: polynomial_forcing(args)}[spec["kind"]]()


def criterion_3(rng: np.random.Generator) -> list:
    worst_free = 0.0
    t = np.linspace(0.0, 5.0, 101)
    for _ in range(5):
        lam = float(rng.uniform(0.5, 50.0))
        g, h = (float(v) for v in rng.normal(size=2))
        w = math.sqrt(lam)
        trig = g * np.cos(w * t) + h * np.sin(w * t) / w
        got = mode_derivative(2.0, lam, g, h, ZERO_FORCING, t, 0)
        via_ml = g * ml_array(2.0, 1.0, -lam * t ** 2) + t * h * ml_array(2.0, 2.0, -lam * t ** 2)
        worst_free = max(worst_free, float(np.max(np.abs(got - trig))), float(np.max(np.abs(via_ml - trig))))
    worst_forced = 0.0
    for row in _data("wave_oracle.json")["rows"]:
        if float(row["gamma"]) != 2.0:
            continue
        f = _forcing_from(row["f"])
        tt = np.array([float(row["t"])])
        args = (2.0, float(row["lam_s"]), float(row["g"]), float(row["h"]), f, tt)
        worst_forced = max(worst_forced, _rel(float(mode_derivative(*args, 0)[0]), float(row["u"])),
                           _rel(float(mode_derivative(*args, 1)[0]), float(row["du"])))
    return [Metric("trig_formula_max_err", worst_free, "<= 1e-10", worst_free <= 1e-10),
            Metric("forced_convolution_oracle_err", worst_forced, "<= 1e-10", worst_forced <= 1e-10)]


# ---------------------------------------------------------------- 4 extension energy

def criterion_4(rng: np.random.Generator) -> list:
    e_worst = 0.0
    c_worst = 0.0
    for s in (0.2, 0.5, 0.8):
        for lam in (1.0, 9.0, 100.0):
            prof = ExtensionProfile(s, lam)
            e_worst = max(e_worst, abs(mode_energy(prof) / (prof.d_s * lam ** s) - 1.0))
            c_worst = max(c_worst, abs(conormal_limit(prof) + 1.0))
    dom = make_domain(Interval(math.pi), 6)
    g = ModeExpansion(dom, rng.normal(size=6))
    h = ModeExpansion(dom, rng.normal(size=6))
    prob = FracWaveProblem(dom, 0.4, 1.6, 1.0, g, h)
    fld = ExtensionField(prob)
    x = np.linspace(0.1, math.pi - 0.1, 25)
    t_worst = 0.0
    for t in (0.0, 0.37, 1.0):
        t_worst = max(t_worst, float(np.max(np.abs(evaluate_extension(fld, x, 0.0, t)
                                                   - evaluate_solution(prob, x, t)))))
    return [Metric("energy_rel_err", e_worst, "<= 1e-6", e_worst <= 1e-6),
            Metric("conormal_err", c_worst, "<= 1e-4", c_worst <= 1e-4),
            Metric("trace_err", t_worst, "<= 1e-12", t_worst <= 1e-12)]


# ---------------------------------------------------------------- 5 Bessel K

def criterion_5(rng: np.random.Generator) -> list:
    z = np.geomspace(1e-6, 500.0, 241)
    exact = np.sqrt(np.pi / (2.0 * z)) * np.exp(-z)
    half = float(np.max(np.abs(bessel_k(0.5, z) / exact - 1.0)))
    band = np.linspace(1.5, 3.0, 61)
    branch = 0.0
    for nu in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.3, 2.6, 4.2):
        a = bessel_k_branch(nu, band, "series")
        b = bessel_k_branch(nu, band, "fraction")
        branch = max(branch, float(np.max(np.abs(a - b) / np.abs(b))))
    return [Metric("k_half_closed_form_rel", half, "<= 1e-11", half <= 1e-11),
            Metric("branch_overlap_rel", branch, "<= 1e-10", branch <= 1e-10)]


# ---------------------------------------------------------------- 6 Phi / Psi bounds

def criterion_6(rng: np.random.Generator) -> list:
    lam1 = 1.0
    theta = 0.5 * math.sqrt(lam1)
    spread = 0.0
    for s in (0.2, 0.5, 0.8):
        for delta in (0.0, 0.5):
            vals = [phi_integral(s, delta, theta, lam1 * m, lam1) for m in (1.0, 10.0, 100.0)]
            spread = max(spread, max(vals) / min(vals))
    norm_worst = 0.0
    kappa_min = math.inf
    for s in (0.2, 0.5, 0.8):
        fit = factorial_growth_fit(s, theta, lam1, 8, 0.0, lam1)
        norm_worst = max(norm_worst, max(r for ell, r in zip(fit.ells, fit.normalized) if ell >= 1))
        kappa_min = min(kappa_min, fit.kappa_hat)
    closed = abs(phi_integral(0.5, 0.0, 0.0, 1.0) - 0.5)
    for lam in (1.0, 7.0):
        for beta in (0.0, 0.5):
            for ell in range(9):
                p = beta + 2 * ell
                ref = math.gamma(p + 1.0) / 2.0 ** (p + 1.0)
                closed = max(closed, abs(psi_integral(0.5, ell, beta, 0.0, lam) / ref - 1.0))
        r = 0.5 / math.sqrt(lam)
        ref = math.gamma(3.0) / (2.0 - r) ** 3
        closed = max(closed, abs(psi_integral(0.5, 1, 0.0, 0.5, lam, 1.0) / ref - 1.0))
    return [Metric("phi_spread_over_lambda", spread, "< 3", spread < 3.0),
            Metric("normalized_psi_max", norm_worst, "<= 1", norm_worst <= 1.0 + NORMALIZED_TOL),
            Metric("kappa_hat_min", kappa_min, "> 1", kappa_min > 1.0),
            Metric("s_half_closed_form_rel", closed, "<= 1e-9", closed <= 1e-9)]


# ---------------------------------------------------------------- 7 time regularity

def criterion_7(rng: np.random.Generator) -> list:
    metrics = []
    s = 0.5
    dom = make_domain(Interval(math.pi), 1)
    zero = ModeExpansion.zeros(dom)
    for gamma in (1.25, 1.5, 1.75):
        pg = FracWaveProblem(dom, s, gamma, 1.0, unit_mode(dom, 1), zero)
        for q, r in ((2, 0.0), (3, -s)):
            err = abs(fit_blowup_exponent(pg, q, r).exponent_hat - blowup_theory(gamma, q, "g"))
            metrics.append(Metric(f"slope_q{q}_g_gamma{gamma}", err, "<= 0.05", err <= 0.05))
        ks = broadband_mode_numbers(gamma, s)
        bdom = make_domain(Interval(math.pi, ks), len(ks))
        ph = FracWaveProblem(bdom, s, gamma, 1.0, ModeExpansion.zeros(bdom), ModeExpansion(bdom, np.ones(len(ks))))
        err = abs(fit_blowup_exponent(ph, 3, -s).exponent_hat - blowup_theory(gamma, 3, "h"))
        metrics.append(Metric(f"slope_q3_h_gamma{gamma}", err, "<= 0.05", err <= 0.05))
        above = weighted_time_norm(pg, 5.0 - 2.0 * gamma + 0.2)
        below = weighted_time_norm(pg, 5.0 - 2.0 * gamma - 0.2)
        metrics.append(Metric(f"weighted_finite_gamma{gamma}", above.value, "finite", above.finite))
        metrics.append(Metric(f"weighted_divergent_gamma{gamma}", below.value, "inf", not below.finite))
    return metrics


# ---------------------------------------------------------------- 8 order dichotomy

def criterion_8(rng: np.random.Generator) -> list:
    metrics = []
    dom = make_domain(Interval(math.pi), 1)
    levels = range(6, 13)
    for gamma in (1.25, 1.5, 1.75):
        target = 3.0 - gamma
        prob, exact = manufactured_cubic(dom, 0.5, gamma, 1.0)
        smooth = convergence_sweep(prob, levels, exact=exact).fitted_order
        metrics.append(Metric(f"smooth_order_gamma{gamma}", smooth, f"{fmt(target)} +- 0.1",
                              abs(smooth - target) <= 0.1))
        rough_prob = FracWaveProblem(dom, 0.5, gamma, 1.0, unit_mode(dom, 1), ModeExpansion.zeros(dom))
        rough = convergence_sweep(rough_prob, levels).fitted_order
        metrics.append(Metric(f"rough_order_gamma{gamma}", rough, f"< {fmt(target - 0.2)}",
                              rough < target - 0.2))
    return metrics


# ---------------------------------------------------------------- 9 fractional integral continuity

def _random_signal(rng: np.random.Generator, t: np.ndarray, T: float) -> np.ndarray:
    j = np.arange(1, 7)
    a = rng.normal(size=6) / j
    b = rng.normal(size=6) / j
    v = rng.normal() + np.cos(np.pi * np.outer(t, j) / T) @ a + np.sin(np.pi * np.outer(t, j) / T) @ b
    if rng.random() < 0.5:
        v = v + 0.3 * rng.normal(size=t.size)  # rough nodal perturbation
    return v


def criterion_9(rng: np.random.Generator) -> list:
    worst = 0.0
    for _ in range(10):
        T = float(rng.uniform(0.5, 2.0))
        grid = uniform_grid(T, 256)
        g = _random_signal(rng, grid.nodes, T)
        gn = discrete_l2_norm(g, grid)
        for sigma in (0.5, 1.0, 1.5):
            bound = T ** sigma / math.gamma(sigma + 1.0) * gn * (1.0 + 5.0 * grid.tau)
            worst = max(worst, discrete_l2_norm(frac_integral(sigma, g, grid), grid) / bound)
    return [Metric("norm_over_bound_max", worst, "<= 1", worst <= 1.0)]


# ---------------------------------------------------------------- 10 space regularity

def criterion_10(rng: np.random.Generator) -> list:
    metrics = []
    dom = make_domain(Interval(math.pi), 3)
    for s in (0.3, 0.5, 0.7):
        for gamma in (1.5, 2.0):
            g = ModeExpansion(dom, np.array([1.0, 0.5, 0.25]))
            h = ModeExpansion(dom, np.array([0.0, 0.3, 0.0]))
            fld = ExtensionField(FracWaveProblem(dom, s, gamma, 1.0, g, h), 0.0, 0.5)
            fit = space_regularity_fit(fld, 0.5 * s, 0.5, 4)
            worst = max(max(v) for v in fit.normalized.values())
            metrics.append(Metric(f"normalized_max_s{s}_gamma{gamma}", worst, "<= 1",
                                  worst <= 1.0 + NORMALIZED_TOL))
    return metrics


CRITERIA = {
    1: ("Mittag-Leffler correctness", criterion_1),
    2: ("representation-formula residual", criterion_2),
    3: ("gamma=2 closed form", criterion_3),
    4: ("extension energy, conormal and trace identities", criterion_4),
    5: ("Bessel K closed form and branch consistency", criterion_5),
    6: ("Phi/Psi bounds", criterion_6),
    7: ("time-regularity exponents", criterion_7),
    8: ("discrete order dichotomy", criterion_8),
    9: ("fractional-integral continuity", criterion_9),
    10: ("space-regularity factorial growth", criterion_10),
}


def run_criterion(number: int, seed: int = 42) -> CriterionResult:
    """Run one numbered criterion with its own seeded generator."""
    title, fn = CRITERIA[number]
    rng = np.random.default_rng([seed, number])
    start = time.perf_counter()
    metrics = fn(rng)
    return CriterionResult(number, title, metrics, time.perf_counter() - start)


def _rows(results) -> list:
    return [(r.number, r.title, m.name, m.value, m.threshold, "PASS" if m.ok else "FAIL")
            for r in results for m in r.metrics]


def _serialize(results, seed: int) -> dict[str, str]:
    """Exact file contents for a list of results (criterion 11 compares these)."""
    digest = hashlib.sha256(f"accept seed={seed}".encode()).hexdigest()
    table = csv_text("accept", digest, ("criterion", "title", "metric", "value", "threshold", "verdict"),
                     _rows(results))
    summary = {"seed": seed, "fracwave_command": "accept", "config_sha256": digest,
               "criteria": {str(r.number): {"title": r.title, "verdict": "PASS" if r.passed else "FAIL",
                                            "metrics": {m.name: fmt(m.value) for m in r.metrics}}
                            for r in results}}
    return {"acceptance.csv": table,
            "acceptance.json": json.dumps(summary, indent=2, sort_keys=True) + "\n"}


def run_suite(seed: int = 42) -> list:
    return [run_criterion(n, seed) for n in sorted(CRITERIA)]


def criterion_11(seed: int, first: list | None = None) -> CriterionResult:
    """Rerun criteria 1-10 and compare the serialized artifacts byte for byte."""
    start = time.perf_counter()
    a = _serialize(run_suite(seed) if first is None else first, seed)
    b = _serialize(run_suite(seed), seed)
    same = all(a[name].encode() == b[name].encode() for name in a)
    digest = int(hashlib.sha256("".join(a[n] for n in sorted(a)).encode()).hexdigest()[:12], 16)
    metrics = [Metric("artifacts_identical", float(same), "== 1", same),
               Metric("artifact_digest48", float(digest), "recorded", True)]
    return CriterionResult(11, "determinism", metrics, time.perf_counter() - start)


def run_acceptance(seed: int, out: Path) -> list:
    """Run all criteria, write acceptance.csv / acceptance.json, return the results."""
    results = []
    for n in sorted(CRITERIA):
        res = run_criterion(n, seed)
        print(res.line, flush=True)
        results.append(res)
    det = criterion_11(seed, results)
    print(det.line, flush=True)
    results.append(det)
    files = _serialize(results, seed)
    Path(out).mkdir(parents=True, exist_ok=True)
    for name, body in files.items():
        with open(Path(out) / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
    return results
