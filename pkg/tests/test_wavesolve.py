from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracwave.errors import ValidationError
from fracwave.mlfunc import ml_array, ml_value
from fracwave.spectral import Interval, ModeExpansion, make_domain, project, unit_mode
from fracwave.wavesolve import (ZERO_FORCING, FracWaveProblem, constant_forcing, energy_report, evaluate_solution,
                                mode_caputo, mode_coefficients, mode_derivative, polynomial_forcing, residual_check,
                                sine_forcing, solve_mode, volterra_residual)


def forcing_from(spec: dict):
    args = [float(a) for a in spec["args"]]
    return {"const": lambda: constant_forcing(*args), "sine": lambda: sine_forcing(*args),
            "poly": lambda: polynomial_forcing(args)}[spec["kind"]]()


def single_mode(gamma, s=0.5, g=1.0, h=0.0, forcing=None, n_modes=1, length=math.pi, T=2.0):
    dom = make_domain(Interval(length), n_modes)
    gv = np.zeros(n_modes)
    hv = np.zeros(n_modes)
    gv[0], hv[0] = g, h
    fm = None if forcing is None else (forcing,) + (ZERO_FORCING,) * (n_modes - 1)
    return FracWaveProblem(dom, s, gamma, T, ModeExpansion(dom, gv), ModeExpansion(dom, hv), fm)


def test_gamma2_cosine():
    t = np.linspace(0.0, 3.0, 31)
    assert np.allclose(mode_derivative(2.0, 4.0, 1.0, 0.0, ZERO_FORCING, t), np.cos(2 * t), atol=1e-14)


def test_free_mode_is_mittag_leffler():
    t = np.linspace(0.0, 3.0, 31)
    got = mode_derivative(1.5, 1.0, 1.0, 0.0, ZERO_FORCING, t)
    assert np.allclose(got, ml_array(1.5, 1.0, -t ** 1.5), atol=1e-14)


@pytest.mark.parametrize("gamma", [1.2, 1.5, 1.9])
def test_zero_lambda_probe(gamma):
    t = np.linspace(0.05, 2.0, 9)
    got = mode_derivative(gamma, 0.0, 0.0, 0.0, constant_forcing(1.0), t)
    assert np.allclose(got, t ** gamma / math.gamma(gamma + 1), rtol=1e-12)


def test_constant_forcing_series_oracle():
    mp.mp.dps = 40
    t = np.array([0.2, 0.9, 2.5])
    got = mode_derivative(1.5, 2.0, 0.0, 0.0, constant_forcing(1.0), t)
    for tt, v in zip(t, got):
        x = mp.mpf(tt) ** mp.mpf(1.5)
        ref = x * mp.nsum(lambda k: (-2 * x) ** k / mp.gamma(1.5 * k + 2.5), [0, mp.inf])
        assert abs(v - float(ref)) <= 1e-12


def test_frozen_wave_oracle(wave_oracle):
    worst = 0.0
    for row in wave_oracle["rows"]:
        args = (float(row["gamma"]), float(row["lam_s"]), float(row["g"]), float(row["h"]),
                forcing_from(row["f"]), np.array([float(row["t"])]))
        for q, key in ((0, "u"), (1, "du")):
            ref = float(row[key])
            worst = max(worst, abs(float(mode_derivative(*args, q)[0]) - ref) / max(1.0, abs(ref)))
    assert worst <= 1e-10


def test_evaluate_solution_examples():
    prob = single_mode(1.5, n_modes=3)
    x = np.linspace(0.1, 3.0, 7)
    phi1 = prob.domain.eigenfunction(1, x)
    assert np.allclose(evaluate_solution(prob, x, 1.0), ml_value(1.5, 1.0, -1.0) * phi1, atol=1e-14)
    assert np.allclose(evaluate_solution(prob, x, 0.0), phi1, atol=1e-14)
    dom = prob.domain
    zero = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion.zeros(dom), ModeExpansion.zeros(dom))
    assert np.all(evaluate_solution(zero, x, 0.7) == 0.0)


def test_t0_reconstructs_projection():
    dom = make_domain(Interval(math.pi), 16)
    g = project(dom, lambda x: x * (math.pi - x))
    prob = FracWaveProblem(dom, 0.4, 1.7, 1.0, g, ModeExpansion.zeros(dom))
    x = np.linspace(0.2, 2.9, 9)
    assert np.allclose(evaluate_solution(prob, x, 0.0), g.reconstruct(x), atol=1e-14)
    # odd-mode sine tail beyond k = 16 is below 8/pi * sum_{k>=17} k^-3 < 0.01
    assert np.allclose(evaluate_solution(prob, x, 0.0), x * (math.pi - x), atol=1e-2)


def test_residual_examples():
    t = np.linspace(0.01, 2.0, 25)
    assert residual_check(single_mode(1.5, s=0.5), 1, t) <= 1e-9
    assert residual_check(single_mode(1.5, g=0.0, forcing=sine_forcing()), 1, t) <= 1e-7
    assert residual_check(single_mode(2.0, g=0.4, h=-1.1, forcing=sine_forcing(0.8, 2.0)), 1, t) <= 1e-9


@pytest.mark.parametrize("gamma, forcing", [(1.5, sine_forcing()), (1.3, polynomial_forcing([1.0, -0.5, 0.2])),
                                            (1.8, constant_forcing(2.0))])
def test_volterra_residual_independent_check(gamma, forcing):
    prob = single_mode(gamma, g=0.7, h=-0.3, forcing=forcing, s=0.6)
    assert volterra_residual(prob, 1, np.array([1.0, 2.0])) <= 1e-7


def test_caputo_identity_free_mode():
    t = np.linspace(0.05, 2.0, 9)
    cap = mode_caputo(1.5, 3.0, 1.0, 0.0, ZERO_FORCING, t)
    assert np.allclose(cap, -3.0 * ml_array(1.5, 1.0, -3.0 * t ** 1.5), atol=1e-13)


def test_energy_report_examples():
    t = np.linspace(0.0, 2.0, 41)
    rep = energy_report(single_mode(2.0, s=0.5), t)
    assert rep.ratio <= 1.0 + 1e-6
    rep = energy_report(single_mode(1.5, s=0.5), t)
    assert math.isfinite(rep.ratio) and rep.ratio <= 10.0
    dom = make_domain(Interval(math.pi), 2)
    zero = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion.zeros(dom), ModeExpansion.zeros(dom))
    assert energy_report(zero, t).ratio == 0.0


def test_problem_validation():
    dom = make_domain(Interval(math.pi), 2)
    z = ModeExpansion.zeros(dom)
    with pytest.raises(ValidationError):
        FracWaveProblem(dom, 0.5, 2.5, 1.0, z, z)
    with pytest.raises(ValidationError):
        FracWaveProblem(dom, 1.0, 1.5, 1.0, z, z)
    with pytest.raises(ValidationError):
        FracWaveProblem(dom, 0.5, 1.5, 1.0, z, z, (ZERO_FORCING,))


def test_gamma_continuity_near_two():
    near = mode_derivative(2.0 - 1e-3, 1.0, 1.0, 0.0, ZERO_FORCING, np.array([1.0]))[0]
    assert abs(near - math.cos(1.0)) <= 5e-3


def test_mode_decay_envelope():
    dom = make_domain(Interval(math.pi), 12)
    prob = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion(dom, np.ones(12)), ModeExpansion.zeros(dom))
    for t in (0.1, 0.5, 1.0):
        u = mode_coefficients(prob, t)
        c = np.max(np.abs(u) * (1 + prob.lam_s * t ** 1.5))
        assert c <= 2.1


@given(gamma=st.floats(1.05, 2.0), lam=st.floats(0.1, 50.0), g=st.floats(-3, 3), h=st.floats(-3, 3))
def test_property_initial_conditions(gamma, lam, g, h):
    zero = np.array([0.0])
    assert mode_derivative(gamma, lam, g, h, ZERO_FORCING, zero, 0)[0] == pytest.approx(g, abs=1e-14)
    assert mode_derivative(gamma, lam, g, h, ZERO_FORCING, zero, 1)[0] == pytest.approx(h, abs=1e-12)


@given(gamma=st.floats(1.05, 1.98), lam=st.floats(0.1, 20.0), g=st.floats(-2, 2), h=st.floats(-2, 2),
       a=st.floats(-2, 2))
def test_property_superposition(gamma, lam, g, h, a):
    t = np.array([0.3, 1.1, 2.0])
    f = sine_forcing(a, 1.3)
    whole = mode_derivative(gamma, lam, g, h, f, t)
    parts = (mode_derivative(gamma, lam, g, 0.0, ZERO_FORCING, t) + mode_derivative(gamma, lam, 0.0, h, ZERO_FORCING, t)
             + mode_derivative(gamma, lam, 0.0, 0.0, f, t))
    assert np.allclose(whole, parts, rtol=0, atol=1e-10)


def test_solve_mode_trajectory():
    prob = single_mode(1.6, g=0.5, h=1.0, forcing=constant_forcing(1.0), n_modes=2)
    traj = solve_mode(prob, 1)
    t = np.array([0.4, 1.2])
    assert np.allclose(traj.u(t), mode_derivative(1.6, 1.0, 0.5, 1.0, constant_forcing(1.0), t))
    assert np.allclose(mode_coefficients(prob, 1.2)[0], traj.u(np.array([1.2]))[0])
