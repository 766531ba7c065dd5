from __future__ import annotations

import math

import numpy as np
import pytest

from fracwave.errors import DegenerateFit, OutOfRange, ValidationError
from fracwave.extension import ExtensionField
from fracwave.reglab import (blowup_theory, broadband_mode_numbers, data_norms, extension_trace_derivative,
                             fit_blowup_exponent, mode_history, solution_operator_bound_check,
                             space_regularity_fit, space_time_regularity_check, weighted_time_norm)
from fracwave.spectral import Interval, ModeExpansion, make_domain, unit_mode
from fracwave.wavesolve import FracWaveProblem, constant_forcing, mode_derivative, sine_forcing


def g_problem(gamma, s=0.5, n_modes=1, g=None):
    dom = make_domain(Interval(math.pi), n_modes)
    gv = unit_mode(dom, 1) if g is None else ModeExpansion(dom, np.asarray(g, dtype=float))
    return FracWaveProblem(dom, s, gamma, 1.0, gv, ModeExpansion.zeros(dom))


def broadband_h_problem(gamma, s=0.5):
    ks = broadband_mode_numbers(gamma, s)
    dom = make_domain(Interval(math.pi, ks), len(ks))
    return FracWaveProblem(dom, s, gamma, 1.0, ModeExpansion.zeros(dom), ModeExpansion(dom, np.ones(len(ks))))


# ---------------------------------------------------------------- operator bounds

def test_operator_bound_examples():
    dom = make_domain(Interval(math.pi), 4)
    t = np.geomspace(1e-4, 1.0, 40)
    res = solution_operator_bound_check(dom, 0.5, 1.5, 0.0, 1, t, unit_mode(dom, 1))
    for key in ("G_ratio", "H_ratio", "H_ratio_half"):
        assert 0.0 < res[key] < 10.0
    zero = solution_operator_bound_check(dom, 0.5, 1.5, 0.0, 1, t, ModeExpansion.zeros(dom))
    assert zero["G_ratio"] == zero["H_ratio"] == zero["H_ratio_half"] == 0.0
    near_two = solution_operator_bound_check(dom, 0.5, 2.0 - 1e-3, 0.0, 1, t, unit_mode(dom, 1))
    assert math.isfinite(near_two["G_ratio"])


@pytest.mark.parametrize("q", [1, 2, 3])
def test_operator_bound_uniform_in_modes(q):
    # ratios stay bounded when the same data is pushed to higher frequencies
    dom = make_domain(Interval(math.pi), 40)
    t = np.geomspace(1e-4, 1.0, 30)
    worst = [solution_operator_bound_check(dom, 0.4, 1.6, 0.0, q, t, unit_mode(dom, k))["G_ratio"]
             for k in (1, 10, 40)]
    assert max(worst) < 20.0


def test_operator_bound_validation():
    dom = make_domain(Interval(math.pi), 2)
    with pytest.raises(ValidationError):
        solution_operator_bound_check(dom, 0.5, 1.5, 0.0, 4, [0.5], unit_mode(dom, 1))
    with pytest.raises(ValidationError):
        solution_operator_bound_check(dom, 0.5, 1.5, 0.9, 1, [0.5], unit_mode(dom, 1))


def test_mode_history_matches_solver():
    prob = g_problem(1.4, n_modes=3, g=[1.0, -0.5, 0.2])
    t = np.array([0.1, 0.6])
    D = mode_history(prob, t, 2)
    for k in range(3):
        ref = mode_derivative(1.4, float(prob.lam_s[k]), float(prob.g.coeffs[k]), 0.0, prob.forcing(k + 1), t, 2)
        assert np.allclose(D[k], ref, rtol=1e-13, atol=1e-300)


# ---------------------------------------------------------------- blow-up exponents

@pytest.mark.parametrize("gamma", [1.25, 1.5, 1.75])
def test_g_data_slopes(gamma):
    prob = g_problem(gamma)
    fit2 = fit_blowup_exponent(prob, 2, 0.0)
    assert fit2.exponent_hat == pytest.approx(gamma - 2, abs=0.05)
    assert fit2.r2 >= 0.99 and fit2.n_points >= 8
    fit3 = fit_blowup_exponent(prob, 3, -0.5)
    assert fit3.exponent_hat == pytest.approx(gamma - 3, abs=0.05)


@pytest.mark.parametrize("gamma", [1.25, 1.5, 1.75])
def test_h_data_slope_broadband(gamma):
    fit = fit_blowup_exponent(broadband_h_problem(gamma), 3, -0.5)
    assert fit.exponent_hat == pytest.approx(gamma / 2 - 2, abs=0.05)
    assert blowup_theory(gamma, 3, "h") == gamma / 2 - 2


def test_single_mode_h_slope_is_gamma_minus_two():
    # one mode of initial velocity only shows the single-mode rate t^(gamma-2)
    dom = make_domain(Interval(math.pi), 1)
    prob = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion.zeros(dom), unit_mode(dom, 1))
    assert fit_blowup_exponent(prob, 3, -0.5).exponent_hat == pytest.approx(1.5 - 2, abs=0.05)


def test_blowup_errors():
    prob = g_problem(1.5)
    with pytest.raises(ValidationError):
        fit_blowup_exponent(prob, 1)
    with pytest.raises(ValidationError):
        fit_blowup_exponent(prob, 2, n_points=5)
    dom = prob.domain
    zero = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion.zeros(dom), ModeExpansion.zeros(dom))
    with pytest.raises(DegenerateFit):
        fit_blowup_exponent(zero, 2)


# ---------------------------------------------------------------- weighted time norms

@pytest.mark.parametrize("gamma", [1.25, 1.5, 1.75])
def test_weighted_threshold(gamma):
    prob = g_problem(gamma)
    above = weighted_time_norm(prob, 5 - 2 * gamma + 0.2)
    below = weighted_time_norm(prob, 5 - 2 * gamma - 0.2)
    assert above.finite and math.isfinite(above.value) and above.value > 0
    assert not below.finite and below.value == math.inf
    assert below.endpoint_exponent == pytest.approx(5 - 2 * gamma - 0.2 + 2 * gamma - 6)
    assert "diverges" in below.diagnosis


def test_weighted_value_against_data():
    prob = g_problem(1.5)
    res = weighted_time_norm(prob, 2.2)
    assert res.endpoint_exponent == pytest.approx(-0.8)
    assert 0.0 < res.ratio < 100.0
    # refine the graded rule: the value is converged
    fine = weighted_time_norm(prob, 2.2, levels=96, n=16)
    assert fine.value == pytest.approx(res.value, rel=1e-12)


def test_weighted_forcing_only_finite():
    dom = make_domain(Interval(math.pi), 2)
    zero = ModeExpansion.zeros(dom)
    prob = FracWaveProblem(dom, 0.5, 1.5, 1.0, zero, zero, (sine_forcing(1.0, 2.0), constant_forcing(0.5)))
    res = weighted_time_norm(prob, 2.2)
    assert res.finite and res.value > 0
    assert data_norms(prob).f_norm_H2dual > 0


def test_weighted_zero_data():
    dom = make_domain(Interval(math.pi), 2)
    zero = ModeExpansion.zeros(dom)
    res = weighted_time_norm(FracWaveProblem(dom, 0.5, 1.5, 1.0, zero, zero), 2.2)
    assert res.value == 0.0 and res.ratio == 0.0


def test_data_norms():
    dom = make_domain(Interval(math.pi), 2)
    prob = FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion(dom, np.array([0.0, 1.0])),
                           ModeExpansion(dom, np.array([3.0, 4.0])))
    d = data_norms(prob)
    assert d.g_norm_s == pytest.approx(math.sqrt(2.0))
    assert d.g_norm_2s == pytest.approx(2.0)
    assert d.h_norm_0 == pytest.approx(5.0)
    assert d.f_norm_H2dual == 0.0


# ---------------------------------------------------------------- space regularity

def test_space_fit_s_half_closed_form():
    fld = ExtensionField(g_problem(1.5, s=0.5), 0.0, 0.0)
    fit = space_regularity_fit(fld, 0.0, 0.5, 4)
    for v in ("dy", "grad_dy", "L_dy"):
        assert max(fit.normalized[v]) <= 1.0 + 1e-12
        assert max(fit.normalized[v]) == pytest.approx(1.0, rel=1e-12)
    # lambda_1 = 1, sigma = 0: the weight exponent is beta = -2, so Psi_{ell+1} = Gamma(2 ell + 1) / 2^(2 ell + 1)
    ukl2 = fit.norms["dy"][0] / 0.5
    for ell, n in zip(fit.ells, fit.norms["dy"]):
        assert n == pytest.approx(ukl2 * math.gamma(2 * ell + 1) / 2 ** (2 * ell + 1), rel=1e-9)


def test_space_fit_two_modes():
    fld = ExtensionField(g_problem(1.5, s=0.3, n_modes=2, g=[1.0, 1.0]), 0.0, 0.0)
    fit = space_regularity_fit(fld, 0.1, 0.5, 3)
    assert fit.ells == (0, 1, 2, 3)
    for v in ("dy", "grad_dy", "L_dy"):
        assert all(0.0 < x <= 1.0 + 1e-12 for x in fit.normalized[v])
    assert fit.kappa_hat_1 > 0 and fit.kappa_hat_2 > 0 and fit.kappa_hat_3 > 0


def test_space_fit_sigma_limit_probe():
    fld = ExtensionField(g_problem(1.5, s=0.3), 0.0, 0.0)
    near = space_regularity_fit(fld, 0.3 - 1e-3, 0.5, 2)
    far = space_regularity_fit(fld, 0.0, 0.5, 2)
    assert all(math.isfinite(x) for x in near.norms["dy"])
    assert near.norms["dy"][2] > far.norms["dy"][2]


def test_space_fit_out_of_range():
    fld = ExtensionField(g_problem(1.5, s=0.3), 0.0, 0.0)
    with pytest.raises(OutOfRange):
        space_regularity_fit(fld, 0.3, 0.5, 2)
    with pytest.raises(OutOfRange):
        space_regularity_fit(fld, 0.1, 1.3, 2)


@pytest.mark.parametrize("gamma", [1.5, 2.0])
def test_space_fit_bounded_over_variants(gamma):
    dom = make_domain(Interval(math.pi), 3)
    prob = FracWaveProblem(dom, 0.7, gamma, 1.0, ModeExpansion(dom, np.array([1.0, 0.5, 0.25])),
                           ModeExpansion(dom, np.array([0.0, 0.3, 0.0])), (constant_forcing(1.0),) * 3)
    fit = space_regularity_fit(ExtensionField(prob, 0.0, 0.5), 0.35, 0.5, 4)
    assert max(max(v) for v in fit.normalized.values()) <= 1.0 + 1e-12


def test_space_time_examples():
    fld = ExtensionField(g_problem(1.5), 0.0, 0.0)
    res = space_time_regularity_check(fld, 0.0, 0.5, 2.2, 0)
    assert res.finite and math.isfinite(res.norms[0]) and res.norms[0] > 0
    bad = space_time_regularity_check(fld, 0.0, 0.5, 1.8, 0)
    assert not bad.finite and bad.norms[0] == math.inf
    dom = fld.problem.domain
    zero = ExtensionField(FracWaveProblem(dom, 0.5, 1.5, 1.0, ModeExpansion.zeros(dom), ModeExpansion.zeros(dom)))
    res = space_time_regularity_check(zero, 0.0, 0.5, 2.2, 2)
    assert all(n == 0.0 for n in res.norms)


def test_extension_trace_transfer():
    prob = g_problem(1.6, s=0.4, n_modes=4, g=[1.0, 0.3, -0.2, 0.1])
    fld = ExtensionField(prob, 0.0, 0.0)
    for t in (0.05, 0.5, 1.0):
        assert np.array_equal(extension_trace_derivative(fld, t, 3), mode_history(prob, np.array([t]), 3)[:, 0])


def test_broadband_modes_span_scales():
    ks = broadband_mode_numbers(1.5, 0.5)
    assert ks == tuple(sorted(set(ks)))
    lam_s = np.array(ks, dtype=float) ** 2 ** 0.5
    assert lam_s.max() / lam_s.min() > 1e6
