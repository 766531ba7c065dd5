from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracwave.errors import NotOrthonormal, QuadratureUnderResolved, ValidationError
from fracwave.spectral import (DomainKind, Interval, ModeExpansion, Rectangle, UserSupplied, apply_fractional,
                               expansion_to_csv, hs_norm, make_domain, project, unit_mode)


@pytest.fixture(scope="module")
def interval():
    return make_domain(Interval(math.pi), 8)


def test_interval_eigenpairs(interval):
    assert interval.eigenvalues[2] == pytest.approx(9.0, abs=1e-14)
    x = np.linspace(0.0, math.pi, 11)
    assert np.allclose(interval.eigenfunction(3, x), math.sqrt(2 / math.pi) * np.sin(3 * x), atol=1e-15)
    assert make_domain(Interval(1.0), 1).lambda_1 == pytest.approx(math.pi ** 2, rel=1e-15)


def test_rectangle_first_eigenvalue():
    dom = make_domain(Rectangle(math.pi, math.pi), 5)
    assert dom.kind is DomainKind.RECTANGLE
    assert dom.lambda_1 == pytest.approx(2.0, abs=1e-14)
    assert np.all(np.diff(dom.eigenvalues) >= 0)
    assert np.allclose(dom.gram_matrix(), np.eye(5), atol=1e-12)


def test_sparse_mode_numbers():
    dom = make_domain(Interval(math.pi, mode_numbers=(2, 5, 11)), 3)
    assert np.allclose(dom.eigenvalues, [4.0, 25.0, 121.0])
    assert np.allclose(dom.gram_matrix(), np.eye(3), atol=1e-12)


def test_project_unit_mode(interval):
    w = project(interval, lambda x: interval.eigenfunction(2, x))
    assert np.allclose(w.coeffs, np.eye(8)[1], atol=1e-10)


def test_project_parabola(interval):
    w = project(interval, lambda x: x * (math.pi - x))
    k = np.arange(1, 9)
    exact = math.sqrt(2 / math.pi) * 2.0 * (1 - (-1.0) ** k) / k ** 3
    assert np.allclose(w.coeffs, exact, atol=1e-12)


def test_project_zero(interval):
    assert np.all(project(interval, lambda x: 0.0 * x).coeffs == 0.0)
    rect = make_domain(Rectangle(1.0, 2.0), 4)
    assert np.allclose(project(rect, lambda x, y: 0.0 * x).coeffs, 0.0)


def test_under_resolved_projection():
    dom = make_domain(Interval(math.pi), 6, quad_points=24)
    with pytest.raises(QuadratureUnderResolved):
        project(dom, np.sin)


def test_hs_norm_examples(interval):
    e1 = unit_mode(interval, 1)
    for r in (-1.0, 0.0, 0.7, 2.0):
        assert hs_norm(e1, r) == pytest.approx(1.0)
    assert hs_norm(unit_mode(interval, 3), 1.0) == pytest.approx(3.0)
    two = make_domain(Interval(math.pi), 2)
    assert hs_norm(ModeExpansion(two, np.array([1.0, 1.0])), -0.5) == pytest.approx(math.sqrt(1.5))


def test_apply_fractional_examples(interval):
    w = apply_fractional(interval, unit_mode(interval, 2), 0.5)
    assert w.coeffs[1] == pytest.approx(2.0, abs=1e-14)
    assert np.all(apply_fractional(interval, ModeExpansion.zeros(interval), 0.3).coeffs == 0.0)
    with pytest.raises(ValidationError):
        apply_fractional(interval, unit_mode(interval, 1), 1.0)


def test_user_supplied_gram_check():
    nodes = np.linspace(0.0, 1.0, 201)
    weights = np.full(201, 1.0 / 200)
    weights[[0, -1]] *= 0.5
    bad = UserSupplied([1.0, 4.0], lambda k, x: np.ones_like(x), nodes, weights)
    with pytest.raises(NotOrthonormal):
        make_domain(bad, 2)


def test_user_supplied_matches_interval():
    ref = make_domain(Interval(math.pi), 4)
    user = UserSupplied(list(ref.eigenvalues), ref.eigenfunction, ref.nodes, ref.weights)
    dom = make_domain(user, 4)
    w = project(dom, lambda x: x * (math.pi - x))
    assert np.allclose(w.coeffs, project(ref, lambda x: x * (math.pi - x)).coeffs, atol=1e-14)


def test_csv_round_trip(interval):
    w = project(interval, lambda x: np.sin(x) + 0.25 * np.sin(4 * x))
    lines = expansion_to_csv(w).strip().splitlines()
    assert lines[0] == "k,lambda_k,w_k"
    back = np.array([float(line.split(",")[2]) for line in lines[1:]])
    assert np.array_equal(back, w.coeffs)


@given(a=st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3))
def test_property_parseval(a):
    dom = make_domain(Interval(math.pi), 12)
    func = lambda x: a[0] * x * (math.pi - x) + a[1] * np.sin(2 * x) * x + a[2] * np.sin(3 * x) ** 3
    w = project(dom, func)
    recon = w.reconstruct(dom.nodes)
    l2 = math.sqrt(float(np.sum(dom.weights * recon ** 2)))
    assert hs_norm(w, 0.0) == pytest.approx(l2, abs=1e-8)


@given(k=st.integers(1, 8), s=st.floats(0.01, 0.99))
def test_property_diagonal(k, s):
    dom = make_domain(Interval(math.pi), 8)
    w = apply_fractional(dom, project(dom, lambda x: dom.eigenfunction(k, x)), s)
    expected = np.zeros(8)
    expected[k - 1] = dom.eigenvalues[k - 1] ** s
    assert np.max(np.abs(w.coeffs - expected)) <= 1e-12 * max(1.0, expected[k - 1])


@given(c=st.lists(st.floats(-10.0, 10.0), min_size=6, max_size=6), s=st.floats(0.01, 0.99))
def test_property_isometry(c, s):
    dom = make_domain(Rectangle(1.0, 1.5), 6)
    w = ModeExpansion(dom, np.array(c))
    assert hs_norm(apply_fractional(dom, w, s), -s) == pytest.approx(hs_norm(w, s), rel=1e-12, abs=1e-300)
