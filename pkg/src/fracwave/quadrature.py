"""Quadrature rules for integrands with algebraic endpoint behaviour."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = ["legendre01", "jacobi01", "graded_edges", "singular_rule", "two_sided_rule"]


@lru_cache(maxsize=128)
def legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def jacobi01(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi rule for int_0^1 x^beta F(x) dx (beta > -1)."""
    if beta == 0.0:
        return legendre01(n)
    x, w = special.roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w * 2.0 ** (-(beta + 1.0))


def graded_edges(length: float, levels: int, ratio: float = 0.5) -> np.ndarray:
    """Panel edges 0 < L r^levels < ... < L r < L, geometrically refined toward 0."""
    inner = length * ratio ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], inner, [length]])


def singular_rule(length: float, expo: float, levels: int = 24, n: int = 12,
                  scale: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for int_0^length x^expo F(x) dx.

    The first panel carries the weight x^expo exactly (Gauss-Jacobi); the
    remaining panels are geometric and use Gauss-Legendre with the weight
    folded in.  ``scale`` caps panel length so oscillations on that scale
    are resolved.
    """
    if length <= 0:
        return np.zeros(0), np.zeros(0)
    edges = graded_edges(length, levels)
    if scale is not None and scale > 0:
        refined = [edges[0]]
        for a, b in zip(edges[:-1], edges[1:]):
            m = max(1, math.ceil((b - a) / scale))
            refined.extend(np.linspace(a, b, m + 1)[1:])
        edges = np.asarray(refined)
    xj, wj = jacobi01(n, expo)
    a0 = edges[1]
    nodes = [a0 * xj]
    weights = [wj * a0 ** (expo + 1.0)]
    xl, wl = legendre01(n)
    a, b = edges[1:-1], edges[2:]
    h = (b - a)[:, None]
    x = a[:, None] + h * xl[None, :]
    nodes.append(x.ravel())
    weights.append((h * wl[None, :] * x ** expo).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def two_sided_rule(length: float, left_expo: float, right_expo: float, levels: int = 24,
                   n: int = 12, scale: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Rule for int_0^L x^left_expo (L-x)^right_expo F(x) dx, graded at both ends."""
    half = 0.5 * length
    xl, wl = singular_rule(half, left_expo, levels, n, scale)
    xr, wr = singular_rule(half, right_expo, levels, n, scale)
    left = np.concatenate([xl, length - xr])
    w = np.concatenate([wl * (length - xl) ** right_expo, wr * (length - xr) ** left_expo])
    return left, w
