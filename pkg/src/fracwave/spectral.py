"""Dirichlet eigenpairs, mode expansions and the spectral fractional operator."""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import NotOrthonormal, QuadratureUnderResolved, ValidationError

__all__ = [
    "DomainKind",
    "Interval",
    "Rectangle",
    "UserSupplied",
    "SpectralDomain",
    "ModeExpansion",
    "make_domain",
    "project",
    "hs_norm",
    "apply_fractional",
    "unit_mode",
    "expansion_to_csv",
    "gauss_legendre_composite",
]

_POINTS_PER_PANEL = 12
_GRAM_TOL = 1e-10


class DomainKind(str, enum.Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"
    USER = "user"


@dataclass(frozen=True)
class Interval:
    """(0, length). ``mode_numbers`` optionally keeps only selected sine modes."""

    length: float
    mode_numbers: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Rectangle:
    lx: float
    ly: float


@dataclass(frozen=True)
class UserSupplied:
    """Eigenpairs computed elsewhere.

    ``eigenfunction(k, x)`` is 1-based in ``k``; ``nodes`` has shape (N,) or
    (N, d) and ``weights`` shape (N,).
    """

    eigenvalues: Sequence[float]
    eigenfunction: Callable[[int, np.ndarray], np.ndarray]
    nodes: np.ndarray
    weights: np.ndarray


def gauss_legendre_composite(a: float, b: float, panels: int, order: int = _POINTS_PER_PANEL):
    """Composite Gauss-Legendre rule on [a, b] with equal panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class SpectralDomain:
    """Eigenpairs of the Dirichlet operator plus a spatial quadrature rule.

    Quadrature nodes are built lazily so domains that keep only a sparse set
    of very high modes stay cheap when no spatial integral is needed.
    """

    kind: DomainKind
    geometry: Interval | Rectangle | UserSupplied
    n_modes: int
    eigenvalues: np.ndarray
    mode_indices: tuple = field(repr=False)
    quad_points: int | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        if self.kind is DomainKind.RECTANGLE:
            return 2
        if self.kind is DomainKind.INTERVAL:
            return 1
        nodes = np.asarray(self.geometry.nodes)
        return 1 if nodes.ndim == 1 else nodes.shape[1]

    @property
    def lambda_1(self) -> float:
        return float(self.eigenvalues[0])

    def eigenfunction(self, k: int, x) -> np.ndarray:
        """Evaluate phi_k (1-based) at points ``x`` ((...,) in 1D, (..., 2) in 2D)."""
        if not 1 <= k <= self.n_modes:
            raise IndexError(f"mode {k} outside 1..{self.n_modes}")
        geo = self.geometry
        if self.kind is DomainKind.INTERVAL:
            m = self.mode_indices[k - 1]
            x = np.asarray(x, dtype=float)
            return math.sqrt(2.0 / geo.length) * np.sin(m * math.pi * x / geo.length)
        if self.kind is DomainKind.RECTANGLE:
            kx, ky = self.mode_indices[k - 1]
            x = np.asarray(x, dtype=float)
            return (2.0 / math.sqrt(geo.lx * geo.ly)
                    * np.sin(kx * math.pi * x[..., 0] / geo.lx)
                    * np.sin(ky * math.pi * x[..., 1] / geo.ly))
        return np.asarray(geo.eigenfunction(k, np.asarray(x, dtype=float)), dtype=float)

    def basis_at(self, x) -> np.ndarray:
        """Matrix of shape (n_modes, npts) with phi_k evaluated at ``x``."""
        return np.stack([self.eigenfunction(k, x) for k in range(1, self.n_modes + 1)])

    @cached_property
    def _quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        geo = self.geometry
        if self.kind is DomainKind.INTERVAL:
            kmax = max(self.mode_indices)
            if self.quad_points is not None:
                panels = max(1, -(-self.quad_points // _POINTS_PER_PANEL))
            else:
                panels = max(1, kmax)
            return gauss_legendre_composite(0.0, geo.length, panels)
        if self.kind is DomainKind.RECTANGLE:
            kx = max(i for i, _ in self.mode_indices)
            ky = max(j for _, j in self.mode_indices)
            xn, xw = gauss_legendre_composite(0.0, geo.lx, kx)
            yn, yw = gauss_legendre_composite(0.0, geo.ly, ky)
            xx, yy = np.meshgrid(xn, yn, indexing="ij")
            nodes = np.stack([xx.ravel(), yy.ravel()], axis=-1)
            weights = np.outer(xw, yw).ravel()
            return nodes, weights
        return np.asarray(geo.nodes, dtype=float), np.asarray(geo.weights, dtype=float)

    @property
    def nodes(self) -> np.ndarray:
        return self._quadrature[0]

    @property
    def weights(self) -> np.ndarray:
        return self._quadrature[1]

    @cached_property
    def basis_at_nodes(self) -> np.ndarray:
        return self.basis_at(self.nodes)

    def evaluate(self, func: Callable, x=None) -> np.ndarray:
        """Apply ``func`` at points using the calling convention of this domain."""
        pts = self.nodes if x is None else np.asarray(x, dtype=float)
        if self.kind is DomainKind.RECTANGLE:
            return np.asarray(func(pts[..., 0], pts[..., 1]), dtype=float) * np.ones(pts.shape[:-1])
        return np.asarray(func(pts), dtype=float) * np.ones(pts.shape if pts.ndim == 1 or self.dim == 1 else pts.shape[:-1])

    def gram_matrix(self) -> np.ndarray:
        b = self.basis_at_nodes
        return (b * self.weights) @ b.T


@dataclass(frozen=True, eq=False)
class ModeExpansion:
    domain: SpectralDomain
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.domain.n_modes,):
            raise ValidationError(f"expected {self.domain.n_modes} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("mode coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: ModeExpansion) -> ModeExpansion:
        return ModeExpansion(self.domain, self.coeffs + other.coeffs)

    def scaled(self, factor: float) -> ModeExpansion:
        return ModeExpansion(self.domain, factor * self.coeffs)

    def reconstruct(self, x) -> np.ndarray:
        """Truncated series sum_k w_k phi_k(x)."""
        return self.coeffs @ self.domain.basis_at(x)

    @classmethod
    def zeros(cls, domain: SpectralDomain) -> ModeExpansion:
        return cls(domain, np.zeros(domain.n_modes))


def _interval_domain(geo: Interval, n_modes: int, quad_points: int | None) -> SpectralDomain:
    if not geo.length > 0:
        raise ValidationError("interval length must be positive")
    if geo.mode_numbers is None:
        ks = tuple(range(1, n_modes + 1))
    else:
        ks = tuple(sorted(int(k) for k in geo.mode_numbers))
        if len(ks) != n_modes or len(set(ks)) != n_modes or ks[0] < 1:
            raise ValidationError("mode_numbers must be n_modes distinct positive integers")
    lam = (np.asarray(ks, dtype=float) * math.pi / geo.length) ** 2
    return SpectralDomain(DomainKind.INTERVAL, geo, n_modes, lam, ks, quad_points)


def _rectangle_domain(geo: Rectangle, n_modes: int) -> SpectralDomain:
    if not (geo.lx > 0 and geo.ly > 0):
        raise ValidationError("rectangle sides must be positive")

    def lam(i, j):
        return math.pi ** 2 * (i * i / geo.lx ** 2 + j * j / geo.ly ** 2)

    kmax = max(2, math.isqrt(n_modes) + 1)
    while True:
        pairs = [(i, j) for i in range(1, kmax + 1) for j in range(1, kmax + 1)]
        pairs.sort(key=lambda p: (lam(*p), p[0], p[1]))
        cut = lam(*pairs[n_modes - 1])
        if cut < min(lam(kmax + 1, 1), lam(1, kmax + 1)):
            break
        kmax *= 2
    chosen = tuple(pairs[:n_modes])
    vals = np.array([lam(*p) for p in chosen])
    return SpectralDomain(DomainKind.RECTANGLE, geo, n_modes, vals, chosen)


def _user_domain(geo: UserSupplied, n_modes: int) -> SpectralDomain:
    lam = np.asarray(geo.eigenvalues, dtype=float)
    if lam.shape != (n_modes,):
        raise ValidationError(f"need {n_modes} eigenvalues, got {lam.shape}")
    if np.any(lam <= 0) or np.any(np.diff(lam) < 0):
        raise ValidationError("eigenvalues must be positive and nondecreasing")
    dom = SpectralDomain(DomainKind.USER, geo, n_modes, lam, tuple(range(1, n_modes + 1)))
    gram = dom.gram_matrix()
    err = float(np.max(np.abs(gram - np.eye(n_modes))))
    if err > _GRAM_TOL:
        raise NotOrthonormal(f"Gram matrix deviates from identity by {err:.3e}")
    return dom


def make_domain(kind: Interval | Rectangle | UserSupplied, n_modes: int,
                quad_points: int | None = None) -> SpectralDomain:
    """Build a spectral domain holding the first ``n_modes`` eigenpairs."""
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    if isinstance(kind, Interval):
        return _interval_domain(kind, n_modes, quad_points)
    if isinstance(kind, Rectangle):
        return _rectangle_domain(kind, n_modes)
    if isinstance(kind, UserSupplied):
        return _user_domain(kind, n_modes)
    raise ValidationError(f"unknown domain kind {kind!r}")


def project(domain: SpectralDomain, func: Callable) -> ModeExpansion:
    """L2 projection onto the stored modes by quadrature."""
    if domain.kind is DomainKind.INTERVAL:
        npts = domain.nodes.shape[0]
        if npts < 10 * max(domain.mode_indices):
            raise QuadratureUnderResolved(
                f"{npts} quadrature nodes cannot resolve mode {max(domain.mode_indices)}")
    vals = domain.evaluate(func)
    coeffs = domain.basis_at_nodes @ (domain.weights * vals)
    return ModeExpansion(domain, coeffs)


def unit_mode(domain: SpectralDomain, k: int) -> ModeExpansion:
    """Coefficient vector e_k (1-based)."""
    c = np.zeros(domain.n_modes)
    c[k - 1] = 1.0
    return ModeExpansion(domain, c)


def hs_norm(w: ModeExpansion, r: float) -> float:
    """(sum_k lambda_k^r w_k^2)^(1/2); negative r gives the dual norm."""
    return float(math.sqrt(math.fsum(w.domain.eigenvalues ** r * w.coeffs ** 2)))


def apply_fractional(domain: SpectralDomain, w: ModeExpansion, s: float) -> ModeExpansion:
    """Coefficients of L^s w, i.e. lambda_k^s w_k."""
    if not 0 < s < 1:
        raise ValidationError("s must lie in (0,1)")
    return ModeExpansion(domain, domain.eigenvalues ** s * w.coeffs)


def expansion_to_csv(w: ModeExpansion) -> str:
    buf = io.StringIO()
    buf.write("k,lambda_k,w_k\n")
    for k, (lam, c) in enumerate(zip(w.domain.eigenvalues, w.coeffs), start=1):
        buf.write(f"{k},{lam:.17g},{c:.17g}\n")
    return buf.getvalue()
