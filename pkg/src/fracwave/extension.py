"""Caffarelli-Silvestre extension: Bessel-K profiles, energy and weighted integrals.

The extended field is U(x', y, t) = sum_k u_k(t) phi_k(x') psi_k(y) with
psi_k(y) = psi(sqrt(lambda_k) y) and psi(z) = c_s z^s K_s(z).  Everything
below is computed from closed forms for K_nu and its order recurrences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ExtrapolationDivergence, NonIntegrable, QuadratureFailure, ValidationError
from .quadrature import legendre01, singular_rule
from .spectral import ModeExpansion, hs_norm
from .wavesolve import FracWaveProblem, mode_coefficients

__all__ = [
    "BesselUnderflowWarning",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_k_branch",
    "ExtensionProfile",
    "psi",
    "psi_prime",
    "psi_derivative",
    "conormal_limit",
    "mode_energy",
    "ExtensionField",
    "evaluate_extension",
    "trace_norm_identity",
    "phi_integral",
    "psi_integral",
    "FactorialFit",
    "factorial_growth_fit",
    "poincare_ratio",
    "THETA_SAFETY",
]

_EPS = np.finfo(float).eps
_EULER = 0.57721566490153286061
_TEMME_MAX_Z = 2.0
_MAX_ITER = 20000
THETA_SAFETY = 0.95


class BesselUnderflowWarning(RuntimeWarning):
    """K_nu(z) fell below the double range and was returned as 0."""


# ---------------------------------------------------------------- Bessel K

@lru_cache(maxsize=256)
def _gamma_factors(mu: float) -> tuple[float, float, float, float]:
    """(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2.

    Uses log Gamma(1+x) = -euler x + sum_{k>=2} (-1)^k zeta(k) x^k / k, split
    into even and odd parts so that gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
    carries no cancellation as mu -> 0.
    """
    from scipy.special import zeta

    even = [0.0]
    odd = [_EULER * mu]
    for k in range(2, 80):
        term = float(zeta(k)) * mu ** k / k
        if k % 2 == 0:
            even.append(-term)
        else:
            odd.append(term)
        if abs(term) < 1e-18:
            break
    e = math.fsum(even)
    o = math.fsum(odd)
    ee = math.exp(e)
    # sinh(o)/mu with o = mu * (euler + ...)
    if mu == 0.0:
        gam1 = -_EULER
    else:
        gam1 = -ee * math.sinh(o) / mu
    gam2 = ee * math.cosh(o)
    return gam1, gam2, math.exp(e + o), math.exp(e - o)


def _pair_temme(mu: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled e^z K_mu(z), e^z K_{mu+1}(z) by Temme's series, |mu| <= 1/2."""
    gam1, gam2, gampl, gammi = _gamma_factors(mu)
    x2 = 0.5 * z
    d = -np.log(x2)
    e = mu * d
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
    small = np.abs(e) < 1e-4
    fact2 = np.where(small, 1.0 + e * e / 6.0, np.sinh(e) / np.where(small, 1.0, e))
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ex = np.exp(e)
    p = 0.5 * ex / gampl
    q = 0.5 / (ex * gammi)
    c = np.ones_like(z)
    dd = x2 * x2
    total1 = p.copy()
    mu2 = mu * mu
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if np.all(np.abs(delta) <= np.abs(total) * _EPS):
            break
    else:  # pragma: no cover - the series converges for z <= 2 in < 40 terms
        raise DomainError("Temme series for K did not converge")
    scale = np.exp(z)
    return total * scale, total1 * (2.0 / z) * scale


def _pair_steed(mu: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled e^z K_mu(z), e^z K_{mu+1}(z) by Steed's continued fraction."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25 - mu * mu
    q = np.full_like(z, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAX_ITER):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) <= np.abs(s) * _EPS):
            break
    else:
        raise DomainError("continued fraction for K did not converge")
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * z)) / s
    k1 = kmu * (mu + z + 0.5 - h) / z
    return kmu, k1


def _pair_scaled(mu: float, z: np.ndarray, branch: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Scaled pair (K_mu, K_{mu+1}) choosing the branch by z unless forced."""
    if branch == "series":
        return _pair_temme(mu, z)
    if branch == "fraction":
        return _pair_steed(mu, z)
    k0 = np.empty_like(z)
    k1 = np.empty_like(z)
    lo = z <= _TEMME_MAX_Z
    if np.any(lo):
        k0[lo], k1[lo] = _pair_temme(mu, z[lo])
    if np.any(~lo):
        k0[~lo], k1[~lo] = _pair_steed(mu, z[~lo])
    return k0, k1


def _check_z(z) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(~np.isfinite(zz)) or np.any(zz <= 0.0):
        raise DomainError("bessel_k requires finite z > 0")
    return zz, scalar


def _orders_scaled(nu: float, zz: np.ndarray, count: int, branch: str | None = None) -> list[np.ndarray]:
    """Scaled K at orders |nu|, |nu|+1, ..., |nu|+count-1 via upward recurrence."""
    nu = abs(float(nu))
    n = int(math.floor(nu + 0.5))
    mu = nu - n
    km, kp = _pair_scaled(mu, zz, branch)
    orders = [km, kp]
    order = mu + 1.0
    while len(orders) < n + count:
        orders.append(orders[-2] + (2.0 * order / zz) * orders[-1])
        order += 1.0
    return orders[n:n + count]


def bessel_k_scaled(nu: float, z) -> np.ndarray | float:
    """e^z K_nu(z) for real order nu and z > 0."""
    zz, scalar = _check_z(z)
    out = _orders_scaled(nu, zz, 1)[0]
    return float(out[0]) if scalar else out


def bessel_k_branch(nu: float, z, branch: str) -> np.ndarray | float:
    """K_nu(z) from one named branch: 'series' (Temme) or 'fraction' (Steed)."""
    if branch not in ("series", "fraction"):
        raise ValueError("branch must be 'series' or 'fraction'")
    zz, scalar = _check_z(z)
    out = _orders_scaled(nu, zz, 1, branch)[0] * np.exp(-zz)
    return float(out[0]) if scalar else out


def bessel_k(nu: float, z) -> np.ndarray | float:
    """Modified Bessel function of the second kind K_nu(z), z > 0.

    Values below the double range are returned as 0 with a
    BesselUnderflowWarning.
    """
    zz, scalar = _check_z(z)
    scaled = _orders_scaled(nu, zz, 1)[0]
    with np.errstate(under="ignore"):
        out = scaled * np.exp(-zz)
    if np.any((out < np.finfo(float).tiny) & (scaled > 0)):
        warnings.warn("K_nu(z) underflows for large z; returning 0", BesselUnderflowWarning,
                      stacklevel=2)
        out = np.where(out < np.finfo(float).tiny, 0.0, out)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------- profiles

@dataclass(frozen=True)
class ExtensionProfile:
    """Extension profile for one eigenvalue: psi(y) = c_s (sqrt(lam) y)^s K_s(sqrt(lam) y)."""

    s: float
    lam: float

    def __post_init__(self) -> None:
        if not (0.0 < self.s < 1.0):
            raise ValidationError("s must lie in (0,1)")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValidationError("lambda must be positive and finite")

    @property
    def alpha(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def c_s(self) -> float:
        return 2.0 ** (1.0 - self.s) / math.gamma(self.s)

    @property
    def d_s(self) -> float:
        return 2.0 ** self.alpha * math.gamma(1.0 - self.s) / math.gamma(self.s)

    @property
    def sqrt_lam(self) -> float:
        return math.sqrt(self.lam)


@lru_cache(maxsize=64)
def _derivative_terms(s: float, ell: int) -> tuple[tuple[float, int, float], ...]:
    """d^ell/dz^ell [c_s z^s K_s(z)] as sum coef * z^(s-i) * K_{s-j}(z).

    Uses d/dz[z^a K_b] = (a-b) z^(a-1) K_b - z^a K_(b-1).  Returned as
    (coef, i, j) with the power a = s - i and order b = s - j.
    """
    terms: dict[tuple[int, int], float] = {(0, 0): 2.0 ** (1.0 - s) / math.gamma(s)}
    for _ in range(ell):
        nxt: dict[tuple[int, int], float] = {}
        for (i, j), coef in terms.items():
            a_minus_b = j - i
            if a_minus_b != 0:
                nxt[(i + 1, j)] = nxt.get((i + 1, j), 0.0) + a_minus_b * coef
            nxt[(i, j + 1)] = nxt.get((i, j + 1), 0.0) - coef
        terms = {key: c for key, c in nxt.items() if c != 0.0}
    return tuple((c, i, j) for (i, j), c in sorted(terms.items()))


def _psi_scaled(s: float, z: np.ndarray, ell: int) -> np.ndarray:
    """e^z times the ell-th derivative of psi(z) = c_s z^s K_s(z), for z > 0."""
    if s == 0.5:
        return np.full_like(z, (-1.0) ** ell)
    # orders s - j: K_{s-j} = K_{j-s}, built upward from K_{1-s}
    ks = _orders_scaled(s, z, 1)[0]
    chain = _orders_scaled(1.0 - s, z, max(ell, 1))
    total = np.zeros_like(z)
    for coef, i, j in _derivative_terms(s, ell):
        kb = ks if j == 0 else chain[j - 1]
        total = total + coef * z ** (s - i) * kb
    return total


def psi_derivative(profile: ExtensionProfile, z, ell: int) -> np.ndarray | float:
    """ell-th derivative of the normalized profile psi(z) = c_s z^s K_s(z) in z."""
    if ell < 0:
        raise ValidationError("derivative order must be nonnegative")
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zz <= 0.0):
        raise DomainError("psi derivatives are evaluated at z > 0")
    with np.errstate(under="ignore"):
        out = _psi_scaled(profile.s, zz, ell) * np.exp(-zz)
    return float(out[0]) if scalar else out


def psi(profile: ExtensionProfile, y) -> np.ndarray | float:
    """psi_k(y) with psi_k(0) = 1 and psi_k -> 0 as y -> infinity."""
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(yy < 0.0):
        raise DomainError("psi requires y >= 0")
    z = profile.sqrt_lam * yy
    out = np.ones_like(z)
    pos = z > 0.0
    if profile.s == 0.5:
        out[pos] = np.exp(-z[pos])
    elif np.any(pos):
        with np.errstate(under="ignore"):
            out[pos] = _psi_scaled(profile.s, z[pos], 0) * np.exp(-z[pos])
    return float(out[0]) if scalar else out


def psi_prime(profile: ExtensionProfile, y) -> np.ndarray | float:
    """d psi_k / dy = -sqrt(lam) c_s z^s K_{1-s}(z) with z = sqrt(lam) y.

    At y = 0 the derivative is -inf for s < 1/2, finite for s = 1/2, and 0
    for s > 1/2.
    """
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(yy < 0.0):
        raise DomainError("psi_prime requires y >= 0")
    z = profile.sqrt_lam * yy
    out = np.empty_like(z)
    pos = z > 0.0
    if np.any(pos):
        with np.errstate(under="ignore"):
            out[pos] = profile.sqrt_lam * _psi_scaled(profile.s, z[pos], 1) * np.exp(-z[pos])
    s = profile.s
    out[~pos] = -profile.sqrt_lam if s == 0.5 else (-np.inf if s < 0.5 else 0.0)
    return float(out[0]) if scalar else out


def conormal_limit(profile: ExtensionProfile, levels: int = 10, tol: float = 1e-6) -> float:
    """lim_{y->0} y^alpha psi'(y) / (d_s lam^s), extrapolated on y = 2^-j.

    Richardson elimination uses the known expansion exponents
    {2(1-s) + 2m, 2 + 2m}.
    """
    s = profile.s
    alpha = profile.alpha
    j0 = max(0, math.ceil(math.log2(profile.sqrt_lam)))
    ys = 2.0 ** -(j0 + np.arange(levels, dtype=float))
    vals = ys ** alpha * np.asarray(psi_prime(profile, ys)) / (profile.d_s * profile.lam ** s)
    powers: list[float] = []
    for m in range(levels):
        for p in (2.0 * (1.0 - s) + 2 * m, 2.0 + 2 * m):
            if all(abs(p - q) > 1e-9 for q in powers):
                powers.append(p)
    powers.sort()
    table = [np.asarray(vals, dtype=float)]
    diag = [float(vals[-1])]
    for p in powers[: levels - 1]:
        prev = table[-1]
        f = 2.0 ** p
        table.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        diag.append(float(table[-1][-1]))
    steps = np.abs(np.diff(diag))
    # successive corrections must shrink until they hit rounding
    floor = 1e3 * _EPS
    for a, b in zip(steps[:-1], steps[1:]):
        if b > max(a, floor) * 1.5 and b > tol:
            raise ExtrapolationDivergence("conormal extrapolation does not contract")
    best = int(np.argmin(steps)) + 1 if len(steps) else 0
    if len(steps) and steps[best - 1] > tol:
        raise ExtrapolationDivergence("conormal extrapolation stalled above tolerance")
    return diag[best]


# ---------------------------------------------------------------- half-line quadrature

def _half_line(fn, expo: float, x0: float, rate: float, rtol: float = 1e-9,
               levels: int = 40, n: int = 16, max_panels: int = 512) -> float:
    """int_0^inf x^expo fn(x) dx, fn smooth-ish, integrand decaying like exp(-rate x).

    (0, x0] is handled by a Jacobi first panel and geometric grading.  The tail
    [x0, inf) is mapped by x = x0 + c w / (1 - w) with c = 1/rate and split into
    Gauss-Legendre panels that are doubled until the sum stalls.
    """
    xs, ws = singular_rule(x0, expo, levels, n)
    head = math.fsum(ws * fn(xs))
    c = 1.0 / rate
    xl, wl = legendre01(n)
    prev = None
    panels = 4
    while panels <= max_panels:
        edges = np.linspace(0.0, 1.0, panels + 1)
        w = (edges[:-1, None] + np.diff(edges)[:, None] * xl[None, :]).ravel()
        wt = (np.diff(edges)[:, None] * wl[None, :]).ravel()
        x = x0 + c * w / (1.0 - w)
        jac = c / (1.0 - w) ** 2
        with np.errstate(under="ignore", over="ignore"):
            vals = fn(x) * x ** expo * jac
        vals = np.where(np.isfinite(vals), vals, 0.0)
        tail = math.fsum(wt * vals)
        if prev is not None and abs(tail - prev) <= rtol * abs(head + tail) * 1e-1:
            return head + tail
        prev = tail
        panels *= 2
    raise QuadratureFailure("half-line quadrature did not stall at the requested tolerance")


def mode_energy(profile: ExtensionProfile) -> float:
    """int_0^inf y^alpha (lam psi^2 + psi'^2) dy, equal to d_s lam^s."""
    s = profile.s
    alpha = profile.alpha
    r = profile.sqrt_lam
    expo = min(alpha, 2.0 * s - 1.0)

    def fn(y):
        z = r * y
        with np.errstate(under="ignore"):
            decay = np.exp(-2.0 * z)
            p0 = _psi_scaled(s, z, 0)
            p1 = r * _psi_scaled(s, z, 1)
        return y ** (alpha - expo) * decay * (profile.lam * p0 * p0 + p1 * p1)

    return _half_line(fn, expo, 1.0 / r, 2.0 * r)


def _theta_ratio(theta: float, lam: float, lambda_1: float | None) -> float:
    if theta < 0.0 or not math.isfinite(theta):
        raise ValidationError("theta must be >= 0")
    ref = lam if lambda_1 is None else lambda_1
    if lambda_1 is not None and lam < lambda_1 * (1.0 - 1e-12):
        raise ValidationError("lambda must be >= lambda_1")
    if theta > THETA_SAFETY * 2.0 * math.sqrt(ref):
        raise ValidationError("theta must be < 2*sqrt(lambda_1) (enforced as theta <= 0.95*2*sqrt(lambda_1))")
    return theta / math.sqrt(lam)


def _weighted_psi_integral(s: float, power: float, ell: int, theta_ratio: float) -> float:
    """int_0^inf z^power e^{theta_ratio z} (d^ell psi/dz^ell)^2 dz."""
    expo = power if (ell == 0 or s == 0.5) else power + 4.0 * s - 2.0 * ell
    if expo <= -1.0:
        raise NonIntegrable("weighted profile integral diverges at z = 0")

    def fn(z):
        with np.errstate(under="ignore"):
            v = _psi_scaled(s, z, ell)
            return z ** (power - expo) * np.exp((theta_ratio - 2.0) * z) * v * v

    return _half_line(fn, expo, 1.0, 2.0 - theta_ratio)


def phi_integral(s: float, delta: float, theta: float, lam: float,
                 lambda_1: float | None = None) -> float:
    """Phi(delta, theta, lam) = int_0^inf z^delta e^{theta z / sqrt(lam)} psi(z)^2 dz."""
    if delta <= -1.0:
        raise NonIntegrable("Phi requires delta > -1")
    ratio = _theta_ratio(theta, lam, lambda_1)
    ExtensionProfile(s, lam)
    return _weighted_psi_integral(s, delta, 0, ratio)


def psi_integral(s: float, ell: int, beta: float, theta: float, lam: float,
                 lambda_1: float | None = None) -> float:
    """Psi_ell(beta, theta, lam) = int_0^inf z^{beta+2 ell} e^{theta z/sqrt(lam)} |psi^(ell)(z)|^2 dz."""
    if ell < 0 or ell > 8:
        raise ValidationError("derivative order ell must lie in 0..8")
    if ell == 0 and beta <= -1.0:
        raise NonIntegrable("Psi_0 requires beta > -1")
    if beta <= -1.0 - 4.0 * s:
        raise NonIntegrable("Psi requires beta > -1-4s")
    ratio = _theta_ratio(theta, lam, lambda_1)
    ExtensionProfile(s, lam)
    return _weighted_psi_integral(s, beta + 2.0 * ell, ell, ratio)


@dataclass(frozen=True)
class FactorialFit:
    """Fitted growth constant kappa_hat with Psi_ell <= kappa_hat^(2 ell) (ell!)^2."""

    kappa_hat: float
    ells: tuple[int, ...]
    psi_values: tuple[float, ...]
    normalized: tuple[float, ...]
    argmax: int


def factorial_growth_fit(s: float, theta: float, lam: float, ell_max: int, beta: float = 0.0,
                         lambda_1: float | None = None) -> FactorialFit:
    """kappa_hat = max_{1<=ell<=ell_max} (Psi_ell / (ell!)^2)^(1/(2 ell)).

    Normalized ratios Psi_ell / (kappa_hat^(2 ell) (ell!)^2) are reported for
    ell = 0..ell_max; the ell = 0 entry is Phi(beta, theta, lam) itself and is
    omitted when beta <= -1, where it diverges.
    """
    if not (1 <= ell_max <= 8):
        raise ValidationError("ell_max must lie in 1..8")
    ells = tuple(range(0 if beta > -1.0 else 1, ell_max + 1))
    vals = tuple(psi_integral(s, ell, beta, theta, lam, lambda_1) for ell in ells)
    roots = [(v / math.factorial(ell) ** 2) ** (1.0 / (2 * ell)) for ell, v in zip(ells, vals) if ell > 0]
    kappa = max(roots)
    arg = int(np.argmax(roots)) + 1
    normalized = tuple(v / (kappa ** (2 * ell) * math.factorial(ell) ** 2) for ell, v in zip(ells, vals))
    return FactorialFit(kappa, ells, vals, normalized, arg)


def poincare_ratio(profile: ExtensionProfile) -> float:
    """||U||_{L^2(y^alpha)} / ||grad U||_{L^2(y^alpha)} for a single-mode field."""
    lam = profile.lam
    mass = lam ** (-(profile.alpha + 1.0) / 2.0) * phi_integral(profile.s, profile.alpha, 0.0, lam)
    return math.sqrt(mass / mode_energy(profile))


# ---------------------------------------------------------------- fields

@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Extended solution U(x', y, t) of a fractional wave problem with weight (beta, theta)."""

    problem: FracWaveProblem
    beta: float = 0.0
    theta: float = 0.0
    profiles: tuple[ExtensionProfile, ...] = field(init=False)

    def __post_init__(self) -> None:
        dom = self.problem.domain
        if self.theta < 0.0 or self.theta > THETA_SAFETY * 2.0 * math.sqrt(dom.lambda_1):
            raise ValidationError(
                "theta must be < 2*sqrt(lambda_1) (enforced as theta <= 0.95*2*sqrt(lambda_1))")
        object.__setattr__(self, "profiles",
                           tuple(ExtensionProfile(self.problem.s, float(lam)) for lam in dom.eigenvalues))

    def psi_matrix(self, y) -> np.ndarray:
        """psi_k(y) for every mode, shape (n_modes, len(y))."""
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        return np.stack([np.atleast_1d(psi(p, yy)) for p in self.profiles])


def evaluate_extension(fld: ExtensionField, x, y: float, t: float) -> np.ndarray:
    """sum_k u_k(t) phi_k(x') psi_k(y); at y = 0 identical to the trace u(x', t)."""
    coeffs = mode_coefficients(fld.problem, t, 0)
    basis = fld.problem.domain.basis_at(x)
    weights = coeffs * fld.psi_matrix(y)[:, 0]
    return np.sum(weights[:, None] * basis, axis=0)


def trace_norm_identity(fld: ExtensionField, t: float) -> tuple[float, float]:
    """(||grad U(t)||^2 from mode energies, d_s ||u(t)||^2_{H^s})."""
    coeffs = mode_coefficients(fld.problem, t, 0)
    energies = np.array([mode_energy(p) for p in fld.profiles])
    lhs = math.fsum(coeffs ** 2 * energies)
    rhs = fld.profiles[0].d_s * hs_norm(ModeExpansion(fld.problem.domain, coeffs), fld.problem.s) ** 2
    return lhs, rhs
