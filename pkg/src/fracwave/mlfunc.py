"""Two-parameter Mittag-Leffler function E_{gamma,mu}(z) for real arguments.

Three evaluation branches are combined:

* Taylor series ``sum z^k / Gamma(gamma k + mu)`` for moderate ``|z|``;
* the algebraic asymptotic expansion for large negative ``z``, completed by
  the exponentially small (or, near ``gamma = 2``, oscillatory) pole
  contributions;
* numerical inversion of the Laplace transform ``s^(gamma-mu)/(s^gamma - z)``
  on an optimally chosen parabolic contour, with the poles left outside the
  contour added as residues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, InvalidOrder, NonConvergent, OutOfTheoremRange, StepUnderflow

__all__ = [
    "MLParams",
    "MLMethod",
    "MLEvalReport",
    "ml",
    "ml_value",
    "ml_array",
    "ml_taylor",
    "ml_asymptotic",
    "ml_contour",
    "ml_derivative_identity_residual",
    "ml_decay_envelope",
]

_EPS = np.finfo(float).eps
_LOG_EPS = math.log(_EPS)
_TAYLOR_RADIUS = 5.0
_TAYLOR_MAX_TERMS = 2000
_ASYM_MAX_TERMS = 400


def _tolerance(value: float) -> float:
    return max(1e-12, 1e-12 * abs(value))


class MLMethod(str, enum.Enum):
    TAYLOR = "TaylorSeries"
    ASYMPTOTIC = "AsymptoticSeries"
    INTEGRAL = "IntegralRepresentation"


@dataclass(frozen=True)
class MLParams:
    gamma: float
    mu: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidOrder(f"gamma must be a finite positive number, got {self.gamma!r}")
        if not math.isfinite(self.mu):
            raise InvalidOrder(f"mu must be finite, got {self.mu!r}")


@dataclass(frozen=True)
class MLEvalReport:
    value: float
    method: MLMethod
    est_abs_error: float


# ---------------------------------------------------------------------------
# Taylor branch


@lru_cache(maxsize=256)
def _taylor_coefficients(gamma: float, mu: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return special.rgamma(gamma * k + mu)


def _series_term(gamma: float, mu: float, z: float, k: int) -> float:
    arg = gamma * k + mu
    if arg <= 0.0 or k == 0:
        return z ** k * float(special.rgamma(arg))
    logmag = k * math.log(abs(z)) - float(special.gammaln(arg))
    if logmag < -745.0:
        return 0.0
    sign = float(special.gammasgn(arg)) * (-1.0 if (z < 0 and k % 2) else 1.0)
    return sign * math.exp(logmag)


def ml_taylor(gamma: float, mu: float, z: float) -> MLEvalReport:
    """Sum the defining power series until the tail is negligible.

    The reported error combines the first neglected term with a rounding
    estimate driven by the largest partial terms (cancellation for z < 0).
    """
    z = float(z)
    if z == 0.0:
        return MLEvalReport(float(special.rgamma(mu)), MLMethod.TAYLOR, 0.0)
    peak = abs(z) ** (1.0 / gamma)
    terms = []
    abs_total = 0.0
    for k in range(_TAYLOR_MAX_TERMS):
        term = _series_term(gamma, mu, z, k)
        terms.append(term)
        abs_total += abs(term)
        if k > 0 and gamma * k + mu > peak + 1.0 and abs(term) <= 1e-17 * max(abs_total, 1e-300):
            break
    else:
        raise NonConvergent(f"Taylor series did not converge for z={z}")
    total = math.fsum(terms)
    nxt = abs(_series_term(gamma, mu, z, len(terms)))
    rounding = 2.0 * _EPS * abs_total
    return MLEvalReport(total, MLMethod.TAYLOR, max(nxt, rounding))


# ---------------------------------------------------------------------------
# Asymptotic branch (z -> -infinity)


def _sinpi(a: float) -> float:
    r = math.fmod(a, 2.0)
    if r == int(r):
        return 0.0
    return math.sin(math.pi * r)


@lru_cache(maxsize=256)
def _asymptotic_table(gamma: float, mu: float):
    """Signs and log-magnitudes of -(-1)^k/Gamma(mu - gamma k), plus a log-envelope.

    The envelope Gamma(1 + gamma k - mu)/pi dominates |1/Gamma(mu - gamma k)|
    and is log-convex in k, so the truncation point it selects is not fooled
    by terms that happen to be small because of the sine factor.  Exact
    zeros (poles of Gamma) are skipped.
    """
    k = np.arange(1, _ASYM_MAX_TERMS + 1)
    sign = np.zeros(k.size)
    log_c = np.full(k.size, -np.inf)
    for i, kk in enumerate(k):
        arg = mu - gamma * kk
        if arg <= 0 and arg == int(arg):
            continue
        alt = 1.0 if kk % 2 else -1.0
        if arg > -150.0:
            rg = float(special.rgamma(arg))
            sign[i] = alt * math.copysign(1.0, rg)
            log_c[i] = math.log(abs(rg))
        else:
            sp = _sinpi(-arg)
            if sp == 0.0:
                continue
            # reflection: 1/Gamma(-a) = -Gamma(1+a) sin(pi a)/pi
            sign[i] = -alt * math.copysign(1.0, sp)
            log_c[i] = float(special.gammaln(1.0 - arg)) + math.log(abs(sp) / math.pi)
    a = gamma * k - mu
    log_env = np.where(1.0 + a > 0, special.gammaln(np.maximum(1.0 + a, 1e-300)) - math.log(math.pi), log_c)
    nonzero = sign != 0
    terminating = not nonzero[k.size // 2:].any()
    return sign, log_c, log_env, k.astype(float), nonzero, terminating


def _pole_terms(gamma: float, mu: float, x):
    """Contribution of the Laplace-transform poles for z = -x (vectorised)."""
    x = np.asarray(x, dtype=float)
    if gamma == 1.0:
        return math.cos(math.pi * (1.0 - mu)) * x ** (1.0 - mu) * np.exp(-x)
    if gamma < 1.0:
        return np.zeros_like(x)
    r = x ** (1.0 / gamma)
    ang = math.pi / gamma
    # zeta = r e^{i pi/gamma}; the conjugate pair combines to a real cosine
    logmag = (1.0 - mu) * np.log(r) + r * math.cos(ang)
    phase = (1.0 - mu) * ang + r * math.sin(ang)
    return np.where(logmag < -745.0, 0.0, (2.0 / gamma) * np.exp(np.minimum(logmag, 700.0)) * np.cos(phase))


def _asymptotic_batch(gamma: float, mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sign, log_c, log_env, k, nonzero, terminating = _asymptotic_table(gamma, mu)
    logx = np.log(x)
    values = np.empty_like(x)
    errors = np.empty_like(x)
    idx = np.arange(k.size)[None, :]
    chunk = 512
    for i in range(0, x.size, chunk):
        lx = logx[i:i + chunk, None]
        if terminating:
            kstar = np.full(lx.shape[0], k.size)
            err = np.zeros(lx.shape[0])
        else:
            env = np.where(nonzero[None, :], log_env[None, :] - k[None, :] * lx, np.inf)
            kstar = np.argmin(env, axis=1)
            err = np.exp(env[np.arange(env.shape[0]), kstar])
        kcut = max(1, int(kstar.max()))
        keep = (idx[:, :kcut] < kstar[:, None]) & nonzero[None, :kcut]
        expo = np.where(keep, log_c[None, :kcut] - k[None, :kcut] * lx, -np.inf)
        values[i:i + chunk] = (sign[None, :kcut] * np.exp(expo)).sum(axis=1)
        errors[i:i + chunk] = err
    values += _pole_terms(gamma, mu, x)
    return values, errors


def ml_asymptotic(gamma: float, mu: float, z: float) -> MLEvalReport:
    """Large negative argument expansion truncated before its smallest term."""
    if z >= 0:
        raise DomainError("asymptotic branch requires z < 0")
    if gamma > 2.0 or gamma < 1.0:
        raise NonConvergent("asymptotic branch only implemented for 1 <= gamma <= 2")
    v, e = _asymptotic_batch(gamma, mu, np.array([-float(z)]))
    return MLEvalReport(float(v[0]), MLMethod.ASYMPTOTIC, float(e[0]))


# ---------------------------------------------------------------------------
# Contour branch (inverse Laplace transform on a parabola)


def _param_bounded(t, phi_j, phi_j1, p, q, log_epsilon):
    fac = 1.01
    f_max = math.exp(log_epsilon - _LOG_EPS)
    sq_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt((log_epsilon - _LOG_EPS) / t)
    sq_j1 = min(math.sqrt(phi_j1), threshold - sq_j)
    f_bar = None
    if p < 1e-14 and q < 1e-14:
        sqb_j, sqb_j1 = sq_j, sq_j1
        f_bar = 1.0
    elif p < 1e-14:
        sqb_j = sq_j
        f_min = fac * (sq_j / (sq_j1 - sq_j)) ** q if sq_j > 0 else fac
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fq = f_bar ** (-1.0 / q)
        sqb_j1 = (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq)
    elif q < 1e-14:
        sqb_j1 = sq_j1
        f_min = fac * (sq_j1 / (sq_j1 - sq_j)) ** p
        if f_min >= f_max:
            return None
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / p)
        sqb_j = (2.0 * sq_j + fp * sq_j1) / (2.0 - fp)
    else:
        f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j) ** max(p, q)
        if f_min >= f_max:
            return None
        f_min = max(f_min, 1.5)
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / p)
        fq = f_bar ** (-1.0 / q)
        w = -phi_j1 * t / log_epsilon
        den = 2.0 + w - (1.0 + w) * fp + fq
        sqb_j = ((2.0 + w + fq) * sq_j + fp * sq_j1) / den
        sqb_j1 = (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den
    log_eps_adj = log_epsilon - math.log(f_bar)
    w = -sqb_j1 ** 2 * t / log_eps_adj
    mu = (((1.0 + w) * sqb_j + sqb_j1) / (2.0 + w)) ** 2
    h = -2.0 * math.pi / log_eps_adj * (sqb_j1 - sqb_j) / ((1.0 + w) * sqb_j + sqb_j1)
    if not (mu > 0 and h > 0):
        return None
    n = math.ceil(math.sqrt(1.0 - log_eps_adj / t / mu) / h)
    return mu, h, n


def _param_unbounded(t, phi_j, p, log_epsilon):
    sq_phi = math.sqrt(phi_j)
    phib = phi_j * 1.01 if phi_j > 0 else 0.01
    sqb = math.sqrt(phib)
    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    for _ in range(200):
        phi_t = phib * t
        le = log_epsilon / phi_t
        n = math.ceil(phi_t / math.pi * (1.0 - 1.5 * le + math.sqrt(1.0 - 2.0 * le)))
        a = math.pi * n / phi_t
        sq_mu = sqb * abs(4.0 - a) / abs(7.0 - math.sqrt(1.0 + 12.0 * a))
        fbar = ((sqb - sq_phi) / sq_mu) ** (-p) if p >= 1e-14 else 1.0
        if p < 1e-14 or (f_min < fbar < f_max):
            break
        sqb = f_tar ** (-1.0 / p) * sq_mu + sq_phi
        phib = sqb ** 2
    mu = sq_mu ** 2
    h = (-3.0 * a - 2.0 + 2.0 * math.sqrt(1.0 + 12.0 * a)) / (4.0 - a) / n
    threshold = (log_epsilon - _LOG_EPS) / t
    if mu > threshold:
        qq = 0.0 if abs(p) < 1e-14 else f_tar ** (-1.0 / p) * math.sqrt(mu)
        phib = (qq + math.sqrt(phi_j)) ** 2
        if phib < threshold:
            w = math.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon))
            u = math.sqrt(-phib * t / _LOG_EPS)
            mu = threshold
            n = math.ceil(w * log_epsilon / 2.0 / math.pi / (u * w - 1.0))
            h = w / n
        else:
            return None
    return mu, h, n


@dataclass(frozen=True)
class _ContourSetup:
    mu_c: float
    h: float
    n: int
    residue_poles: tuple[complex, ...]
    log_epsilon: float


def _contour_setup(gamma: float, mu: float, z: float, log_epsilon: float, max_nodes: int) -> _ContourSetup:
    # relax the target by up to two decades when no region is admissible
    for relax in range(3):
        try:
            return _contour_setup_at(gamma, mu, z, log_epsilon + relax * math.log(10.0), max_nodes)
        except NonConvergent:
            if relax == 2:
                raise
    raise AssertionError("unreachable")


def _contour_setup_at(gamma: float, mu: float, z: float, log_epsilon: float, max_nodes: int) -> _ContourSetup:
    t = 1.0
    theta = math.pi if z < 0 else 0.0
    kmin = math.ceil(-gamma / 2.0 - theta / (2.0 * math.pi))
    kmax = math.floor(gamma / 2.0 - theta / (2.0 * math.pi))
    r = abs(z) ** (1.0 / gamma)
    poles = [r * complex(math.cos((theta + 2 * k * math.pi) / gamma), math.sin((theta + 2 * k * math.pi) / gamma))
             for k in range(kmin, kmax + 1)]
    phis = [(p.real + abs(p)) / 2.0 for p in poles]
    order = sorted(range(len(poles)), key=lambda i: phis[i])
    poles = [poles[i] for i in order if phis[i] > 1e-15]
    phis = [phis[i] for i in order if phis[i] > 1e-15]
    s_star = [0j] + poles
    phi_star = [0.0] + phis + [math.inf]
    j1_count = len(s_star)
    p_str = [max(0.0, -2.0 * (gamma - mu + 1.0))] + [1.0] * (j1_count - 1)
    q_str = [1.0] * (j1_count - 1) + [math.inf]
    admissible = [j for j in range(j1_count)
                  if phi_star[j] < (log_epsilon - _LOG_EPS) / t and phi_star[j] < phi_star[j + 1]]
    best = None
    for j in admissible:
        if j < j1_count - 1:
            res = _param_bounded(t, phi_star[j], phi_star[j + 1], p_str[j], q_str[j], log_epsilon)
        else:
            res = _param_unbounded(t, phi_star[j], p_str[j], log_epsilon)
        if res is None:
            continue
        if best is None or res[2] < best[1][2]:
            best = (j, res)
    if best is None or best[1][2] > max_nodes:
        raise NonConvergent(f"no admissible integration contour for gamma={gamma}, mu={mu}, z={z}")
    j_best, (mu_c, h, n) = best
    return _ContourSetup(mu_c, h, int(n), tuple(s_star[j_best + 1:]), log_epsilon)


def _bounded_params_vec(phi1: np.ndarray, p: float, log_epsilon: np.ndarray, t: float = 1.0):
    """Vectorised optimal parameters for the region between the origin and the poles."""
    fac = 1.01
    f_max = np.exp(log_epsilon - _LOG_EPS)
    threshold = 2.0 * np.sqrt((log_epsilon - _LOG_EPS) / t)
    sq1 = np.minimum(np.sqrt(phi1), threshold)
    with np.errstate(all="ignore"):
        if p < 1e-14:
            f_min = np.full_like(phi1, fac)
            ok = f_min < f_max
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fq = 1.0 / f_bar
            sqb0 = np.zeros_like(phi1)
            sqb1 = 2.0 * sq1 / (2.0 + fq)
        else:
            f_min = fac * sq1 / sq1 ** max(p, 1.0)
            ok = f_min < f_max
            f_min = np.maximum(f_min, 1.5)
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / p)
            fq = 1.0 / f_bar
            w = -phi1 * t / log_epsilon
            den = 2.0 + w - (1.0 + w) * fp + fq
            sqb0 = fp * sq1 / den
            sqb1 = (2.0 + w - (1.0 + w) * fp) * sq1 / den
        le2 = log_epsilon - np.log(f_bar)
        w = -sqb1 ** 2 * t / le2
        mu = (((1.0 + w) * sqb0 + sqb1) / (2.0 + w)) ** 2
        h = -2.0 * math.pi / le2 * (sqb1 - sqb0) / ((1.0 + w) * sqb0 + sqb1)
        n = np.ceil(np.sqrt(1.0 - le2 / t / mu) / h)
    ok &= (mu > 0) & (h > 0) & np.isfinite(n)
    return mu, h, np.where(ok, n, np.inf)


def _unbounded_params_vec(phi0: np.ndarray, p: float, log_epsilon: np.ndarray, t: float = 1.0):
    """Vectorised optimal parameters for the region to the right of every singularity."""
    sq_phi = np.sqrt(phi0)
    phib = np.where(phi0 > 0, phi0 * 1.01, 0.01)
    sqb = np.sqrt(phib)
    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    active = np.ones(phi0.shape, dtype=bool)
    n = np.zeros_like(phi0)
    a = np.zeros_like(phi0)
    sq_mu = np.zeros_like(phi0)
    with np.errstate(all="ignore"):
        for _ in range(200):
            phi_t = phib * t
            le = log_epsilon / phi_t
            n_new = np.ceil(phi_t / math.pi * (1.0 - 1.5 * le + np.sqrt(1.0 - 2.0 * le)))
            a_new = math.pi * n_new / phi_t
            sq_mu_new = sqb * np.abs(4.0 - a_new) / np.abs(7.0 - np.sqrt(1.0 + 12.0 * a_new))
            n = np.where(active, n_new, n)
            a = np.where(active, a_new, a)
            sq_mu = np.where(active, sq_mu_new, sq_mu)
            if p < 1e-14:
                break
            fbar = ((sqb - sq_phi) / sq_mu) ** (-p)
            done = (f_min < fbar) & (fbar < f_max)
            active &= ~done
            if not active.any():
                break
            sqb = np.where(active, f_tar ** (-1.0 / p) * sq_mu + sq_phi, sqb)
            phib = sqb ** 2
        mu = sq_mu ** 2
        h = (-3.0 * a - 2.0 + 2.0 * np.sqrt(1.0 + 12.0 * a)) / (4.0 - a) / n
        threshold = (log_epsilon - _LOG_EPS) / t
        over = mu > threshold
        qq = 0.0 if abs(p) < 1e-14 else f_tar ** (-1.0 / p) * np.sqrt(mu)
        phib2 = (qq + sq_phi) ** 2
        fixable = over & (phib2 < threshold)
        w = np.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon))
        u = np.sqrt(-phib2 * t / _LOG_EPS)
        n_fix = np.ceil(w * log_epsilon / 2.0 / math.pi / (u * w - 1.0))
        mu = np.where(fixable, threshold, mu)
        n = np.where(fixable, n_fix, n)
        h = np.where(fixable, w / n_fix, h)
        n = np.where(over & ~fixable, np.inf, n)
    return mu, h, n


def _contour_setups_negative(gamma: float, mu: float, z: np.ndarray, log_epsilon: float,
                             max_nodes: int) -> list[_ContourSetup]:
    """Contour parameters for many z < 0 with 1 <= gamma <= 2.

    Mirrors :func:`_contour_setup`: singularities are the origin and (for
    gamma > 1) the pole pair x^(1/gamma) e^(+-i pi/gamma), which share the
    same abscissa so only the regions below and above them are admissible.
    """
    x = -z
    setups: list[_ContourSetup | None] = [None] * z.size
    pending = np.arange(z.size)
    p0 = max(0.0, -2.0 * (gamma - mu + 1.0))
    r = x ** (1.0 / gamma)
    ang = math.pi / gamma
    pole = r * np.exp(1j * ang)
    phi_p = (pole.real + np.abs(pole)) / 2.0
    has_poles = (gamma > 1.0) & (phi_p > 1e-15)
    for relax in range(3):
        if pending.size == 0:
            break
        le = np.full(pending.size, log_epsilon + relax * math.log(10.0))
        thr = (le - _LOG_EPS)
        hp = has_poles[pending]
        ph = phi_p[pending]
        mu_b, h_b, n_b = _bounded_params_vec(np.where(hp, ph, 1.0), p0, le)
        n_b = np.where(hp, n_b, np.inf)
        # unbounded region starts at the poles (p = 1) or at the origin (p = p0)
        mu_u1, h_u1, n_u1 = _unbounded_params_vec(np.where(hp, ph, 0.0), 1.0, le)
        mu_u0, h_u0, n_u0 = _unbounded_params_vec(np.zeros(pending.size), p0, le)
        mu_u = np.where(hp, mu_u1, mu_u0)
        h_u = np.where(hp, h_u1, h_u0)
        n_u = np.where(hp, n_u1, n_u0)
        n_u = np.where(hp & ~(ph < thr), np.inf, n_u)
        use_b = n_b < n_u
        n_best = np.where(use_b, n_b, n_u)
        ok = np.isfinite(n_best) & (n_best <= max_nodes)
        for j in np.flatnonzero(ok):
            i = pending[j]
            if use_b[j]:
                poles = (complex(pole[i].conjugate()), complex(pole[i]))
                setups[i] = _ContourSetup(float(mu_b[j]), float(h_b[j]), int(n_b[j]), poles, float(le[j]))
            else:
                setups[i] = _ContourSetup(float(mu_u[j]), float(h_u[j]), int(n_u[j]), (), float(le[j]))
        pending = pending[~ok]
    if pending.size:
        raise NonConvergent(f"no admissible integration contour for gamma={gamma}, mu={mu}, z={z[pending[0]]}")
    return setups


def _contour_batch(gamma: float, mu: float, z: np.ndarray, log_epsilon: float = math.log(1e-15),
                   max_nodes: int = 4000) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the parabolic-contour integral for many arguments at once."""
    if 1.0 <= gamma <= 2.0 and np.all(z < 0):
        setups = _contour_setups_negative(gamma, mu, z, log_epsilon, max_nodes)
    else:
        setups = [_contour_setup(gamma, mu, float(zz), log_epsilon, max_nodes) for zz in z]
    values = np.empty(z.size)
    errors = np.empty(z.size)
    order = np.argsort([st.n for st in setups], kind="stable")
    chunk = 256
    for c0 in range(0, z.size, chunk):
        idx = order[c0:c0 + chunk]
        mu_c = np.array([setups[i].mu_c for i in idx])[:, None]
        h = np.array([setups[i].h for i in idx])[:, None]
        n = np.array([setups[i].n for i in idx])[:, None]
        nmax = int(n.max())
        kk = np.arange(-nmax, nmax + 1)[None, :]
        mask = np.abs(kk) <= n
        u = h * kk
        log1iu = 0.5 * np.log1p(u * u) + 1j * np.arctan(u)
        log_s = np.log(mu_c) + 2.0 * log1iu
        s = mu_c * (1.0 + 1j * u) ** 2
        ds = 2.0 * mu_c * (1j - u)
        num = np.exp(s + (gamma - mu) * log_s)
        den = np.exp(gamma * log_s) - z[idx][:, None]
        integrand = np.where(mask, num / den * ds, 0.0)
        integral = (h[:, 0] * integrand.sum(axis=1) / (2.0j * math.pi)).real
        rounding = _EPS * h[:, 0] * np.abs(integrand).sum(axis=1) / (2.0 * math.pi)
        for row, i in enumerate(idx):
            res = 0.0
            for p in setups[i].residue_poles:
                res += ((1.0 / gamma) * p ** (1.0 - mu) * np.exp(p)).real
            values[i] = integral[row] + res
            errors[i] = math.exp(setups[i].log_epsilon) * max(1.0, abs(values[i])) + rounding[row]
    return values, errors


def ml_contour(gamma: float, mu: float, z: float, log_epsilon: float = math.log(1e-15),
               max_nodes: int = 4000) -> MLEvalReport:
    """Inverse Laplace transform of s^(gamma-mu)/(s^gamma - z) evaluated at t = 1."""
    z = float(z)
    if z == 0.0:
        return MLEvalReport(float(special.rgamma(mu)), MLMethod.INTEGRAL, 0.0)
    v, e = _contour_batch(gamma, mu, np.array([z]), log_epsilon, max_nodes)
    return MLEvalReport(float(v[0]), MLMethod.INTEGRAL, float(e[0]))


# ---------------------------------------------------------------------------
# Public front-end


def _coerce(params: MLParams | tuple[float, float]) -> MLParams:
    if isinstance(params, MLParams):
        return params
    gamma, mu = params
    return MLParams(float(gamma), float(mu))


def _taylor_disc(gamma: float, mu: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series on |z| <= 5 with one coefficient table for the whole disc."""
    n = _taylor_terms_needed(gamma, mu, _TAYLOR_RADIUS)
    coef = _taylor_coefficients(gamma, mu, n)
    values = np.polynomial.polynomial.polyval(z, coef)
    abs_sum = np.polynomial.polynomial.polyval(np.abs(z), np.abs(coef))
    return values, 2.0 * n ** 0.5 * _EPS * abs_sum


def _negative_batch(gamma: float, mu: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arguments z < -5: asymptotic expansion where accurate, contour otherwise."""
    values = np.empty(z.size)
    errors = np.empty(z.size)
    methods = np.empty(z.size, dtype=object)
    todo = np.ones(z.size, dtype=bool)
    if 1.0 <= gamma <= 2.0:
        x = -z
        # below this scale the smallest term cannot reach the target accuracy
        cand = np.flatnonzero(x ** (1.0 / gamma) >= 12.0)
        if cand.size:
            v, e = _asymptotic_batch(gamma, mu, x[cand])
            ok = e <= 1e-2 * np.maximum(1e-12, 1e-12 * np.abs(v))
            values[cand[ok]] = v[ok]
            errors[cand[ok]] = e[ok]
            methods[cand[ok]] = MLMethod.ASYMPTOTIC
            todo[cand[ok]] = False
    rest = np.flatnonzero(todo)
    if rest.size:
        v, e = _contour_batch(gamma, mu, z[rest])
        values[rest] = v
        errors[rest] = e
        methods[rest] = MLMethod.INTEGRAL
    return values, errors, methods


def ml(params: MLParams | tuple[float, float], z: float) -> MLEvalReport:
    """Evaluate E_{gamma,mu}(z), picking the cheapest branch that meets tolerance."""
    params = _coerce(params)
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"z must be finite, got {z!r}")
    gamma, mu = params.gamma, params.mu
    if z == 0.0:
        return MLEvalReport(float(special.rgamma(mu)), MLMethod.TAYLOR, 0.0)

    if abs(z) <= _TAYLOR_RADIUS:
        v, e = _taylor_disc(gamma, mu, np.array([z]))
        if z > 0 or e[0] <= 0.1 * _tolerance(v[0]):
            return MLEvalReport(float(v[0]), MLMethod.TAYLOR, float(e[0]))
    elif 0 < z <= 50.0:
        try:
            rep = ml_taylor(gamma, mu, z)
            if rep.est_abs_error <= 0.1 * _tolerance(rep.value):
                return rep
        except NonConvergent:
            pass
    if z < 0:
        v, e, m = _negative_batch(gamma, mu, np.array([z]))
        rep = MLEvalReport(float(v[0]), m[0], float(e[0]))
    else:
        rep = ml_contour(gamma, mu, z)
    if rep.est_abs_error > _tolerance(rep.value):
        raise NonConvergent(
            f"E_{{{gamma},{mu}}}({z}): best estimate error {rep.est_abs_error:.2e} exceeds tolerance")
    return rep


def ml_value(gamma: float, mu: float, z: float) -> float:
    return ml(MLParams(float(gamma), float(mu)), z).value


def ml_array(gamma: float, mu: float, z) -> np.ndarray:
    """Vectorised E_{gamma,mu} over an array of real arguments.

    Agrees with :func:`ml` point by point up to summation order but shares the work:
    one polynomial for the Taylor disc, one matrix sweep for the asymptotic
    expansion and batched contour quadrature for the rest.
    """
    params = MLParams(float(gamma), float(mu))
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("arguments must be finite")
    out = np.empty_like(z)
    flat_z = z.ravel()
    flat_out = out.ravel()
    small = np.abs(flat_z) <= _TAYLOR_RADIUS
    neg = flat_z < -_TAYLOR_RADIUS
    if small.any():
        v, e = _taylor_disc(params.gamma, params.mu, flat_z[small])
        flat_out[small] = v
        # cancellation too strong inside the disc: hand over to the contour
        redo = np.zeros_like(small)
        redo[small] = (flat_z[small] < 0) & (e > 0.1 * np.maximum(1e-12, 1e-12 * np.abs(v)))
        neg |= redo
    if neg.any():
        v, e, _ = _negative_batch(params.gamma, params.mu, flat_z[neg])
        bad = e > np.maximum(1e-12, 1e-12 * np.abs(v))
        if bad.any():
            raise NonConvergent(f"E_{{{gamma},{mu}}} inaccurate at z={flat_z[neg][bad][0]}")
        flat_out[neg] = v
    for i in np.flatnonzero(flat_z > _TAYLOR_RADIUS):
        flat_out[i] = ml(params, flat_z[i]).value
    return out


@lru_cache(maxsize=256)
def _taylor_terms_needed(gamma: float, mu: float, zmax: float) -> int:
    if zmax == 0.0:
        return 1
    zmax = max(zmax, 1e-3)
    peak = zmax ** (1.0 / gamma)
    total = 0.0
    for k in range(_TAYLOR_MAX_TERMS):
        arg = gamma * k + mu
        mag = math.exp(k * math.log(zmax) - special.gammaln(arg)) if arg > 0 else abs(float(special.rgamma(arg))) * zmax ** k
        total += mag
        if k > 0 and arg > peak + 1.0 and mag <= 1e-17 * max(total, 1e-300):
            return k + 1
    raise NonConvergent("Taylor coefficient table did not converge")


# ---------------------------------------------------------------------------
# Identities used as self-tests


def ml_derivative_identity_residual(params: MLParams | tuple[float, float], lam: float, t: float,
                                    q: int) -> float:
    """|FD derivative of E_{g,1}(-lam t^g) - (-lam t^(g-q) E_{g,g-q+1}(-lam t^g))|.

    Only ``params.gamma`` is used; the identity concerns mu = 1.
    """
    params = _coerce(params)
    gamma = params.gamma
    if q not in (1, 2, 3):
        raise ValueError("q must be 1, 2 or 3")
    if not (t > 0):
        raise DomainError("t must be positive")
    h = t * _EPS ** (1.0 / (q + 2)) * 0.5
    if not (h > 0) or (t + h) - t < 0.5 * h or t - 2 * h <= 0:
        raise StepUnderflow(f"finite-difference step underflows at t={t}")

    def f(tt: float) -> float:
        return ml_value(gamma, 1.0, -lam * tt ** gamma)

    if q == 1:
        fd = (f(t + h) - f(t - h)) / (2 * h)
    elif q == 2:
        fd = (f(t + h) - 2 * f(t) + f(t - h)) / h ** 2
    else:
        fd = (f(t + 2 * h) - 2 * f(t + h) + 2 * f(t - h) - f(t - 2 * h)) / (2 * h ** 3)
    exact = -lam * t ** (gamma - q) * ml_value(gamma, gamma - q + 1.0, -lam * t ** gamma)
    return abs(fd - exact)


def ml_decay_envelope(params: MLParams | tuple[float, float], z_grid: Sequence[float]) -> float:
    """sup |E_{gamma,mu}(z)| (1 + |z|) over a grid of non-positive arguments.

    The bound only holds for gamma < 2; at gamma = 2 the function oscillates
    without decay and OutOfTheoremRange is raised.
    """
    params = _coerce(params)
    if params.gamma >= 2.0:
        raise OutOfTheoremRange("decay envelope requires gamma < 2 (gamma=2 gives undamped oscillation)")
    z = np.asarray(z_grid, dtype=float)
    if np.any(z > 0):
        raise DomainError("decay envelope grid must be non-positive")
    vals = ml_array(params.gamma, params.mu, z)
    return float(np.max(np.abs(vals) * (1.0 + np.abs(z))))
