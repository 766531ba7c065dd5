"""Regularity laboratory: blow-up exponents, weighted time norms and factorial growth fits.

Every norm is assembled from the analytic modal derivatives; no field samples
are differentiated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, OutOfRange, ValidationError
from .extension import ExtensionField, psi_integral
from .mlfunc import ml_array
from .quadrature import legendre01, singular_rule
from .spectral import ModeExpansion, SpectralDomain, hs_norm
from .wavesolve import FracWaveProblem, mode_derivative

__all__ = [
    "BlowupFit",
    "DataNormBundle",
    "data_norms",
    "mode_history",
    "operator_derivative",
    "solution_operator_bound_check",
    "fit_blowup_exponent",
    "WeightedNormResult",
    "weighted_time_norm",
    "SpaceRegularityFit",
    "space_regularity_fit",
    "pointwise_space_bounds",
    "SpaceTimeResult",
    "space_time_regularity_check",
    "extension_trace_derivative",
    "blowup_theory",
    "broadband_mode_numbers",
]

_FIT_POINTS = 16
_R2_MIN = 0.99


@dataclass(frozen=True)
class BlowupFit:
    """Slope of log ||d_t^q u||_{H^r} against log t."""

    exponent_hat: float
    r2: float
    t_range: tuple[float, float]
    intercept: float = 0.0
    n_points: int = _FIT_POINTS


@dataclass(frozen=True)
class DataNormBundle:
    """Data norms ||g||_{H^s}, ||g||_{H^2s}, ||h||_{L^2}, ||f||_{H^2(0,T;H^-s)}."""

    g_norm_s: float
    g_norm_2s: float
    h_norm_0: float
    f_norm_H2dual: float

    @property
    def A(self) -> float:
        return self.g_norm_s + self.h_norm_0 + self.f_norm_H2dual


def _time_rule(T: float, panels: int = 32, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre01(n)
    edges = np.linspace(0.0, T, panels + 1)
    h = np.diff(edges)
    return ((edges[:-1, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel())


def _forcing_matrix(prob: FracWaveProblem, t: np.ndarray, order: int = 0) -> np.ndarray:
    out = np.zeros((prob.domain.n_modes, t.size))
    for k in range(1, prob.domain.n_modes + 1):
        fk = prob.forcing(k)
        if fk.zero:
            continue
        fn = fk.f if order == 0 else fk.derivative(order)
        out[k - 1] = np.broadcast_to(fn(t), t.shape)
    return out


def _forcing_l2(prob: FracWaveProblem, r: float, orders=(0,)) -> float:
    """(sum over orders of ||d_t^o f||^2_{L^2(0,T;H^r)})^(1/2)."""
    if not prob.has_forcing:
        return 0.0
    t, w = _time_rule(prob.T)
    lam = prob.domain.eigenvalues
    total = 0.0
    for o in orders:
        F = _forcing_matrix(prob, t, o)
        total += math.fsum((lam[:, None] ** r * F ** 2 * w[None, :]).ravel())
    return math.sqrt(total)


def data_norms(prob: FracWaveProblem) -> DataNormBundle:
    s = prob.s
    return DataNormBundle(hs_norm(prob.g, s), hs_norm(prob.g, 2 * s), hs_norm(prob.h, 0.0),
                          _forcing_l2(prob, -s, (0, 1, 2)))


def mode_history(prob: FracWaveProblem, t, q: int = 0) -> np.ndarray:
    """q-th derivatives of every modal coefficient at times t, shape (n_modes, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((prob.domain.n_modes, t.size))
    lam = prob.lam_s
    for k in range(1, prob.domain.n_modes + 1):
        g = float(prob.g.coeffs[k - 1])
        h = float(prob.h.coeffs[k - 1])
        fk = prob.forcing(k)
        if g == 0.0 and h == 0.0 and fk.zero:
            continue
        out[k - 1] = mode_derivative(prob.gamma, float(lam[k - 1]), g, h, fk, t, q)
    return out


def operator_derivative(gamma: float, lam_s, t, q: int, which: str) -> np.ndarray:
    """d_t^q of the scalar symbol of G_gamma (E_{g,1}(-L t^g)) or H_gamma (t E_{g,2}(-L t^g)).

    Any order q >= 0 is supported through d_t^q E_{g,1}(-L t^g) =
    -L t^(g-q) E_{g,g-q+1}(-L t^g).  Broadcasts over lam_s and t.
    """
    lam_s = np.asarray(lam_s, dtype=float)
    t = np.asarray(t, dtype=float)
    lam_b, t_b = np.broadcast_arrays(lam_s, t)
    z = -lam_b * t_b ** gamma
    if which == "G":
        if q == 0:
            return ml_array(gamma, 1.0, z)
        return -lam_b * t_b ** (gamma - q) * ml_array(gamma, gamma - q + 1.0, z)
    if which == "H":
        if q == 0:
            return t_b * ml_array(gamma, 2.0, z)
        return operator_derivative(gamma, lam_s, t, q - 1, "G")
    raise ValueError("which must be 'G' or 'H'")


def solution_operator_bound_check(domain: SpectralDomain, s: float, gamma: float, r: float, q: int,
                                  t_grid, w: ModeExpansion) -> dict:
    """Grid maxima of the normalized G/H derivative norms.

    Returns ratios sup_t ||d^q G w||_r / (t^(g-q) ||w||_{r+2s}),
    sup_t ||d^(q+1) H w||_r / (t^(g-q) ||w||_{r+2s}) and
    sup_t ||d^(q+1) H w||_r / (t^(g/2-q) ||w||_{r+s}).
    """
    if q not in (1, 2, 3):
        raise ValidationError("q must be 1, 2 or 3")
    if not (-s <= r <= s):
        raise ValidationError("r must lie in [-s, s]")
    if not (1.0 < gamma < 2.0):
        raise ValidationError("gamma must lie in (1,2)")
    t = np.asarray(t_grid, dtype=float)
    lam = domain.eigenvalues
    lam_s = lam ** s
    wk = w.coeffs
    dG = operator_derivative(gamma, lam_s[:, None], t[None, :], q, "G")
    dH = operator_derivative(gamma, lam_s[:, None], t[None, :], q + 1, "H")
    wgt = lam[:, None] ** r * wk[:, None] ** 2
    nG = np.sqrt(np.sum(wgt * dG ** 2, axis=0))
    nH = np.sqrt(np.sum(wgt * dH ** 2, axis=0))
    w2s = hs_norm(w, r + 2 * s)
    ws = hs_norm(w, r + s)

    def ratio(num, den):
        if den == 0.0:
            return 0.0
        return float(np.max(num / den))

    return {
        "G_ratio": ratio(nG / t ** (gamma - q), w2s),
        "H_ratio": ratio(nH / t ** (gamma - q), w2s),
        "H_ratio_half": ratio(nH / t ** (gamma / 2.0 - q), ws),
        "G_norms": nG,
        "H_norms": nH,
    }


def blowup_theory(gamma: float, q: int, source: str) -> float:
    """Predicted small-t exponent of ||d_t^q u||: g-data gamma-q, h-data (q=3) gamma/2-2."""
    if source == "g":
        return gamma - q
    if source == "h":
        return gamma / 2.0 - q + 1.0
    raise ValueError("source must be 'g' or 'h'")


def broadband_mode_numbers(gamma: float, s: float, length: float = math.pi, t_min: float = 1e-6,
                           t_max: float = 1e-2, per_decade: int = 6, low_margin: float = 3.0,
                           high_margin: float = 2.0) -> tuple[int, ...]:
    """Sine mode numbers whose lam^s are log-uniform over the scales seen in [t_min, t_max].

    The band covers lam^s t^gamma from 10^-low_margin at t_max up to
    10^high_margin at t_min.  Equal coefficients on these modes give initial
    velocities whose derivative norms follow the scale-free rate t^(gamma/2-q+1).
    """
    lo = 10.0 ** -low_margin * t_max ** -gamma
    hi = 10.0 ** high_margin * t_min ** -gamma
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    big_lam = np.geomspace(lo, hi, n)
    ks = big_lam ** (1.0 / (2.0 * s)) * length / math.pi
    return tuple(sorted({max(1, int(round(k))) for k in ks}))


def fit_blowup_exponent(prob: FracWaveProblem, q: int, r: float = 0.0, t_min: float = 1e-6,
                        t_max: float = 1e-2, n_points: int = _FIT_POINTS) -> BlowupFit:
    """Least-squares slope of log ||d_t^q u(t)||_{H^r} on log-spaced t in [t_min, t_max]."""
    if q not in (2, 3):
        raise ValidationError("q must be 2 or 3")
    if n_points < 8:
        raise ValidationError("a blow-up fit needs at least 8 points")
    t = np.geomspace(t_min, t_max, n_points)
    D = mode_history(prob, t, q)
    lam = prob.domain.eigenvalues
    norms = np.sqrt(np.sum(lam[:, None] ** r * D ** 2, axis=0))
    if np.any(~(norms > 0)) or not np.all(np.isfinite(norms)):
        raise DegenerateFit("derivative norm vanishes or is not finite on the fit window")
    x = np.log(t)
    y = np.log(norms)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    if r2 < _R2_MIN:
        raise DegenerateFit(f"blow-up fit has r2 = {r2:.4f} < {_R2_MIN}")
    return BlowupFit(float(slope), r2, (t_min, t_max), float(intercept), n_points)


# ---------------------------------------------------------------- weighted time norms

@dataclass(frozen=True)
class WeightedNormResult:
    """int_0^T t^rho ||d_t^q u||^2 dt, or +inf with a diagnosis when the endpoint is not integrable."""

    value: float
    finite: bool
    endpoint_exponent: float
    diagnosis: str
    data_A: float = 0.0

    @property
    def ratio(self) -> float:
        if not self.finite:
            return math.inf
        if self.data_A == 0.0:
            return 0.0 if self.value == 0.0 else math.inf
        return self.value / self.data_A ** 2


def _leading_exponent(prob: FracWaveProblem, q: int) -> float | None:
    """Small-t exponent of the modal q-th derivative (finite modes), None if identically 0."""
    gamma = prob.gamma
    nonzero = (np.any(prob.g.coeffs != 0.0) or np.any(prob.h.coeffs != 0.0) or prob.has_forcing)
    if not nonzero:
        return None
    if gamma == 2.0:
        return 0.0
    lead = None
    if np.any(prob.g.coeffs != 0.0):
        lead = gamma - q if q > 0 else 0.0
    if prob.has_forcing:
        f0 = np.array([float(fk.f(np.zeros(1))[0]) for fk in prob.f_modes])
        cand = None
        if np.any(f0 != 0.0):
            cand = gamma - q
        elif q >= 2:
            df0 = np.array([float(fk.derivative(1)(np.zeros(1))[0]) if not fk.zero else 0.0
                            for fk in prob.f_modes])
            cand = gamma - q + 1.0 if np.any(df0 != 0.0) else gamma - q + 2.0
        else:
            cand = gamma - q + 1.0
        lead = cand if lead is None else min(lead, cand)
    if np.any(prob.h.coeffs != 0.0):
        cand = 1.0 - q + (gamma if q >= 2 else 0.0)
        lead = cand if lead is None else min(lead, cand)
    return lead


def _graded_rule(prob: FracWaveProblem, expo: float, levels: int, n: int):
    """Geometric panels toward t = 0 with the endpoint weight t^expo carried
    exactly on the first panel (Gauss-Jacobi); panel length is capped by the
    oscillation scale of the fastest mode, but never below T/512."""
    fastest = float(np.max(prob.lam_s)) ** (1.0 / prob.gamma)
    scale = max(prob.T / 512.0, min(prob.T / 8.0, 2.0 / fastest))
    return singular_rule(prob.T, expo, levels, n, scale)


def _weighted_mode_integrals(prob: FracWaveProblem, rho: float, q: int, levels: int, n: int):
    """Per-mode int_0^T t^rho (d_t^q u_k)^2 dt plus the endpoint exponent."""
    lead = _leading_exponent(prob, q)
    if lead is None:
        return np.zeros(prob.domain.n_modes), -math.inf
    expo = rho + 2.0 * lead
    if expo <= -1.0:
        return None, expo
    t, w = _graded_rule(prob, expo, levels, n)
    D = mode_history(prob, t, q)
    vals = (w * t ** (rho - expo))[None, :] * D ** 2
    return np.array([math.fsum(row) for row in vals]), expo


def weighted_time_norm(prob: FracWaveProblem, rho: float, q: int = 3, r: float | None = None,
                       levels: int = 48, n: int = 12) -> WeightedNormResult:
    """int_0^T t^rho ||d_t^q u||^2_{H^r} dt with r = -s by default."""
    r = -prob.s if r is None else r
    A = data_norms(prob).A
    per_mode, expo = _weighted_mode_integrals(prob, rho, q, levels, n)
    if per_mode is None:
        return WeightedNormResult(math.inf, False, expo,
                                  f"integrand behaves like t^{expo:.4g} at t=0; exponent <= -1 diverges",
                                  A)
    lam = prob.domain.eigenvalues
    value = math.fsum(lam ** r * per_mode)
    return WeightedNormResult(value, True, expo, "finite", A)


# ---------------------------------------------------------------- space regularity

_VARIANTS = ("dy", "grad_dy", "L_dy")


@dataclass(frozen=True)
class SpaceRegularityFit:
    """Weighted y-derivative norms and fitted growth constants for the three variants."""

    ells: tuple[int, ...]
    norms: dict
    data: dict
    kappa_hat: dict
    normalized: dict

    @property
    def kappa_hat_1(self) -> float:
        return self.kappa_hat["dy"]

    @property
    def kappa_hat_2(self) -> float:
        return self.kappa_hat["grad_dy"]

    @property
    def kappa_hat_3(self) -> float:
        return self.kappa_hat["L_dy"]


def _check_sigma_nu(s: float, sigma: float, nu: float) -> None:
    if not (0.0 <= sigma < s):
        raise OutOfRange("sigma must satisfy 0 <= sigma < s")
    if not (0.0 <= nu < 1.0 + s):
        raise OutOfRange("nu must satisfy 0 <= nu < 1+s")


def _profile_weights(fld: ExtensionField, sigma: float, nu: float, ell: int) -> dict:
    """Per-mode factors lam^p Psi_{ell+1}(beta, theta, lam) for each variant."""
    prob = fld.problem
    s = prob.s
    alpha = 1.0 - 2.0 * s
    lam = prob.domain.eigenvalues
    lam1 = prob.domain.lambda_1
    beta1 = alpha - 2.0 * sigma - 2.0
    beta2 = alpha - 2.0 * nu
    psi1 = np.array([psi_integral(s, ell + 1, beta1, fld.theta, float(lk), lam1) for lk in lam])
    psi2 = np.array([psi_integral(s, ell + 1, beta2, fld.theta, float(lk), lam1) for lk in lam])
    return {
        "dy": lam ** (sigma + s) * psi1,
        "grad_dy": lam ** (nu + s) * psi2,
        "L_dy": lam ** (1.0 + nu + s) * psi2,
    }


def _fit_kappa(ells, norms, data):
    if data == 0.0 or all(v == 0.0 for v in norms):
        return 0.0, tuple(0.0 for _ in ells)
    ratios = [n / (math.factorial(ell + 1) ** 2 * data) for ell, n in zip(ells, norms)]
    kappa = max(rv ** (1.0 / (2 * (ell + 1))) for ell, rv in zip(ells, ratios))
    normalized = tuple(rv / kappa ** (2 * (ell + 1)) for ell, rv in zip(ells, ratios))
    return kappa, normalized


def _mode_l2_time(prob: FracWaveProblem, t_window: tuple[float, float]) -> np.ndarray:
    a, b = t_window
    x, w = legendre01(16)
    edges = np.linspace(a, b, 17)
    h = np.diff(edges)
    t = (edges[:-1, None] + h[:, None] * x).ravel()
    wt = (h[:, None] * w).ravel()
    U = mode_history(prob, t, 0)
    return np.array([math.fsum(row) for row in U ** 2 * wt[None, :]])


def space_regularity_fit(fld: ExtensionField, sigma: float, nu: float, ell_max: int,
                         t_window: tuple[float, float] | None = None, mu: float = 0.05) -> SpaceRegularityFit:
    """Norms ||d_y^(ell+1) U||^2_{L^2(0,T; L^2(omega))} and fitted kappa_hat per variant.

    Data norms follow the space-regularity estimates: for gamma < 2 the
    forcing enters in L^2(0,T;H^(r-s+2 mu s)), for gamma = 2 in L^2(0,T;H^r).
    """
    prob = fld.problem
    s = prob.s
    _check_sigma_nu(s, sigma, nu)
    if not (0 <= ell_max <= 4):
        raise ValidationError("ell_max must lie in 0..4")
    if not (0.0 < mu < 1.0):
        raise ValidationError("mu must lie in (0,1)")
    window = (0.0, prob.T) if t_window is None else t_window
    ukl2 = _mode_l2_time(prob, window)
    ells = tuple(range(ell_max + 1))
    norms = {v: [] for v in _VARIANTS}
    for ell in ells:
        wts = _profile_weights(fld, sigma, nu, ell)
        for v in _VARIANTS:
            norms[v].append(math.fsum(ukl2 * wts[v]))
    shift = 0.0 if prob.gamma == 2.0 else -s + 2.0 * mu * s
    base = {"dy": sigma, "grad_dy": nu, "L_dy": 1.0 + nu}
    data = {}
    for v, r in base.items():
        data[v] = (hs_norm(prob.g, r + s) ** 2 + hs_norm(prob.h, r) ** 2
                   + _forcing_l2(prob, r + shift) ** 2)
    kappa = {}
    normalized = {}
    for v in _VARIANTS:
        kappa[v], normalized[v] = _fit_kappa(ells, norms[v], data[v])
    return SpaceRegularityFit(ells, {v: tuple(norms[v]) for v in _VARIANTS}, data, kappa, normalized)


def pointwise_space_bounds(fld: ExtensionField, sigma: float, t_grid, ell_max: int,
                           kappa: float) -> np.ndarray:
    """||d_y^(ell+1) U(t)||^2 / ((ell+1)!^2 kappa^(2(ell+1)) ||u(t)||^2_{H^(sigma+s)}).

    Shape (ell_max+1, len(t_grid)); entries are 0 where u(t) vanishes.
    """
    prob = fld.problem
    s = prob.s
    _check_sigma_nu(s, sigma, 0.0)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    U = mode_history(prob, t, 0)
    lam = prob.domain.eigenvalues
    den_base = np.sum(lam[:, None] ** (sigma + s) * U ** 2, axis=0)
    out = np.zeros((ell_max + 1, t.size))
    for ell in range(ell_max + 1):
        wts = _profile_weights(fld, sigma, 0.0, ell)["dy"]
        num = np.sum(wts[:, None] * U ** 2, axis=0)
        den = math.factorial(ell + 1) ** 2 * kappa ** (2 * (ell + 1)) * den_base
        out[ell] = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


@dataclass(frozen=True)
class SpaceTimeResult:
    """Weighted space-time norms ||t^(rho/2) d_t^3 d_y^(ell+1) U||^2 per ell."""

    ells: tuple[int, ...]
    norms: tuple[float, ...]
    finite: bool
    endpoint_exponent: float
    data: float
    kappa_hat: float
    normalized: tuple[float, ...]
    diagnosis: str


def space_time_regularity_check(fld: ExtensionField, sigma: float, nu: float, rho: float,
                                ell_max: int) -> SpaceTimeResult:
    """Combine per-mode weighted time integrals of d_t^3 u_k with Psi weights."""
    prob = fld.problem
    s = prob.s
    _check_sigma_nu(s, sigma, nu)
    if not (0 <= ell_max <= 4):
        raise ValidationError("ell_max must lie in 0..4")
    per_mode, expo = _weighted_mode_integrals(prob, rho, 3, 48, 12)
    ells = tuple(range(ell_max + 1))
    data = (hs_norm(prob.g, sigma + 3 * s) ** 2 + hs_norm(prob.h, sigma + 2 * s) ** 2
            + _forcing_l2(prob, sigma + s, (0, 1, 2)) ** 2)
    if per_mode is None:
        inf = tuple(math.inf for _ in ells)
        return SpaceTimeResult(ells, inf, False, expo, data, math.inf, inf,
                               f"time weight leaves t^{expo:.4g} at t=0; exponent <= -1 diverges")
    norms = []
    for ell in ells:
        wts = _profile_weights(fld, sigma, nu, ell)["dy"]
        norms.append(math.fsum(per_mode * wts))
    kappa, normalized = _fit_kappa(ells, norms, data)
    return SpaceTimeResult(ells, tuple(norms), True, expo, data, kappa, normalized, "finite")


def extension_trace_derivative(fld: ExtensionField, t: float, q: int) -> np.ndarray:
    """Coefficients of tr d_t^q U = sum_k d_t^q u_k(t) psi_k(0) phi_k."""
    psi0 = fld.psi_matrix(0.0)[:, 0]
    return mode_history(fld.problem, np.array([t]), q)[:, 0] * psi0
