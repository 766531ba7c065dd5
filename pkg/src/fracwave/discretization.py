"""Fractional integral, discrete Caputo operator and the fully discrete modal scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit, GridNotUniform, InvalidOrder, SingularStep, ValidationError
from .spectral import ModeExpansion, SpectralDomain
from .wavesolve import FracWaveProblem, ModeForcing, mode_coefficients

__all__ = [
    "TimeGrid",
    "uniform_grid",
    "DiscreteSolution",
    "frac_integral",
    "caputo_apply",
    "l2_weights",
    "SCHEMES",
    "INIT_RULES",
    "fully_discrete_solve",
    "empirical_order",
    "stability_report",
    "discrete_l2_norm",
    "manufactured_cubic",
    "ConvergenceSweep",
    "convergence_sweep",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Partition 0 = t_0 < t_1 < ... < t_J = T."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("a time grid needs at least two nodes")
        if t[0] != 0.0:
            raise ValidationError("a time grid must start at t = 0")
        if np.any(np.diff(t) <= 0.0) or not np.all(np.isfinite(t)):
            raise ValidationError("time grid nodes must be finite and strictly increasing")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "nodes", t)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def J(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def tau(self) -> float:
        return float(np.max(self.steps))

    def is_uniform(self, rtol: float = 1e-10) -> bool:
        h = self.steps
        return bool(np.all(np.abs(h - h[0]) <= rtol * h[0]))


def uniform_grid(T: float, J: int) -> TimeGrid:
    if J < 1 or T <= 0:
        raise ValidationError("uniform grid needs J >= 1 and T > 0")
    return TimeGrid(T * np.arange(J + 1) / J)


def discrete_l2_norm(values, grid: TimeGrid) -> float:
    """Trapezoidal L^2(0,T) norm of nodal values (last axis is time)."""
    v = np.asarray(values, dtype=float)
    h = grid.steps
    sq = v ** 2
    if sq.ndim > 1:
        sq = np.sum(sq, axis=tuple(range(sq.ndim - 1)))
    return math.sqrt(math.fsum(0.5 * h * (sq[:-1] + sq[1:])))


# ---------------------------------------------------------------- fractional integral

def frac_integral(sigma: float, g, grid: TimeGrid) -> np.ndarray:
    """I^sigma g at the grid nodes for the piecewise-linear interpolant of g.

    Each panel integral of (t - r)^(sigma-1) against the two hat functions is
    done in closed form, so the only error is the interpolation of g.
    """
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise InvalidOrder("fractional integral order must be > 0")
    g = np.asarray(g, dtype=float)
    t = grid.nodes
    if g.shape != t.shape:
        raise ValidationError("samples must match the grid")
    out = np.zeros_like(t)
    a, b = t[:-1], t[1:]
    h = b - a
    gs = math.gamma(sigma)
    for j in range(1, t.size):
        A = t[j] - a[:j]
        B = t[j] - b[:j]
        i0 = (A ** sigma - B ** sigma) / sigma
        i1 = (A ** (sigma + 1.0) - B ** (sigma + 1.0)) / (sigma + 1.0)
        left = (i1 - B * i0) / h[:j]   # weight of g(a): hat (b - r)/h
        right = (A * i0 - i1) / h[:j]  # weight of g(b): hat (r - a)/h
        out[j] = (math.fsum(left * g[:j]) + math.fsum(right * g[1:j + 1])) / gs
    return out


# ---------------------------------------------------------------- Caputo operator

def l2_weights(gamma: float, J: int, tau: float) -> np.ndarray:
    """b_m = ((m+1)^(2-gamma) - m^(2-gamma)) tau^(2-gamma) / Gamma(3-gamma), m = 0..J-1."""
    m = np.arange(J + 1, dtype=float)
    p = 2.0 - gamma
    return np.diff(m ** p) * tau ** p / math.gamma(3.0 - gamma)


def _check_gamma(gamma: float) -> None:
    if not (1.0 < gamma < 2.0):
        raise InvalidOrder("discrete Caputo operator needs gamma in (1,2)")


def _interval_curvatures(u: np.ndarray, du0: float, tau: float) -> np.ndarray:
    """Second-derivative estimate on each interval [t_{i-1}, t_i], i = 1..J.

    First interval: 2 (u_1 - u_0 - tau u'(0)) / tau^2.  Interior: the mean of
    the two neighbouring second differences, centred at the interval midpoint.
    Last interval: the backward second difference.
    """
    J = u.shape[-1] - 1
    c = np.empty(u.shape[:-1] + (J,))
    c[..., 0] = 2.0 * (u[..., 1] - u[..., 0] - tau * du0) / tau ** 2
    if J >= 2:
        c[..., 1:J - 1] = (u[..., 3:] - u[..., 2:-1] - u[..., 1:-2] + u[..., :-3]) / (2.0 * tau ** 2)
        c[..., J - 1] = (u[..., J] - 2.0 * u[..., J - 1] + u[..., J - 2]) / tau ** 2
    return c


def caputo_apply(gamma: float, u, grid: TimeGrid, du0: float = 0.0) -> np.ndarray:
    """L2-type discrete Caputo derivative delta_tau^gamma u at t_j, j = 0..J.

    Piecewise-constant second derivatives are integrated exactly against the
    kernel (t - r)^(1-gamma) / Gamma(2-gamma).  Entry 0 is set to nan.  At
    t_j only curvature estimates of intervals inside [0, t_j] are used, with
    the last one taken backward.
    """
    _check_gamma(gamma)
    if not grid.is_uniform():
        raise GridNotUniform("caputo_apply requires a uniform grid")
    u = np.asarray(u, dtype=float)
    if u.shape != grid.nodes.shape:
        raise ValidationError("samples must match the grid")
    tau = grid.tau
    J = grid.J
    b = l2_weights(gamma, J, tau)
    out = np.full(J + 1, np.nan)
    if J < 1:
        return out
    full = _interval_curvatures(u, du0, tau)
    for j in range(1, J + 1):
        c = full[:j].copy()
        if j >= 2:
            c[j - 1] = (u[j] - 2.0 * u[j - 1] + u[j - 2]) / tau ** 2
        else:
            c[0] = 2.0 * (u[1] - u[0] - tau * du0) / tau ** 2
        out[j] = math.fsum(b[j - 1::-1] * c)
    return out


# ---------------------------------------------------------------- fully discrete scheme

def _init_fractional_taylor(gamma, tau, lam_s, g, h, f0):
    return g + tau * h + tau ** gamma / math.gamma(1.0 + gamma) * (f0 - lam_s * g)


def _init_taylor(gamma, tau, lam_s, g, h, f0):
    return g + tau * h


INIT_RULES = {"fractional_taylor": _init_fractional_taylor, "taylor": _init_taylor}
SCHEMES = ("L2",)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Per-mode coefficient histories U[k-1, j] on a time grid."""

    grid: TimeGrid
    U: np.ndarray
    lam_s: np.ndarray
    scheme: dict = field(default_factory=dict)

    def mode(self, k: int) -> np.ndarray:
        return self.U[k - 1]


def fully_discrete_solve(prob: FracWaveProblem, grid: TimeGrid, init_rule: str = "fractional_taylor",
                         n_modes: int | None = None, scheme: str = "L2",
                         lam_s_override: np.ndarray | None = None) -> DiscreteSolution:
    """Modal Galerkin discretization: delta_tau^gamma U_k^j + lam_k^s U_k^j = f_k(t_j).

    ``n_modes`` truncates the Galerkin space to the first m eigenmodes.
    ``lam_s_override`` replaces lam_k^s (used for synthetic probes only).
    """
    gamma = prob.gamma
    _check_gamma(gamma)
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}")
    if init_rule not in INIT_RULES:
        raise ValidationError(f"unknown init_rule {init_rule!r}")
    if not grid.is_uniform():
        raise GridNotUniform("the L2 scheme requires a uniform grid")
    m = prob.domain.n_modes if n_modes is None else int(n_modes)
    if not (1 <= m <= prob.domain.n_modes):
        raise ValidationError("n_modes must lie in 1..domain.n_modes")
    lam_s = np.asarray(prob.lam_s[:m] if lam_s_override is None else lam_s_override, dtype=float)
    if lam_s.shape != (m,):
        raise ValidationError("lam_s_override must have one entry per mode")
    tau = grid.tau
    J = grid.J
    t = grid.nodes
    g = prob.g.coeffs[:m]
    h = prob.h.coeffs[:m]
    F = np.zeros((m, J + 1))
    for k in range(1, m + 1):
        fk = prob.forcing(k)
        if not fk.zero:
            F[k - 1] = np.broadcast_to(fk.f(t), t.shape)
    U = np.zeros((m, J + 1))
    U[:, 0] = g
    U[:, 1] = INIT_RULES[init_rule](gamma, tau, lam_s, g, h, F[:, 0])
    b = l2_weights(gamma, J, tau)
    tau2 = tau * tau
    # finalized curvature estimates per interval (interval i stored at index i-1)
    C = np.zeros((m, J))
    C[:, 0] = 2.0 * (U[:, 1] - U[:, 0] - tau * h) / tau2
    for j in range(2, J + 1):
        # intervals 1..j-2 are final; interval j-1 is centred and involves U^j
        # (unless it is the first interval); interval j is backward.
        hist = C[:, : j - 2] @ b[j - 1:1:-1] if j > 2 else np.zeros(m)
        if j - 1 >= 2:
            known_c1 = (-U[:, j - 1] - U[:, j - 2] + U[:, j - 3]) / (2.0 * tau2)
            coef_c1 = 1.0 / (2.0 * tau2)
        else:
            known_c1 = C[:, 0]
            coef_c1 = 0.0
        known_c0 = (-2.0 * U[:, j - 1] + U[:, j - 2]) / tau2
        coef_c0 = 1.0 / tau2
        diag = b[1] * coef_c1 + b[0] * coef_c0 + lam_s
        if np.any(diag == 0.0):
            raise SingularStep("implicit step coefficient vanished")
        rhs = F[:, j] - hist - b[1] * known_c1 - b[0] * known_c0
        U[:, j] = rhs / diag
        if j - 1 >= 2:
            C[:, j - 2] = known_c1 + coef_c1 * U[:, j]
    return DiscreteSolution(grid, U, lam_s,
                            {"name": scheme, "gamma": gamma, "tau": tau, "init_rule": init_rule,
                             "n_modes": m})


def empirical_order(errors, rtol: float = 0.1) -> float:
    """Least-squares slope of log(err) against log(tau).

    Raises DegenerateFit for fewer than three levels, nonpositive errors, or
    errors that grow under refinement by more than ``rtol``.
    """
    pairs = sorted(((float(a), float(b)) for a, b in errors), reverse=True)
    if len(pairs) < 3:
        raise DegenerateFit("an order fit needs at least three grid levels")
    taus = np.array([p[0] for p in pairs])
    errs = np.array([p[1] for p in pairs])
    if np.any(taus <= 0) or np.any(~(errs > 0)) or not np.all(np.isfinite(errs)):
        raise DegenerateFit("errors must be positive and finite")
    if np.any(errs[1:] > errs[:-1] * (1.0 + rtol)):
        raise DegenerateFit("errors are not decreasing under refinement")
    slope, _ = np.polyfit(np.log(taus), np.log(errs), 1)
    return float(slope)


def stability_report(sol: DiscreteSolution, prob: FracWaveProblem) -> float:
    """||U||_{L^2(0,T;H^s)} / (||f||_{L^2(0,T;H^-s)} + ||g||_{H^s} + ||h||_{L^2}); 0/0 -> 0."""
    m = sol.U.shape[0]
    lam = prob.domain.eigenvalues[:m]
    s = prob.s
    grid = sol.grid
    lhs = discrete_l2_norm(sol.U * lam[:, None] ** (s / 2.0), grid)
    t = grid.nodes
    F = np.zeros((m, t.size))
    for k in range(1, m + 1):
        fk = prob.forcing(k)
        if not fk.zero:
            F[k - 1] = np.broadcast_to(fk.f(t), t.shape)
    rhs = (discrete_l2_norm(F * lam[:, None] ** (-s / 2.0), grid)
           + math.sqrt(math.fsum(lam ** s * prob.g.coeffs[:m] ** 2))
           + math.sqrt(math.fsum(prob.h.coeffs[:m] ** 2)))
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def manufactured_cubic(domain: SpectralDomain, s: float, gamma: float, T: float = 1.0,
                       modes: tuple[int, ...] = (1,)) -> tuple[FracWaveProblem, callable]:
    """Problem whose selected modes are exactly u_k(t) = t^3 (g = h = 0).

    The forcing is f_k = 6 t^(3-gamma)/Gamma(4-gamma) + lam_k^s t^3.
    Returns the problem and ``exact(t)`` giving the (n_modes, len(t)) history.
    """
    lam_s = domain.eigenvalues ** s
    c = 6.0 / math.gamma(4.0 - gamma)
    forcing = []
    for k in range(1, domain.n_modes + 1):
        if k not in modes:
            forcing.append(ModeForcing(lambda t: np.zeros_like(np.asarray(t, dtype=float)), zero=True))
            continue
        lk = float(lam_s[k - 1])
        forcing.append(ModeForcing(
            lambda t, lk=lk: c * np.asarray(t, dtype=float) ** (3.0 - gamma) + lk * np.asarray(t, dtype=float) ** 3))
    zero = ModeExpansion.zeros(domain)
    prob = FracWaveProblem(domain, s, gamma, T, zero, zero, tuple(forcing))
    mask = np.array([k in modes for k in range(1, domain.n_modes + 1)], dtype=float)

    def exact(t):
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        return mask[:, None] * tt[None, :] ** 3

    return prob, exact


@dataclass(frozen=True)
class ConvergenceSweep:
    taus: tuple[float, ...]
    errors: tuple[float, ...]
    observed: tuple[float, ...]
    fitted_order: float


def convergence_sweep(prob: FracWaveProblem, exponents, init_rule: str = "fractional_taylor",
                      exact=None) -> ConvergenceSweep:
    """Refinement study with tau = T 2^-e for each exponent e.

    The error at each level is the max over the nodes of the coarsest grid
    (shared by every level) of the Euclidean norm of the modal errors.
    ``exact(t)`` returns the (n_modes, len(t)) reference; by default the
    semi-analytic representation formula is used.
    """
    exps = sorted(int(e) for e in exponents)
    if len(exps) < 3 or exps[0] < 1:
        raise DegenerateFit("a sweep needs at least three positive exponents")
    J0 = 2 ** exps[0]
    t_ref = prob.T * np.arange(1, J0 + 1) / J0
    if exact is None:
        ref = np.stack([mode_coefficients(prob, float(t), 0) for t in t_ref], axis=1)
    else:
        ref = np.asarray(exact(t_ref), dtype=float)
    taus, errs = [], []
    for e in exps:
        J = 2 ** e
        sol = fully_discrete_solve(prob, uniform_grid(prob.T, J), init_rule)
        stride = J // J0
        diff = sol.U[:, stride::stride] - ref
        taus.append(prob.T / J)
        errs.append(float(np.max(np.sqrt(np.sum(diff * diff, axis=0)))))
    observed = [float("nan")]
    for i in range(1, len(errs)):
        observed.append(math.log(errs[i - 1] / errs[i]) / math.log(taus[i - 1] / taus[i])
                        if errs[i] > 0 and errs[i - 1] > 0 else float("nan"))
    fitted = empirical_order(list(zip(taus, errs)))
    return ConvergenceSweep(tuple(taus), tuple(errs), tuple(observed), fitted)
