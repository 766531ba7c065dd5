"""Generate frozen reference values for Bessel K and the profile integrals.

K_nu(z) comes from the integral int_0^inf exp(-z cosh t) cosh(nu t) dt. The
profile integrals use tanh-sinh quadrature of mpmath's Bessel K, with the
derivatives of z^s K_s(z) expanded by the Leibniz rule and
K_nu^(m) = (-1)^m 2^-m sum_j C(m, j) K_{nu-m+2j}. Neither path shares code
with the package.
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40


def bessel_k_integral(nu, z):
    nu, z = mp.mpf(nu), mp.mpf(z)
    # the integrand is below exp(-200) once z cosh t > 200 + nu t
    t_end = mp.acosh(max(1, (200 + 20 * nu) / z)) + 1
    return mp.quad(lambda t: mp.exp(-z * mp.cosh(t)) * mp.cosh(nu * t), mp.linspace(0, t_end, 24))


def k_derivative(nu, z, m):
    return (-1) ** m * mp.mpf(2) ** (-m) * mp.fsum(mp.binomial(m, j) * mp.besselk(nu - m + 2 * j, z)
                                                for j in range(m + 1))


def profile_derivative(s, z, ell):
    s = mp.mpf(s)
    c = 2 ** (1 - s) / mp.gamma(s)
    total = mp.fsum(mp.binomial(ell, m) * mp.ff(s, ell - m) * z ** (s - ell + m) * k_derivative(s, z, m)
                    for m in range(ell + 1))
    return c * total


def weighted(s, power, ell, theta_ratio):
    d = lambda z: profile_derivative(s, z, ell)
    f = lambda z: z ** power * mp.exp(theta_ratio * z) * d(z) ** 2
    # psi^2 decays like exp(-2z) and theta_ratio <= 1, so the tail past z = 250 is below exp(-240)
    return mp.quad(f, [0, mp.mpf("0.1"), 1, 4, 16, 64, 250])


def main() -> None:
    bessel = []
    for nu in ("0.1", "0.3", "0.7", "1.3", "2.6"):
        for z in ("1e-6", "0.05", "0.9", "2", "2.5", "10", "80"):
            bessel.append({"nu": nu, "z": z, "K": mp.nstr(bessel_k_integral(nu, z), 25)})
    integrals = []
    for s, ell, beta, theta in (("0.3", 0, "0", "0.5"), ("0.3", 1, "0", "0.5"), ("0.3", 2, "0", "0.5"),
                                ("0.3", 3, "0", "0.5"), ("0.7", 2, "0", "0.5"), ("0.3", 0, "0.5", "0"),
                                ("0.7", 1, "-1.5", "1")):
        val = weighted(s, mp.mpf(beta) + 2 * ell, ell, mp.mpf(theta))
        integrals.append({"s": s, "ell": ell, "beta": beta, "theta": theta, "lam": "1",
                          "value": mp.nstr(val, 20)})
        print(s, ell, beta, theta, mp.nstr(val, 20))
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "special_oracle.json"
    out.write_text(json.dumps({"bessel_k": bessel, "profile_integrals": integrals}, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
