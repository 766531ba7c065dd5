"""Generate frozen reference values for modal solutions with forcing.

The Duhamel convolution is integrated with tanh-sinh quadrature at 50 digits;
the Mittag-Leffler kernels are summed from their power series at the same
precision.  The output feeds the gamma = 2 acceptance check and the tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
TIMES = ["0.3", "1.0", "2.7"]


def ml(gamma, mu, z):
    total, k = mp.mpf(0), 0
    while True:
        term = z ** k * mp.rgamma(gamma * k + mu)
        total += term
        if k > 10 and abs(term) < mp.mpf(10) ** (-45):
            return total
        k += 1


def forcing(spec):
    kind, args = spec["kind"], [mp.mpf(a) for a in spec["args"]]
    if kind == "const":
        return lambda t: args[0]
    if kind == "sine":
        a, w, ph = args
        return lambda t: a * mp.sin(w * t + ph)
    if kind == "poly":
        return lambda t: sum(c * t ** j for j, c in enumerate(args))
    raise ValueError(kind)


def solution(case, t):
    gamma, lam = mp.mpf(case["gamma"]), mp.mpf(case["lam_s"])
    g, h, f = mp.mpf(case["g"]), mp.mpf(case["h"]), forcing(case["f"])
    t = mp.mpf(t)
    if gamma == 2:
        w = mp.sqrt(lam)
        u = g * mp.cos(w * t) + h * mp.sin(w * t) / w
        du = -g * w * mp.sin(w * t) + h * mp.cos(w * t)
        u += mp.quad(lambda r: mp.sin(w * r) / w * f(t - r), [0, t])
        du += mp.quad(lambda r: mp.cos(w * r) * f(t - r), [0, t])
        return u, du
    z = -lam * t ** gamma
    u = g * ml(gamma, 1, z) + t * h * ml(gamma, 2, z)
    du = -lam * t ** (gamma - 1) * g * ml(gamma, gamma, z) + h * ml(gamma, 1, z)
    u += mp.quad(lambda r: r ** (gamma - 1) * ml(gamma, gamma, -lam * r ** gamma) * f(t - r), [0, t])
    du += mp.quad(lambda r: r ** (gamma - 1) * ml(gamma, gamma, -lam * r ** gamma) * f_prime(case, t - r), [0, t])
    du += t ** (gamma - 1) * ml(gamma, gamma, z) * forcing(case["f"])(0)
    return u, du


def f_prime(case, t):
    return mp.diff(forcing(case["f"]), t)


CASES = [
    {"gamma": "2", "lam_s": "4", "g": "0.3", "h": "-0.7", "f": {"kind": "const", "args": ["0.5"]}},
    {"gamma": "2", "lam_s": "2.5", "g": "1", "h": "0.2", "f": {"kind": "sine", "args": ["1.2", "1.3", "0.4"]}},
    {"gamma": "2", "lam_s": "1", "g": "0", "h": "0", "f": {"kind": "sine", "args": ["1", "1", "0"]}},
    {"gamma": "2", "lam_s": "9", "g": "-0.4", "h": "1.5", "f": {"kind": "poly", "args": ["1", "-0.5", "0.25"]}},
    {"gamma": "1.5", "lam_s": "1", "g": "0", "h": "0", "f": {"kind": "sine", "args": ["1", "1", "0"]}},
    {"gamma": "1.5", "lam_s": "4", "g": "0.5", "h": "-0.25", "f": {"kind": "sine", "args": ["1", "2", "0.3"]}},
    {"gamma": "1.25", "lam_s": "2", "g": "1", "h": "0", "f": {"kind": "poly", "args": ["0.5", "1"]}},
]


def main() -> None:
    rows = []
    for case in CASES:
        for t in TIMES:
            u, du = solution(case, t)
            rows.append({**case, "t": t, "u": mp.nstr(u, 30), "du": mp.nstr(du, 30)})
    out = Path(__file__).resolve().parents[1] / "src" / "fracwave" / "data" / "wave_oracle.json"
    out.write_text(json.dumps({"digits": 30, "rows": rows}, indent=1) + "\n")
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()
