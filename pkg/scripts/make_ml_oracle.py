"""Generate the frozen Mittag-Leffler reference table.

Each value is the defining power series summed in multiprecision arithmetic
with enough guard digits to absorb the cancellation at large negative z, then
recomputed at a higher precision to confirm every printed digit.
"""

from __future__ import annotations

import json
import math
import sys
from multiprocessing import Pool
from pathlib import Path

import mpmath as mp
import numpy as np

SEED = 20240607
N_POINTS = 50


def series(gamma: float, mu: float, z: float, extra_digits: int = 0) -> mp.mpf:
    x = abs(z)
    lost = x ** (1.0 / gamma) / math.log(10) if z < 0 else 0.0
    dps = int(max(210, 60 + lost)) + extra_digits
    with mp.workdps(dps):
        g, m, zz = mp.mpf(gamma), mp.mpf(mu), mp.mpf(z)
        tol = mp.mpf(10) ** (-(dps - int(lost) - 5))
        total = mp.mpf(0)
        power = mp.mpf(1)
        k = 0
        peak = x ** (1.0 / gamma)
        while True:
            term = power * mp.rgamma(g * k + m)
            total += term
            if k > 2 and float(gamma * k + mu) > peak + 2 and abs(term) < tol:
                break
            power *= zz
            k += 1
        return +total


def reference(point):
    gamma, mu, z = point
    a = series(gamma, mu, z)
    b = series(gamma, mu, z, extra_digits=20)
    with mp.workdps(60):
        if abs(a - b) > mp.mpf(10) ** -40 * max(1, abs(b)):
            raise RuntimeError(f"oracle disagreement at {point}")
        return {"gamma": gamma, "mu": mu, "z": z, "value": mp.nstr(b, 30)}


def sample_points() -> list[tuple[float, float, float]]:
    rng = np.random.default_rng(SEED)
    gammas = rng.uniform(1.1, 2.0, N_POINTS)
    mus = rng.uniform(-2.0, 3.0, N_POINTS)
    zs = -(10.0 ** rng.uniform(-3.0, 4.0, N_POINTS))
    # round so the JSON holds exactly the evaluated doubles
    return [(float(round(g, 6)), float(round(m, 6)), float(f"{z:.10g}")) for g, m, z in zip(gammas, mus, zs)]


def main(out: str) -> None:
    fixed = [(1.5, 1.0, -5.0), (1.5, 1.5, -2.0), (1.5, 2.5, -2.0), (1.5, 0.5, -2.0)]
    pts = sample_points()
    with Pool() as pool:
        rand = pool.map(reference, pts, chunksize=1)
        fix = pool.map(reference, fixed)
    payload = {
        "description": "E_{gamma,mu}(z) reference values from multiprecision power series",
        "seed": SEED,
        "random": rand,
        "fixed": fix,
    }
    Path(out).write_text(json.dumps(payload, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/fracwave/data/ml_oracle.json")
