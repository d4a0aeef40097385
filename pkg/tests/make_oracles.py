"""Regenerate the frozen oracle fixtures in tests/fixtures.

Everything here is independent of the package internals: rho comes from the
closed quadratic solution for alpha = (1, 2), kernels are written out by
hand and the integrals use scipy's adaptive dblquad in Euclidean polar
coordinates over the support ellipse.

    python3 tests/make_oracles.py
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy import integrate

OUT = Path(__file__).parent / "fixtures"


def rho_p0(z1, z2):
    a2 = z1 * z1
    return math.sqrt(0.5 * (a2 + math.hypot(a2, 2.0 * z2)))


# J-weighted means over the circle for alpha = (1, 2): int u1^2 J = 5pi/4, int J = 3pi
KERNELS = {
    "cos1": lambda u1, u2: u1,
    "cos2-projected": lambda u1, u2: u1 * u1 - 5.0 / 12.0,
    "x1x2": lambda u1, u2: u1 * u2,
    # int (u1^2 - u2^2) J = 5pi/4 - 7pi/4 = -pi/2, so the projection adds 1/6
    "cos2theta-projected": lambda u1, u2: u1 * u1 - u2 * u2 + 1.0 / 6.0,
}


def pv_offsupport(kernel, center, r, x):
    om = KERNELS[kernel]
    cx, cy = center

    def integrand(s, th):
        y1 = cx + r * s * math.cos(th)
        y2 = cy + r * r * s * math.sin(th)
        z1, z2 = x[0] - y1, x[1] - y2
        t = rho_p0(z1, z2)
        return om(z1 / t, z2 / (t * t)) / t**3 * s

    val, err = integrate.dblquad(integrand, 0.0, 2.0 * math.pi, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    return val * r**3, err * r**3


def pv_configs():
    rng = np.random.default_rng(2024)
    out = []
    for kernel in KERNELS:
        for _ in range(5):
            center = [float(v) for v in rng.uniform(-0.5, 0.5, 2)]
            r = float(rng.uniform(0.5, 1.5))
            d = float(rng.uniform(2.0, 5.0)) * r
            th = float(rng.uniform(0, 2 * math.pi))
            x = [center[0] + d * math.cos(th), center[1] + d * d * math.sin(th)]
            val, err = pv_offsupport(kernel, center, r, x)
            out.append({"kernel": kernel, "center": center, "r": r, "x": x, "value": val, "quad_error": err})
    return out


def main():
    OUT.mkdir(exist_ok=True)
    with open(OUT / "pv_offsupport.json", "w") as fh:
        json.dump(pv_configs(), fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
