"""
Independent oracle for the Bl1CP2 soliton vector field on the diagonal.

Restricts a = (t, t, c) and evaluates the Futaki functional directly from its
definition with adaptive scipy integration (dblquad over the polygon, quad
along each edge with the 1/|u| density), then bisects in t.  For each t the
constant c is eliminated from F(1) = 0, which is affine in c after factoring
out e^{-2c}.  Nothing here touches the package quadrature.

Run as a script to regenerate ``tests/data/bl1cp2_golden.json``.
"""

import json
import math
from pathlib import Path

from scipy.integrate import dblquad, quad
from scipy.optimize import bisect

# Bl1CP2 = {z1 >= -1, z2 >= -1, z1 + z2 <= 1, z1 + z2 >= -1}
EDGES = [  # (start, end, |u|)
    ((-1.0, 0.0), (-1.0, 2.0), 1.0),
    ((0.0, -1.0), (2.0, -1.0), 1.0),
    ((2.0, -1.0), (-1.0, 2.0), math.sqrt(2.0)),
    ((-1.0, 0.0), (0.0, -1.0), math.sqrt(2.0)),
]
OPTS = dict(epsabs=1e-13, epsrel=1e-12)


def area_integral(g):
    # z1 in [-1, 2]; z2 from max(-1, -1 - z1) to 1 - z1
    val, _ = dblquad(lambda z2, z1: g(z1, z2), -1.0, 2.0,
                     lambda z1: max(-1.0, -1.0 - z1), lambda z1: 1.0 - z1, **OPTS)
    return val


def boundary_integral(g):
    total = 0.0
    for (x0, y0), (x1, y1), norm in EDGES:
        length = math.hypot(x1 - x0, y1 - y0)
        val, _ = quad(lambda s: g(x0 + s * (x1 - x0), y0 + s * (y1 - y0)), 0.0, 1.0,
                      epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val * length / norm
    return total


def futaki(t, c, zeta):
    f = lambda x, y: t * (x + y) + c
    bd = boundary_integral(lambda x, y: zeta(x, y) * math.exp(-2 * f(x, y)))
    inner = area_integral(lambda x, y: zeta(x, y) * (2 * f(x, y) - 2) * math.exp(-2 * f(x, y)))
    return bd + inner


def constant_for(t):
    # e^{2c} F_{t,c}(1) = F_{t,0}(1) + 2c int e^{-2 l}; solve for c
    F0 = futaki(t, 0.0, lambda x, y: 1.0)
    mass = area_integral(lambda x, y: math.exp(-2 * t * (x + y)))
    return -F0 / (2 * mass)


def diagonal_residual(t):
    return futaki(t, constant_for(t), lambda x, y: x)


def solve(lo=0.0, hi=1.0, xtol=1e-13):
    return bisect(diagonal_residual, lo, hi, xtol=xtol)


if __name__ == "__main__":
    t = solve()
    c = constant_for(t)
    out = {"polytope": "Bl1CP2", "a": [t, t, c],
           "method": "bisection on F(z1) along a=(t,t,c(t)); scipy dblquad/quad",
           "xtol": 1e-13}
    target = Path(__file__).resolve().parents[1] / "data" / "bl1cp2_golden.json"
    target.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))
