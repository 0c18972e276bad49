"""Dual certificate for the one-dimensional scalar model over a range of shifts.

    python scripts/scalar_certificate.py [--n 31] [--amplitude 0.1]
"""
import argparse

import numpy as np

from glduality.duality import certify_scalar, scalar_multistart
from glduality.energy import newton_scalar
from glduality.fields import GLParams
from glduality.grid import BoxGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=31)
    ap.add_argument("--amplitude", type=float, default=0.1)
    args = ap.parse_args()
    g = BoxGrid.unit_interval_interior(args.n)
    f = args.amplitude * np.sin(np.pi * g.coords(0)[1:-1])
    p = GLParams()
    u0 = newton_scalar(g, f, p)
    best = scalar_multistart(g, f, p).best
    print(f"best multistart primal value {best:.15g}")
    print(f"{'K':>6} {'gap':>10} {'dual':>20} {'bounds':>7} {'E-box':>6}")
    for K in (None, 10.0, 20.0, 40.0):
        c = certify_scalar(g, u0, f, p, K=K)
        print(f"{c.K:>6g} {c.gap:>10.2e} {c.dual:>20.15g} {c.bounds_hold!s:>7} {c.e_box!s:>6}")


if __name__ == "__main__":
    main()
