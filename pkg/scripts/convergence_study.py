"""Grid refinement on the unit disk: K(1), a smooth non-polynomial solution, r(K) and the Neumann lift."""
import argparse
import math

import numpy as np
from scipy.special import i1, jn_zeros

from conecert.geometry import Disk, build_grid
from conecert.greens import SolutionOperator, richardson
from conecert.operator import BoundarySpec, EllipticSpec, assemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=4, help="h = 1/8 ... 1/2^(levels+2)")
    args = ap.parse_args()
    disk = Disk((0, 0), 1)
    a = math.pi / 2
    r_exact = 1 / jn_zeros(0, 1)[0] ** 2
    g_exact = 1 / i1(1.0)
    print(f"{'h':>8} {'nodes':>7} {'err K(1)':>10} {'err smooth':>11} {'r(K)':>12} {'err r':>9} {'gamma_N(0)':>11}")
    prev_r = None
    for k in range(args.levels):
        h = 1 / 2 ** (k + 3)
        grid = build_grid(disk, h)
        K = SolutionOperator(assemble(EllipticSpec(), BoundarySpec(), grid))
        r2 = (grid.xy**2).sum(axis=1)
        e1 = np.max(np.abs(K.e - (1 - r2) / 4))
        src = 4 * a * a * r2 * np.cos(a * r2) + 4 * a * np.sin(a * r2)
        e2 = np.max(np.abs(K(src) - np.cos(a * r2)))
        r = K.spectral_radius().r
        KN = SolutionOperator(assemble(EllipticSpec.from_strings(reaction="1"), BoundarySpec("neumann"), grid))
        gN = KN.gamma[grid.index_of(0, 0)]
        print(f"{h:8.5f} {grid.size:7d} {e1:10.2e} {e2:11.3e} {r:12.8f} {abs(r - r_exact):9.2e} {gN:11.6f}")
        if prev_r is not None:
            print(f"{'':8} Richardson r = {richardson(prev_r, r):.8f}")
        prev_r = r
    print(f"exact: r = {r_exact:.8f}, gamma_N(0) = {g_exact:.6f}")


if __name__ == "__main__":
    main()
