"""Undamped Picard iteration for the second bundled example from random starts in the order box."""
import argparse

import numpy as np

from conecert.certificates import certify_nonexistence, collect_constants
from conecert.fixedpoint import DiscreteSystem, picard_solve, product_norm
from conecert.problem import load_bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-h", type=float, default=1 / 64)
    ap.add_argument("--starts", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    spec, cfg = load_bundled("example2")
    system = DiscreteSystem.build(spec, args.grid_h, cfg.solver)
    cert = certify_nonexistence(system, collect_constants(system, cfg.constants, "nonexistence"))
    print(f"certificate: {cert.verdict}, contraction bound c = {cert.contraction:.4f}")
    rng = np.random.default_rng(args.seed)
    for k in range(args.starts):
        res = picard_solve(system, system.random_in_box(rng, smooth=k % 2 == 0), theta=1.0, tol=1e-12)
        norms = [s.norm for s in res.trace]
        ratios = [b / a for a, b in zip(norms, norms[1:]) if a > 1e-14]
        print(
            f"start {k:2d}: {res.status:9s} {res.iterations:3d} steps  ||u0||={norms[0]:.3f}  "
            f"max ratio={max(ratios, default=0):.4f}  final ||u||={product_norm(res.u):.1e}"
        )


if __name__ == "__main__":
    main()
