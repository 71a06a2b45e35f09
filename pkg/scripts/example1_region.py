"""Existence region of the first bundled example in the (lambda1, eta1) plane; writes CSV."""
import argparse
import sys

from conecert.certificates import collect_constants, parse_range, rho0_table, rows_to_csv, sweep_region
from conecert.fixedpoint import DiscreteSystem
from conecert.problem import load_bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-h", type=float, default=1 / 64)
    ap.add_argument("--lambda1", default="0:3:0.05")
    ap.add_argument("--eta1", default="0:0.6:0.02")
    ap.add_argument("--output", default="-")
    args = ap.parse_args()
    spec, cfg = load_bundled("example1")
    system = DiscreteSystem.build(spec, args.grid_h, cfg.solver)
    consts = collect_constants(system, cfg.constants, "existence", i0=cfg.i0)
    table = rho0_table(system, cfg.i0)
    axes = {"lambda1": parse_range(args.lambda1), "eta1": parse_range(args.eta1)}
    names, rows = sweep_region(system, consts, "existence", axes, table)
    text = rows_to_csv(names, rows)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    ok = sum(r[2] in ("pass", "advisory") for r in rows)
    print(f"{ok} of {len(rows)} points satisfy the existence conditions", file=sys.stderr)


if __name__ == "__main__":
    main()
