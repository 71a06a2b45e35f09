"""Command-line front end."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import (
    certify_existence,
    certify_nonexistence,
    collect_constants,
    parse_range,
    pick_rho0,
    rho0_table,
    rows_to_csv,
    sweep_region,
)
from .errors import ConecertError
from .fixedpoint import DiscreteSystem, multi_start, verify_solution
from .greens import SolverConfig
from .operator import validate_elliptic
from .problem import load_problem
from .repro import NAMES, repro

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_MAXITER = 2
EXIT_DIVERGED = 3
EXIT_FAIL = 4
EXIT_ADVISORY = 5
EXIT_USAGE = 64

VERDICT_EXIT = {"pass": EXIT_OK, "advisory": EXIT_ADVISORY, "fail": EXIT_FAIL, "not-applicable": EXIT_FAIL}

_PARAM = re.compile(r"^(lambda|eta)(\d+)$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p, top=False):
    # Accepted before or after the subcommand; SUPPRESS keeps a subparser from
    # overwriting a value given at the top level.
    d = None if top else argparse.SUPPRESS
    p.add_argument("--grid-h", type=float, default=d, help="lattice spacing (overrides the problem file)")
    p.add_argument("--tol", type=float, default=d, help="iteration tolerance")
    p.add_argument("--seed", type=int, default=0 if top else argparse.SUPPRESS, help="random seed")
    p.add_argument("--output", type=Path, default=d, help="write the main result here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=d, help="output format")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conecert", description="Cone fixed-point certificates for elliptic systems with functional boundary data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    _global_flags(p, top=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check a problem file and its discretisation")
    s.add_argument("problem")
    _global_flags(s)

    s = sub.add_parser("operator-info", help="K(1), gamma and the principal eigenpair per component")
    s.add_argument("problem")
    s.add_argument("--component", type=int, default=1, help="component whose fields go to the CSV (1-based)")
    _global_flags(s)

    s = sub.add_parser("solve", help="damped Picard iteration from several starts")
    s.add_argument("problem")
    s.add_argument("--lambda", dest="lam", help="comma list overriding lambda")
    s.add_argument("--eta", help="comma list overriding eta")
    s.add_argument("--theta", type=float, default=0.5, help="damping in (0, 1]")
    s.add_argument("--max-iter", type=int, default=2000)
    s.add_argument("--starts", type=int, default=3)
    _global_flags(s)

    s = sub.add_parser("certify", help="existence or non-existence certificate at one parameter point")
    s.add_argument("kind", choices=("existence", "nonexistence"))
    s.add_argument("problem")
    s.add_argument("--lambda", dest="lam", help="comma list overriding lambda")
    s.add_argument("--eta", help="comma list overriding eta")
    s.add_argument("--i0", type=int, help="component index for condition (b), 1-based")
    s.add_argument("--rho0", type=float, help="inner radius (default: chosen automatically)")
    s.add_argument("--samples", type=int, help="lattice points per box axis")
    s.add_argument("--extrapolate", action="store_true", help="also report a Richardson estimate of mu")
    _global_flags(s)

    s = sub.add_parser(
        "region",
        help="sweep a certificate over parameter ranges",
        description="Axes are given as --lambdaK a:b:step or --etaK a:b:step (inclusive), or comma lists.",
    )
    s.add_argument("problem")
    s.add_argument("--kind", choices=("existence", "nonexistence"), default="existence")
    s.add_argument("--samples", type=int, help="lattice points per box axis")
    _global_flags(s)

    s = sub.add_parser("repro", help="reproduce the constants of a bundled example")
    s.add_argument("name")
    _global_flags(s)
    return p


# ----------------------------------------------------------------- helpers


def _vector(text, n, what):
    vals = [float(t) for t in text.split(",")]
    if len(vals) != n:
        raise UsageError(f"--{what} needs {n} comma-separated values")
    return vals


def _load(args):
    spec, cfg = load_problem(args.problem)
    h = args.grid_h if args.grid_h is not None else cfg.h
    solver = cfg.solver
    if args.tol is not None:
        solver = SolverConfig(solver.method, min(solver.tol, args.tol), solver.max_iter, solver.direct_limit)
    lam = _vector(args.lam, spec.n, "lambda") if getattr(args, "lam", None) else None
    eta = _vector(args.eta, spec.n, "eta") if getattr(args, "eta", None) else None
    if lam is not None or eta is not None:
        spec = spec.with_parameters(lam, eta)
    return DiscreteSystem.build(spec, h, solver), cfg


def _emit(args, text):
    if args.output is not None:
        args.output.write_text(text)
    else:
        sys.stdout.write(text)


def _fields_csv(columns: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    for row in zip(*(columns[k] for k in names)):
        w.writerow([f"{float(v):.17g}" for v in row])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------- commands


def cmd_validate(args):
    system, cfg = _load(args)
    grid = system.grid
    comps = []
    for i, c in enumerate(system.spec.components):
        rep = validate_elliptic(c.L, grid)
        op = system.ops[i].op
        comps.append(
            {
                "component": i + 1,
                "checks": rep.checks,
                "mu0": rep.mu0,
                "boundary": c.B.kind,
                "m_matrix": op.m_matrix_certified,
                "sign_violations": op.sign_violations,
                "symmetric": op.symmetric,
            }
        )
    out = {
        "valid": True,
        "nodes": grid.size,
        "boundary_points": grid.n_boundary,
        "h": grid.h,
        "clamped_cuts": grid.clamped_cuts,
        "components": comps,
    }
    _emit(args, _dump(out))
    return EXIT_OK


def cmd_operator_info(args):
    system, cfg = _load(args)
    k = args.component - 1
    if not 0 <= k < system.n:
        raise UsageError(f"--component must lie in 1..{system.n}")
    info = []
    for i, K in enumerate(system.ops):
        sp = K.spectral_radius(tol=min(1e-10, args.tol or 1e-10))
        info.append(
            {
                "component": i + 1,
                "K1_norm": K.norm_K1(),
                "gamma_norm": K.norm_gamma(),
                "spectral_radius": sp.r,
                "mu": sp.mu,
                "bracket": [sp.lower, sp.upper],
                "power_iterations": sp.iterations,
                "eigen_residual": sp.residual,
                "m_matrix": K.op.m_matrix_certified,
                "solver": K.method,
            }
        )
    K = system.ops[k]
    xy = system.grid.xy
    fields = {"x1": xy[:, 0], "x2": xy[:, 1], "K1": K.e, "gamma": K.gamma, "phi": K.spectral_radius().phi}
    if args.format == "csv":
        _emit(args, _fields_csv(fields))
    else:
        if args.output is not None:
            args.output.write_text(_fields_csv(fields))
        sys.stdout.write(_dump({"nodes": system.grid.size, "h": system.grid.h, "operators": info}))
    return EXIT_OK


def cmd_solve(args):
    system, cfg = _load(args)
    tol = args.tol if args.tol is not None else 1e-8
    results, distinct = multi_start(
        system, starts=args.starts, seed=args.seed, theta=args.theta, tol=tol, max_iter=args.max_iter
    )
    report = {"lambda": system.spec.lam.tolist(), "eta": system.spec.eta.tolist(), "starts": [], "fixed_points": []}
    for r in results:
        report["starts"].append(
            {
                "start": r.start,
                "status": r.status,
                "iterations": r.iterations,
                "residual": r.residual,
                "norm": float(np.max(np.abs(r.u))),
                "clamp_events": r.clamp_events,
                "suspicious": r.suspicious,
            }
        )
    for r in distinct:
        v = verify_solution(system, r.u, tol)
        report["fixed_points"].append(
            {"start": r.start, "residual": v.residual, "norm": v.norm, "component_norms": v.component_norms, "nonzero": v.nonzero}
        )
    best = distinct[0] if distinct else min(results, key=lambda r: r.residual if np.isfinite(r.residual) else np.inf)
    xy = system.grid.xy
    fields = {"x1": xy[:, 0], "x2": xy[:, 1], **{f"u{i + 1}": best.u[i] for i in range(system.n)}}
    if args.format == "csv":
        _emit(args, _fields_csv(fields))
    else:
        if args.output is not None:
            args.output.write_text(_fields_csv(fields))
        sys.stdout.write(_dump(report))
    if distinct:
        return EXIT_OK
    if any(r.status == "maxiter" for r in results):
        return EXIT_MAXITER
    return EXIT_DIVERGED


def _samples(args, cfg):
    return args.samples if args.samples is not None else cfg.samples


def cmd_certify(args):
    system, cfg = _load(args)
    samples = _samples(args, cfg)
    if args.kind == "existence":
        i0 = args.i0 - 1 if args.i0 is not None else cfg.i0
        if not 0 <= i0 < system.n:
            raise UsageError(f"--i0 must lie in 1..{system.n}")
        consts = collect_constants(
            system, cfg.constants, "existence", i0=i0, samples=samples, x_samples=cfg.x_samples, extrapolate=args.extrapolate
        )
        rho0 = args.rho0 if args.rho0 is not None else (None if cfg.rho0 == "auto" else cfg.rho0)
        if rho0 is None:
            table = rho0_table(system, i0, samples=samples, x_samples=cfg.x_samples)
            rho0, _ = pick_rho0(table, consts.mu[i0].value, system.spec.lam[i0])
        consts = collect_constants(
            system, cfg.constants, "existence", i0=i0, rho0=rho0, samples=samples, x_samples=cfg.x_samples,
            extrapolate=args.extrapolate,
        )
        cert = certify_existence(system, consts)
    else:
        consts = collect_constants(system, cfg.constants, "nonexistence", samples=samples, x_samples=cfg.x_samples)
        cert = certify_nonexistence(system, consts)
    _emit(args, cert.to_json(indent=2) + "\n")
    return VERDICT_EXIT[cert.verdict]


def cmd_region(args, extra):
    system, cfg = _load(args)
    axes = {}
    it = iter(extra)
    for tok in it:
        name, _, value = tok.lstrip("-").partition("=")
        m = _PARAM.match(name)
        if not tok.startswith("--") or m is None:
            raise UsageError(f"unrecognized argument {tok!r}")
        if not 1 <= int(m.group(2)) <= system.n:
            raise UsageError(f"{name}: component index out of range")
        if not value:
            value = next(it, None)
            if value is None:
                raise UsageError(f"{name} needs a range")
        try:
            axes[name] = parse_range(value)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if not axes:
        raise UsageError("region needs at least one --lambdaK or --etaK range")
    samples = _samples(args, cfg)
    table = None
    if args.kind == "existence":
        consts = collect_constants(system, cfg.constants, "existence", i0=cfg.i0, samples=samples, x_samples=cfg.x_samples)
        if cfg.rho0 == "auto":
            table = rho0_table(system, cfg.i0, samples=samples, x_samples=cfg.x_samples)
        else:
            consts = collect_constants(
                system, cfg.constants, "existence", i0=cfg.i0, rho0=cfg.rho0, samples=samples, x_samples=cfg.x_samples
            )
    else:
        consts = collect_constants(system, cfg.constants, "nonexistence", samples=samples, x_samples=cfg.x_samples)
    names, rows = sweep_region(system, consts, args.kind, axes, table)
    if args.format == "json":
        _emit(args, _dump({"axes": names, "rows": [list(r) for r in rows]}))
    else:
        _emit(args, rows_to_csv(names, rows))
    return EXIT_OK


def cmd_repro(args):
    if args.name not in NAMES:
        raise UsageError(f"unknown example {args.name!r}; choose from {', '.join(NAMES)}")
    h = args.grid_h if args.grid_h is not None else 1.0 / 64
    rep = repro(args.name, h)
    _emit(args, _dump(rep.to_dict()) if args.format == "json" else rep.to_text())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if extra and args.command != "region":
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "operator-info":
            return cmd_operator_info(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "certify":
            return cmd_certify(args)
        if args.command == "region":
            return cmd_region(args, extra)
        return cmd_repro(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"conecert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConecertError as exc:
        print(f"conecert: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"conecert: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
