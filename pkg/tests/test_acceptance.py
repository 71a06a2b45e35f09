"""Acceptance criteria 1-9; each test prints a single PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import disk_torsion, first_zero_j0

from conecert.certificates import (
    certify_existence,
    certify_nonexistence,
    collect_constants,
    pick_rho0,
    replay,
    rho0_table,
)
from conecert.fixedpoint import DiscreteSystem, multi_start, picard_solve, product_norm, verify_solution
from conecert.functionals import verify_linear_bounds
from conecert.geometry import Disk, Rectangle, build_grid
from conecert.greens import SolutionOperator
from conecert.operator import BoundarySpec, EllipticSpec, assemble
from conecert.repro import repro_example1


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _poisson(domain, h):
    grid = build_grid(domain, h)
    return SolutionOperator(assemble(EllipticSpec(), BoundarySpec("dirichlet"), grid))


@pytest.fixture(scope="module")
def K_disk_64():
    return _poisson(Disk((0, 0), 1), 1 / 64)


def test_criterion_1_disk_poisson_oracle():
    t0 = time.perf_counter()
    errs = {}
    for h in (1 / 32, 1 / 64):
        K = _poisson(Disk((0, 0), 1), h)
        xy = K.grid.xy
        errs[h] = float(np.max(np.abs(K.e - disk_torsion(xy[:, 0], xy[:, 1]))))
    elapsed = time.perf_counter() - t0
    ratio = errs[1 / 32] / errs[1 / 64] if errs[1 / 64] > 0 else math.inf
    ok = errs[1 / 64] < 1e-2 and ratio >= 3 and elapsed < 10
    report(
        1,
        ok,
        f"err(1/32)={errs[1 / 32]:.3e} err(1/64)={errs[1 / 64]:.3e} ratio={ratio:.3f} (need >= 3) time={elapsed:.2f}s",
    )


def test_criterion_2_k1_norm_and_dirichlet_lift(K_disk_64):
    k1 = K_disk_64.norm_K1()
    dev = float(np.max(np.abs(K_disk_64.gamma - 1.0)))
    ok = abs(k1 - 0.25) <= 0.01 * 0.25 and dev < 1e-10
    report(2, ok, f"||K(1)||={k1:.12f} |gamma-1|max={dev:.2e}")


def test_criterion_3_spectral_radius(K_disk_64):
    r_disk_exact = 1.0 / first_zero_j0() ** 2
    sd = K_disk_64.spectral_radius(tol=1e-10)
    K_sq = _poisson(Rectangle((0, 0), (1, 1)), 1 / 64)
    ss = K_sq.spectral_radius(tol=1e-10)
    r_sq_exact = 1.0 / (2 * math.pi**2)
    rel_d = abs(sd.r - r_disk_exact) / r_disk_exact
    rel_s = abs(ss.r - r_sq_exact) / r_sq_exact
    res_d = sd.residual * sd.r  # ||K phi - r phi||_inf with ||phi||_inf = 1
    res_s = ss.residual * ss.r
    ok = rel_d < 0.01 and rel_s < 0.01 and res_d <= 1e-8 and res_s <= 1e-8
    report(
        3,
        ok,
        f"disk r={sd.r:.6f} (oracle {r_disk_exact:.6f}, rel {rel_d:.1e}, res {res_d:.1e}); "
        f"square r={ss.r:.6f} (oracle {r_sq_exact:.6f}, rel {rel_s:.1e}, res {res_s:.1e})",
    )


def test_criterion_4_example1_constants():
    rep = repro_example1(1 / 64)
    got = {k: rep.rounded(k) for k in ("M_1", "M_2", "H_1", "H_2")}
    want = {"M_1": "1.765", "M_2": "0.543", "H_1": "1.401", "H_2": "6.278"}
    report(4, got == want, " ".join(f"{k}={v}" for k, v in got.items()))


def _lhs_independent(consts, lam, eta, i):
    return lam[i] * consts.M[i].value * consts.k1[i].value + eta[i] * consts.H[i].value * consts.gamma[i].value


def test_criterion_5_example1_existence_certificate(example1):
    spec, cfg = example1
    system = DiscreteSystem.build(spec, 1 / 64, cfg.solver)
    base = collect_constants(system, cfg.constants, "existence", i0=cfg.i0)
    table = rho0_table(system, cfg.i0)
    out = {}
    agree = True
    for eta2 in (0.2, 0.05):
        lam, eta = [0.5, 0.5], [0.2, eta2]
        r0, _ = pick_rho0(table, base.mu[cfg.i0].value, lam[cfg.i0])
        consts = collect_constants(system, cfg.constants, "existence", i0=cfg.i0, rho0=r0)
        cert = certify_existence(system, consts, lam, eta)
        d2 = [c for c in cert.conditions if c.name.startswith("d2")]
        for i, c in enumerate(d2):
            lhs = _lhs_independent(consts, lam, eta, i)
            agree &= abs(c.lhs - lhs) <= 1e-12 and abs(c.margin - (spec.rho[i] - lhs)) <= 1e-12
        agree &= all(a.lhs == b.lhs for a, b in zip(cert.conditions, replay(cert)))
        out[eta2] = (cert, [c.lhs for c in d2])
    fail_cert, fail_lhs = out[0.2]
    pass_cert, pass_lhs = out[0.05]
    rho = spec.rho[0]
    # the quoted figures come from the 3-decimal round-ups with ||K(1)|| = 1/4, ||gamma|| = 1
    quoted = (1.765 * 0.5 / 4 + 1.401 * 0.2, 0.543 * 0.5 / 4 + 6.278 * 0.2, 0.543 * 0.5 / 4 + 6.278 * 0.05)
    quoted_ok = all(abs(q - v) < 5e-5 for q, v in zip(quoted, (0.5008, 1.3235, 0.3818)))
    close = all(abs(a - b) < 1e-3 for a, b in zip((fail_lhs[0], fail_lhs[1], pass_lhs[1]), (0.5008, 1.3235, 0.3818)))
    ok = (
        fail_cert.verdict == "fail"
        and fail_cert.binding.startswith("d2[2]")
        and fail_lhs[0] <= rho < fail_lhs[1]
        and all(c.satisfied for c in pass_cert.conditions)
        and pass_cert.verdict in ("pass", "advisory")
        and agree
        and quoted_ok
        and close
    )
    report(
        5,
        ok,
        f"(0.5,0.5,0.2,0.2): {fail_cert.verdict} lhs=({fail_lhs[0]:.4f}, {fail_lhs[1]:.4f}) rho={rho:.4f}; "
        f"(0.5,0.5,0.2,0.05): {pass_cert.verdict} lhs2={pass_lhs[1]:.4f}; independent margins agree={agree}",
    )


def test_criterion_6_example2_nonexistence(example2):
    t0 = time.perf_counter()
    spec, cfg = example2
    system = DiscreteSystem.build(spec, 1 / 64, cfg.solver)
    tau, xi = cfg.constants["tau"], cfg.constants["xi"]
    viol = 0
    for i, c in enumerate(spec.components):
        vr = verify_linear_bounds(c.f, i, tau[i], system.functionals[i], xi[i], spec.rho, system.grid, 65, x_samples=65)
        viol += vr.violations
    lam, eta = [0.5, 0.2], [0.1, 0.05]
    system = system.with_parameters(lam, eta)
    consts = collect_constants(system, cfg.constants, "nonexistence", samples=65)
    cert = certify_nonexistence(system, consts)
    c = cert.contraction
    rng = np.random.default_rng(2024)
    worst_ratio, worst_norm, statuses = 0.0, 0.0, set()
    for k in range(20):
        u0 = system.random_in_box(rng, smooth=(k % 2 == 0))
        res = picard_solve(system, u0, theta=1.0, tol=1e-12, max_iter=200)
        statuses.add(res.status)
        norms = [s.norm for s in res.trace]
        for a, b in zip(norms, norms[1:]):
            if a > 1e-12:
                worst_ratio = max(worst_ratio, b / a)
        worst_norm = max(worst_norm, product_norm(res.u))
    elapsed = time.perf_counter() - t0
    ok = (
        viol == 0
        and cert.verdict == "pass"
        and statuses == {"converged"}
        and worst_ratio <= c + 0.05
        and worst_norm <= 1e-8
        and elapsed < 60
    )
    report(
        6,
        ok,
        f"violations={viol} verdict={cert.verdict} c={c:.4f} worst step ratio={worst_ratio:.4f} "
        f"max final ||u||={worst_norm:.1e} time={elapsed:.1f}s",
    )


def test_criterion_7_positivity(K_disk_64, ex1_system):
    rng = np.random.default_rng(7)
    K = K_disk_64
    xy = K.grid.xy
    min_kg, min_alpha = math.inf, math.inf
    for k in range(100):
        if k % 3 == 0:
            g = rng.uniform(0, 1, K.size)
        elif k % 3 == 1:
            c = rng.uniform(-0.8, 0.8, 2)
            g = np.exp(-rng.uniform(5, 80) * ((xy[:, 0] - c[0]) ** 2 + (xy[:, 1] - c[1]) ** 2))
        else:
            g = (rng.uniform(0, 1, K.size) < 0.05).astype(float)
            g[rng.integers(K.size)] = 1.0
        kg = K.apply(g)
        min_kg = min(min_kg, float(kg.min()))
        alpha, _ = K.e_positivity_report(g)
        min_alpha = min(min_alpha, alpha)
    system = ex1_system.with_parameters([0.5, 0.5], [0.2, 0.05])
    min_tu = math.inf
    for k in range(50):
        u = system.random_in_box(rng, smooth=(k % 2 == 0))
        min_tu = min(min_tu, float(system.apply(u).min()))
    ok = min_kg >= -1e-9 and min_alpha > 0 and min_tu >= -1e-9
    report(7, ok, f"min K(g)={min_kg:.2e} min alpha_g={min_alpha:.2e} min (T+Gamma)u={min_tu:.2e}")


def test_criterion_8_box_absorption(example1):
    spec, cfg = example1
    system = DiscreteSystem.build(spec, 1 / 64, cfg.solver).with_parameters([0.5, 0.5], [0.2, 0.05])
    rng = np.random.default_rng(8)
    worst = -math.inf
    for k in range(50):
        u = system.random_in_box(rng, smooth=(k % 2 == 0))
        if k == 0:
            u = system.corner(1.0)
        v = system.apply(u)
        worst = max(worst, float(np.max(np.max(np.abs(v), axis=1) - spec.rho)))
    report(8, worst <= 1e-7, f"max_i (||((T+Gamma)u)_i|| - rho_i) = {worst:.4e}")


def test_criterion_9_fixed_points_verified_by_residual(ex1_system):
    system = ex1_system.with_parameters([0.5, 0.5], [0.2, 0.05])
    results, distinct = multi_start(system, starts=4, seed=9, theta=0.5, tol=1e-9, max_iter=3000)
    checks = [verify_solution(system, r.u, tol=1e-9) for r in distinct]
    ok = bool(distinct) and all(v.in_box and v.residual <= 1e-8 for v in checks)
    desc = ", ".join(f"||u||={v.norm:.4g} res={v.residual:.1e}" for v in checks)
    report(9, ok, f"{len(distinct)} fixed point(s) from {len(results)} starts: {desc}")
