import math

import numpy as np
import pytest

from conecert import expr as ex
from conecert.errors import BoundViolated, NegativeFunctionalValue, NegativeNonlinearity, PointOutsideDomain
from conecert.functionals import (
    BoundFunctional,
    FunctionalSpec,
    Integral,
    PointEval,
    box_lattice,
    check_functional_sign,
    check_nonnegative,
    estimate_H,
    estimate_M,
    find_delta,
    nemytskii,
    verify_linear_bounds,
)

RHO = 15 * math.pi / 64
SIG2 = ex.signature(2)


def f(text):
    return ex.parse(text, SIG2)


def test_box_lattice_includes_corners():
    L = box_lattice([1.0, 2.0], 3)
    assert L.shape == (9, 2)
    assert [0.0, 0.0] in L.tolist() and [1.0, 2.0] in L.tolist()


def test_M_for_the_first_example(example1, disk_grid_32):
    spec, _ = example1
    M1 = estimate_M(spec.components[0].f, spec.rho, disk_grid_32)
    M2 = estimate_M(spec.components[1].f, spec.rho, disk_grid_32)
    assert M1.value == pytest.approx(math.sqrt(RHO) + math.tan(RHO), rel=1e-14)
    assert M2.value == pytest.approx(RHO**2, rel=1e-14)
    assert M1.provenance == "sampled" and not M1.rigorous
    assert M1.witness["u"] in ([RHO, RHO], [RHO, 0.0], [0.0, RHO])


def test_H_sampled_matches_closed_form(ex1_system):
    rho = ex1_system.spec.rho
    H1 = estimate_H(ex1_system.functionals[0], rho)
    H2 = estimate_H(ex1_system.functionals[1], rho)
    assert H1.value == pytest.approx(RHO**2 + math.sqrt(RHO), rel=1e-13)
    # integral of the constant field rho over the unit disk is pi * rho exactly
    assert H2.value == pytest.approx(RHO**0.25 + (math.pi * RHO) ** 2, rel=1e-12)


def test_H_of_a_constant_functional_is_exact(disk_grid_32):
    h = BoundFunctional(FunctionalSpec((), ex.parse("2.5")), disk_grid_32)
    b = estimate_H(h, [1.0])
    assert b.value == 2.5 and b.provenance == "exact" and b.rigorous


def test_delta_blows_up_like_inverse_sqrt(example1, disk_grid_32):
    spec, _ = example1
    f1 = spec.components[0].f
    prods = []
    for r0 in (1e-2, 1e-4, 1e-6):
        d = find_delta(f1, 0, r0, disk_grid_32, 2)
        prods.append(d * math.sqrt(r0))
    assert all(p >= 1.0 for p in prods)
    assert abs(prods[-1] - 1.0) < 1e-2
    assert prods[0] > prods[-1]


def test_delta_is_zero_when_f_vanishes_on_the_axis(disk_grid_32):
    assert find_delta(f("u2"), 0, 0.1, disk_grid_32, 2) == 0.0


def test_negative_nonlinearity_reported_with_witness(disk_grid_32):
    g = f("u1 - 0.5")
    with pytest.raises(NegativeNonlinearity) as info:
        estimate_M(g, [1.0, 1.0], disk_grid_32)
    assert info.value.witness["value"] < 0
    assert estimate_M(g, [1.0, 1.0], disk_grid_32, allow_negative=True).value == pytest.approx(0.5)
    fmin, wit = check_nonnegative(g, [1.0, 1.0], disk_grid_32)
    assert fmin == pytest.approx(-0.5) and wit["u"][0] == 0.0


def test_x_dependent_nonlinearity_samples_space(disk_grid_32):
    M = estimate_M(f("u1 * (1 + x1)"), [1.0, 1.0], disk_grid_32)
    assert 1.9 < M.value <= 2.0
    assert M.witness["x"][0] > 0.9


def test_nemytskii(disk_grid_32):
    u = np.vstack([np.full(disk_grid_32.size, 0.5), disk_grid_32.xy[:, 0] ** 2])
    out = nemytskii(f("u1 + u2 * x2"), u, disk_grid_32)
    np.testing.assert_allclose(out, 0.5 + disk_grid_32.xy[:, 0] ** 2 * disk_grid_32.xy[:, 1])


def test_point_evaluation_reproduces_linear_fields(disk_grid_32):
    spec = FunctionalSpec.build({"p": PointEval(0, (0.3141, -0.2718))}, "p")
    h = BoundFunctional(spec, disk_grid_32)
    u = (1 + 2 * disk_grid_32.xy[:, 0] - disk_grid_32.xy[:, 1])[None, :]
    assert h(u) == pytest.approx(1 + 2 * 0.3141 + 0.2718, rel=1e-12)


def test_integral_functional(disk_grid_32):
    spec = FunctionalSpec.build({"q": Integral(0, ex.parse("x1^2", ["x1"]))}, "q")
    h = BoundFunctional(spec, disk_grid_32)
    assert h(np.ones((1, disk_grid_32.size))) == pytest.approx(math.pi / 4, rel=1e-2)


def test_functional_errors(disk_grid_32):
    with pytest.raises(PointOutsideDomain):
        BoundFunctional(FunctionalSpec.build({"p": PointEval(0, (1.5, 0.0))}, "p"), disk_grid_32)
    h = BoundFunctional(FunctionalSpec.build({"p": PointEval(0, (0.0, 0.0))}, "0 - p"), disk_grid_32)
    with pytest.raises(NegativeFunctionalValue):
        h(np.ones((1, disk_grid_32.size)))
    assert check_functional_sign(h, [1.0])[0] == pytest.approx(-1.0)


def test_linear_bounds_of_the_second_example(example2, ex2_system):
    spec, cfg = example2
    for i, c in enumerate(spec.components):
        rep = verify_linear_bounds(
            c.f, i, cfg.constants["tau"][i], ex2_system.functionals[i], cfg.constants["xi"][i], spec.rho, ex2_system.grid, 33
        )
        assert rep.verified and rep.violations == 0 and rep.witness is None
        assert rep.f_slack >= 0 and rep.h_slack >= 0


def test_linear_bounds_violation_has_witness(example2, ex2_system):
    spec, cfg = example2
    c = spec.components[1]
    rep = verify_linear_bounds(c.f, 1, 1.0, ex2_system.functionals[1], 10.0, spec.rho, ex2_system.grid, 17)
    assert not rep.verified and rep.f_violations > 0 and rep.h_violations == 0
    u = rep.witness["u"]
    assert u[1] ** 4 * math.cos(u[0]) > u[1]
    with pytest.raises(BoundViolated):
        verify_linear_bounds(c.f, 1, 1.0, None, 0.0, spec.rho, ex2_system.grid, 17, raise_on_violation=True)
