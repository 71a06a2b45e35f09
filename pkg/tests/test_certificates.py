import json
import math

import numpy as np
import pytest

from conecert.certificates import (
    certify_existence,
    certify_nonexistence,
    collect_constants,
    existence_conditions,
    parse_range,
    pick_rho0,
    replay,
    rho0_table,
    rows_to_csv,
    sweep_region,
    system_digest,
)
from conecert.errors import BoundsNotVerified, MissingConstant
from conecert.functionals import Bound


@pytest.fixture(scope="module")
def ex1_consts(ex1_system, example1):
    _, cfg = example1
    return collect_constants(ex1_system, cfg.constants, "existence", i0=0, rho0=1e-3)


def test_constants_provenance(ex1_consts):
    assert [b.provenance for b in ex1_consts.H] == ["user", "user"]
    assert [b.provenance for b in ex1_consts.M] == ["sampled", "sampled"]
    assert ex1_consts.k1[0].provenance == "discrete"
    assert ex1_consts.delta.provenance == "sampled"
    assert ex1_consts.mu[0].value == pytest.approx(5.7832, rel=2e-3)


def test_existence_arithmetic_is_replayable(ex1_system, ex1_consts):
    lam, eta = [0.8, 0.3], [0.1, 0.02]
    cert = certify_existence(ex1_system, ex1_consts, lam, eta)
    c = ex1_consts
    for i in range(2):
        lhs = lam[i] * c.M[i].value * c.k1[i].value + eta[i] * c.H[i].value * c.gamma[i].value
        cond = next(x for x in cert.conditions if x.name.startswith(f"d2[{i + 1}]"))
        assert cond.lhs == lhs and cond.margin == c.rho[i] - lhs
    d1 = next(x for x in cert.conditions if x.name.startswith("d1"))
    assert d1.lhs == c.mu[0].value / c.delta.value
    assert [x.to_dict() for x in replay(cert)] == [x.to_dict() for x in cert.conditions]
    assert cert.verdict == ("advisory" if all(x.satisfied for x in cert.conditions) else "fail")


def test_fully_user_supplied_constants_give_a_rigorous_pass(ex1_system, example1):
    _, cfg = example1
    over = dict(cfg.constants, M=[1.8, 0.6], delta=100.0, mu=[6.0], K1_norm=[0.25, 0.25], gamma_norm=[1.0, 1.0])
    consts = collect_constants(ex1_system, over, "existence", i0=0, rho0=1e-4)
    cert = certify_existence(ex1_system, consts, [0.5, 0.5], [0.2, 0.05])
    assert cert.verdict == "pass"
    assert "nonzero positive solution" in cert.conclusion


def test_failing_point_names_binding_condition(ex1_system, ex1_consts):
    cert = certify_existence(ex1_system, ex1_consts, [0.5, 0.5], [0.2, 0.2])
    assert cert.verdict == "fail" and cert.binding.startswith("d2[2]")
    d = json.loads(cert.to_json())
    assert d["verdict"] == "fail" and d["constants"]["i0"] == 1


def test_missing_constants(ex1_system, ex1_consts):
    from dataclasses import replace

    with pytest.raises(MissingConstant):
        existence_conditions(replace(ex1_consts, delta=None), [1, 1], [0, 0])
    consts = collect_constants(ex1_system, {}, "nonexistence")
    with pytest.raises(BoundsNotVerified):
        certify_nonexistence(ex1_system, consts)


def test_infinite_values_serialise(ex1_system, ex1_consts):
    from dataclasses import replace

    consts = replace(ex1_consts, H=[Bound(math.inf, "user"), ex1_consts.H[1]])
    cert = certify_existence(ex1_system, consts, [0.5, 0.5], [0.2, 0.05])
    d = json.loads(cert.to_json())
    assert cert.verdict == "fail"
    assert any(c["rhs"] == "inf" or c["lhs"] == "inf" for c in d["conditions"])


def test_nonexistence_contraction(ex2_system, example2):
    _, cfg = example2
    consts = collect_constants(ex2_system, cfg.constants, "nonexistence", samples=17)
    cert = certify_nonexistence(ex2_system, consts, [0.5, 0.2], [0.1, 0.05])
    k = consts.k1[0].value
    expected = max(0.5 * math.pi / 4 * k + 0.1 * (math.pi / 2 + 1), 0.2 * math.pi**3 / 8 * k + 0.05 * (math.pi**2 / 4 + 1))
    assert cert.verdict == "pass" and cert.contraction == pytest.approx(expected, rel=1e-12)
    assert certify_nonexistence(ex2_system, consts, [0.5, 0.2], [0.5, 0.05]).verdict == "fail"


def test_wrong_tau_makes_nonexistence_not_applicable(ex2_system, example2):
    _, cfg = example2
    over = dict(cfg.constants, tau=[0.1, cfg.constants["tau"][1]])
    consts = collect_constants(ex2_system, over, "nonexistence", samples=17)
    assert consts.tau[0].verified is False and consts.tau[0].witness is not None
    assert certify_nonexistence(ex2_system, consts).verdict == "not-applicable"


def test_rho0_table_and_pick(ex1_system, ex1_consts):
    table = rho0_table(ex1_system, 0, levels=20)
    r0s = [r for r, _ in table]
    assert r0s == sorted(r0s, reverse=True)
    mu = ex1_consts.mu[0].value
    r0, d = pick_rho0(table, mu, 0.5)
    assert mu / d <= 0.5
    # the pick is the largest admissible rho0
    bigger = [(r, dd) for r, dd in table if r > r0]
    assert all(mu / dd > 0.5 for _, dd in bigger)
    # unreachable lambda falls back to the closest entry
    r0, d = pick_rho0(table, mu, 1e-6)
    assert (r0, d) == table[-1]


def test_parse_range():
    np.testing.assert_allclose(parse_range("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(parse_range("0.1,0.3"), [0.1, 0.3])
    with pytest.raises(ValueError):
        parse_range("1:0:0.1")


def test_sweep_is_row_major_and_thread_independent(ex2_system, example2, monkeypatch):
    _, cfg = example2
    consts = collect_constants(ex2_system, cfg.constants, "nonexistence", samples=9)
    axes = {"lambda1": parse_range("0:2:0.5"), "eta1": parse_range("0:0.4:0.2")}
    names, rows = sweep_region(ex2_system, consts, "nonexistence", axes)
    assert names == ["lambda1", "eta1"] and len(rows) == 15
    assert [r[:2] for r in rows[:3]] == [(0.0, 0.0), (0.0, 0.2), (0.0, 0.4)]
    monkeypatch.setenv("CONECERT_THREADS", "4")
    _, rows4 = sweep_region(ex2_system, consts, "nonexistence", axes)
    assert rows4 == rows
    csv = rows_to_csv(names, rows).splitlines()
    assert csv[0] == "lambda1,eta1,verdict,binding"
    assert csv[2].startswith("0,0.20000000000000001,")
    for lam1, eta1, verdict, _ in rows:
        k = consts.k1[0].value
        lhs = lam1 * math.pi / 4 * k + eta1 * (math.pi / 2 + 1)
        lhs2 = 0.2 * math.pi**3 / 8 * k + 0.05 * (math.pi**2 / 4 + 1)
        assert (verdict == "pass") == (lhs < 1 and lhs2 < 1)


def test_existence_sweep_chooses_rho0_per_point(ex1_system, ex1_consts):
    table = rho0_table(ex1_system, 0, levels=30)
    # f1 grows like sqrt(u1) near 0, so delta is unbounded and any lambda1 > 0 reaches d1
    names, rows = sweep_region(ex1_system, ex1_consts, "existence", {"lambda1": [0.0, 0.05, 0.5]}, table)
    verdicts = [r[1] for r in rows]
    assert verdicts[0] == "fail" and rows[0][2].startswith("d1")
    assert verdicts[1:] == ["advisory", "advisory"]


def test_digest_is_stable(ex1_system, example1):
    spec, _ = example1
    assert system_digest(spec) == system_digest(ex1_system.spec)
    assert system_digest(spec) != system_digest(spec.with_parameters([1, 1], None))
