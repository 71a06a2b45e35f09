"""Reproduction tables for the two bundled examples."""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal

from .certificates import (
    certify_existence,
    certify_nonexistence,
    collect_constants,
    pick_rho0,
    rho0_table,
)
from .fixedpoint import DiscreteSystem
from .functionals import verify_linear_bounds
from .problem import load_bundled

NAMES = ("example1", "example2")
SNAP = 1e-9


def round_up(x: float, places: int = 3) -> str:
    """Decimal string of x rounded toward +inf at ``places`` decimals.

    Values within a relative 1e-9 of a representable decimal are treated as
    that decimal, so grid round-off on an exact 0.25 does not print 0.251.
    """
    q = Decimal(1).scaleb(-places)
    near = Decimal(repr(x)).quantize(q)
    if abs(float(near) - x) <= SNAP * max(1.0, abs(x)):
        return str(near)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_CEILING))


@dataclass
class ReproReport:
    name: str
    h: float
    rows: list = field(default_factory=list)  # (label, value, rounded, provenance)
    lines: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    certificates: list = field(default_factory=list)

    def add(self, label, value, provenance=""):
        self.rows.append((label, float(value), round_up(float(value)), provenance))

    def value(self, label):
        for r in self.rows:
            if r[0] == label:
                return r[1]
        raise KeyError(label)

    def rounded(self, label):
        for r in self.rows:
            if r[0] == label:
                return r[2]
        raise KeyError(label)

    def to_dict(self):
        return {
            "name": self.name,
            "h": self.h,
            "constants": [
                {"name": a, "value": b, "rounded_up": c, "provenance": d} for a, b, c, d in self.rows
            ],
            "inequalities": list(self.lines),
            "notes": list(self.notes),
            "certificates": [c.to_dict() for c in self.certificates],
        }

    def to_text(self):
        out = [f"{self.name}  (h = {self.h:g})", ""]
        w = max(len(r[0]) for r in self.rows) if self.rows else 4
        out.append(f"{'constant':<{w}}  {'value':>22}  {'rounded up':>10}  provenance")
        for a, b, c, d in self.rows:
            out.append(f"{a:<{w}}  {b:>22.17g}  {c:>10}  {d}")
        out.append("")
        out.extend(self.lines)
        if self.notes:
            out.append("")
            out.extend(self.notes)
        return "\n".join(out) + "\n"


def _k_factor(k1: float) -> str:
    r = round_up(k1)
    if r == "0.250":
        return "/4"
    return f"*{r}"


def repro_example1(h: float = 1.0 / 64, samples: int = 33) -> ReproReport:
    spec, cfg = load_bundled("example1")
    system = DiscreteSystem.build(spec, h, cfg.solver)
    consts = collect_constants(system, cfg.constants, "existence", i0=cfg.i0, samples=samples)
    rep = ReproReport("example1", h)
    for i in range(spec.n):
        rep.add(f"||K_{i + 1}(1)||", consts.k1[i].value, consts.k1[i].provenance)
    for i in range(spec.n):
        rep.add(f"||gamma_{i + 1}||", consts.gamma[i].value, consts.gamma[i].provenance)
    for i in range(spec.n):
        rep.add(f"M_{i + 1}", consts.M[i].value, consts.M[i].provenance)
    for i in range(spec.n):
        rep.add(f"H_{i + 1}", consts.H[i].value, consts.H[i].provenance)
    rep.add("rho", spec.rho[0], "exact")
    for i in range(spec.n):
        g = round_up(consts.gamma[i].value)
        gpart = "" if g == "1.000" else f"*{g}"
        rep.lines.append(
            f"{rep.rounded(f'M_{i + 1}')}*lambda{i + 1}{_k_factor(consts.k1[i].value)}"
            f" + {rep.rounded(f'H_{i + 1}')}{gpart}*eta{i + 1} <= 15/64*pi = {spec.rho[i]:.10g}"
        )

    table = rho0_table(system, cfg.i0, samples=samples)
    for lam, eta in (((0.5, 0.5), (0.2, 0.2)), ((0.5, 0.5), (0.2, 0.05))):
        r0, d = pick_rho0(table, consts.mu[cfg.i0].value, lam[cfg.i0])
        c = collect_constants(system, cfg.constants, "existence", i0=cfg.i0, rho0=r0, samples=samples)
        cert = certify_existence(system, c, lam, eta)
        rep.certificates.append(cert)
        lhs = [x.lhs for x in cert.conditions if x.name.startswith("d2")]
        rep.notes.append(
            f"point lambda={lam}, eta={eta}: verdict {cert.verdict}; d2 lhs = "
            + ", ".join(f"{v:.4f}" for v in lhs)
            + f" (rho = {spec.rho[0]:.4f}); rho0 = {r0:.4g}, mu_1 = {c.mu[cfg.i0].value:.6g}"
        )
    return rep


def repro_example2(h: float = 1.0 / 64, samples: int = 65) -> ReproReport:
    spec, cfg = load_bundled("example2")
    system = DiscreteSystem.build(spec, h, cfg.solver)
    rep = ReproReport("example2", h)
    tau = cfg.constants["tau"]
    xi = cfg.constants["xi"]
    for i, c in enumerate(spec.components):
        vr = verify_linear_bounds(c.f, i, tau[i], system.functionals[i], xi[i], spec.rho, system.grid, samples)
        rep.add(f"tau_{i + 1}", tau[i], "user")
        rep.add(f"xi_{i + 1}", xi[i], "user")
        rep.notes.append(
            f"component {i + 1}: tau/xi bounds {'verified' if vr.verified else 'VIOLATED'}"
            f" on {vr.samples} samples ({vr.violations} violations, f slack {vr.f_slack:.3g}, h slack {vr.h_slack:.3g})"
        )
    consts = collect_constants(system, cfg.constants, "nonexistence", samples=samples)
    for i in range(spec.n):
        rep.add(f"||K_{i + 1}(1)||", consts.k1[i].value, consts.k1[i].provenance)
    for i in range(spec.n):
        rep.add(f"||gamma_{i + 1}||", consts.gamma[i].value, consts.gamma[i].provenance)
    # majorant form: ||K(1)|| and ||gamma|| replaced by 1
    for i in range(spec.n):
        rep.lines.append(f"{rep.rounded(f'tau_{i + 1}')}*lambda{i + 1} + {rep.rounded(f'xi_{i + 1}')}*eta{i + 1} < 1")
    # the same condition with the computed operator norms
    for i in range(spec.n):
        a = tau[i] * consts.k1[i].value
        b = xi[i] * consts.gamma[i].value
        rep.lines.append(f"{round_up(a)}*lambda{i + 1} + {round_up(b)}*eta{i + 1} < 1   (with computed ||K(1)||, ||gamma||)")
    cert = certify_nonexistence(system, consts)
    rep.certificates.append(cert)
    rep.notes.append(
        f"point lambda={spec.lam.tolist()}, eta={spec.eta.tolist()}: verdict {cert.verdict}, contraction c = {cert.contraction:.6g}"
    )
    return rep


def repro(name: str, h: float = 1.0 / 64) -> ReproReport:
    if name == "example1":
        return repro_example1(h)
    if name == "example2":
        return repro_example2(h)
    raise KeyError(name)

