"""Existence / non-existence certificates and (lambda, eta) feasibility sweeps.

Certificates are pure arithmetic on a :class:`ConstantsReport`; everything
numerical (operator norms, spectral radius, sampled maxima) is gathered up
front by :func:`collect_constants`, so a stored certificate can be replayed
exactly from its own contents.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import BoundsNotVerified, MissingConstant
from .functionals import (
    DEFAULT_SAMPLES,
    Bound,
    check_nonnegative,
    estimate_H,
    estimate_M,
    find_delta,
    verify_linear_bounds,
)
from .greens import richardson


@dataclass
class ConstantsReport:
    rho: list
    k1: list  # ||K_i(1)||_inf
    gamma: list  # ||gamma_i||_inf
    f_min: list = field(default_factory=list)
    M: list = field(default_factory=list)
    H: list = field(default_factory=list)
    mu: list = field(default_factory=list)  # Bound or None per component
    tau: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    delta: Optional[Bound] = None
    rho0: Optional[float] = None
    i0: Optional[int] = None  # 0-based
    h: Optional[float] = None
    mu_extrapolated: Optional[float] = None

    def bounds(self):
        """(name, Bound) for every populated constant."""
        out = []
        for name in ("k1", "gamma", "M", "H", "mu", "tau", "xi"):
            for i, b in enumerate(getattr(self, name)):
                if b is not None:
                    out.append((f"{name}[{i + 1}]", b))
        if self.delta is not None:
            out.append(("delta", self.delta))
        return out

    def to_dict(self):
        def blist(xs):
            return [b.to_dict() if b is not None else None for b in xs]

        return {
            "rho": list(self.rho),
            "K1_norm": blist(self.k1),
            "gamma_norm": blist(self.gamma),
            "f_min": list(self.f_min),
            "M": blist(self.M),
            "H": blist(self.H),
            "mu": blist(self.mu),
            "tau": blist(self.tau),
            "xi": blist(self.xi),
            "delta": self.delta.to_dict() if self.delta is not None else None,
            "rho0": self.rho0,
            "i0": None if self.i0 is None else self.i0 + 1,
            "h": self.h,
            "mu_extrapolated": self.mu_extrapolated,
        }


@dataclass
class Condition:
    name: str
    satisfied: bool
    lhs: float
    rhs: float
    strict: bool = False

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        return {
            "name": self.name,
            "satisfied": bool(self.satisfied),
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "margin": _num(self.margin),
            "strict": self.strict,
        }


@dataclass
class Certificate:
    kind: str  # existence | nonexistence
    digest: str
    lam: list
    eta: list
    constants: ConstantsReport
    conditions: list
    verdict: str  # pass | advisory | fail | not-applicable
    caveats: list = field(default_factory=list)
    conclusion: str = ""
    contraction: Optional[float] = None

    @property
    def binding(self):
        """The violated condition with the worst margin, else the tightest one."""
        pool = [c for c in self.conditions if not c.satisfied] or [
            c for c in self.conditions if c.name.startswith(("d", "nonexistence"))
        ]
        if not pool:
            return ""
        return min(pool, key=lambda c: c.margin).name

    def to_dict(self):
        return {
            "kind": self.kind,
            "system_digest": self.digest,
            "lambda": list(self.lam),
            "eta": list(self.eta),
            "verdict": self.verdict,
            "binding": self.binding,
            "conclusion": self.conclusion,
            "contraction": _num(self.contraction) if self.contraction is not None else None,
            "conditions": [c.to_dict() for c in self.conditions],
            "constants": self.constants.to_dict(),
            "caveats": list(self.caveats),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def system_digest(spec) -> str:
    return hashlib.sha256(repr(spec).encode()).hexdigest()[:16]


# ------------------------------------------------------------------ constants


def _override(overrides, key, i):
    vals = (overrides or {}).get(key)
    if vals is None:
        return None
    if not isinstance(vals, (list, tuple)):
        return float(vals)
    v = vals[i] if i < len(vals) else None
    return None if v is None else float(v)


def collect_constants(
    system,
    overrides: Optional[dict] = None,
    kind: str = "existence",
    i0: Optional[int] = None,
    rho0: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    x_samples: Optional[int] = None,
    spectral_tol: float = 1e-10,
    extrapolate: bool = False,
) -> ConstantsReport:
    """Gather every constant the requested theorem needs.

    User overrides (majorants) take precedence and are tagged ``user``;
    operator quantities are ``discrete``; lattice estimates are ``sampled``.
    ``i0`` is 0-based.  With ``rho0`` None and ``kind == "existence"`` the
    caller is expected to fill rho0/delta (see :func:`rho0_table`).
    """
    spec = system.spec
    n = spec.n
    rho = [float(r) for r in spec.rho]
    rep = ConstantsReport(rho=rho, k1=[], gamma=[], h=system.grid.h)
    for i in range(n):
        K = system.ops[i]
        v = _override(overrides, "K1_norm", i)
        rep.k1.append(Bound(v, "user") if v is not None else Bound(K.norm_K1(), "discrete"))
        v = _override(overrides, "gamma_norm", i)
        rep.gamma.append(Bound(v, "user") if v is not None else Bound(K.norm_gamma(), "discrete"))

    if kind == "existence":
        for i, c in enumerate(spec.components):
            fmin, _ = check_nonnegative(c.f, rho, system.grid, samples, x_samples)
            rep.f_min.append(fmin)
            v = _override(overrides, "M", i)
            rep.M.append(Bound(v, "user") if v is not None else estimate_M(c.f, rho, system.grid, samples, x_samples, allow_negative=True))
            v = _override(overrides, "H", i)
            rep.H.append(Bound(v, "user") if v is not None else estimate_H(system.functionals[i], rho, samples))
        rep.i0 = 0 if i0 is None else i0
        rep.mu = [None] * n
        v = _override(overrides, "mu", rep.i0)
        if v is not None:
            rep.mu[rep.i0] = Bound(v, "user")
        else:
            r = system.ops[rep.i0].spectral_radius(tol=spectral_tol).r
            rep.mu[rep.i0] = Bound(1.0 / r, "discrete")
            if extrapolate:
                rep.mu_extrapolated = mu_richardson(system, rep.i0, r, spectral_tol)
        if rho0 is not None:
            rep.rho0 = float(rho0)
            d = (overrides or {}).get("delta")
            if d is not None:
                rep.delta = Bound(float(d), "user")
            else:
                c = spec.components[rep.i0]
                rep.delta = Bound(find_delta(c.f, rep.i0, rep.rho0, system.grid, n, samples, x_samples), "sampled")
    elif kind == "nonexistence":
        for i, c in enumerate(spec.components):
            tau = _override(overrides, "tau", i)
            xi = _override(overrides, "xi", i)
            if tau is None or xi is None:
                rep.tau.append(None if tau is None else Bound(tau, "user", verified=False))
                rep.xi.append(None if xi is None else Bound(xi, "user", verified=False))
                continue
            vr = verify_linear_bounds(c.f, i, tau, system.functionals[i], xi, rho, system.grid, samples, x_samples)
            wit = vr.witness if not vr.verified else None
            rep.tau.append(Bound(tau, "user", verified=vr.f_violations == 0, witness=wit))
            rep.xi.append(Bound(xi, "user", verified=vr.h_violations == 0, witness=wit))
    else:
        raise ValueError(f"unknown certificate kind {kind!r}")
    return rep


def mu_richardson(system, i, r_fine, tol):
    """Richardson estimate of mu_i from this grid and one twice as coarse."""
    from .errors import EmptyGrid
    from .geometry import build_grid
    from .greens import SolutionOperator
    from .operator import assemble

    c = system.spec.components[i]
    try:
        coarse = build_grid(system.spec.domain, 2 * system.grid.h)
    except EmptyGrid:
        return None
    K = SolutionOperator(assemble(c.L, c.B, coarse), system.solver)
    r_coarse = K.spectral_radius(tol=tol).r
    return 1.0 / richardson(r_coarse, r_fine)


def rho0_table(system, i0, levels: int = 40, samples: int = DEFAULT_SAMPLES, x_samples=None):
    """(rho0, delta) for rho0 = min(rho) / 2**k, k = 1..levels."""
    c = system.spec.components[i0]
    top = float(min(system.spec.rho))
    out = []
    for k in range(1, levels + 1):
        r0 = top / 2.0**k
        out.append((r0, find_delta(c.f, i0, r0, system.grid, system.n, samples, x_samples)))
    return out


def pick_rho0(table, mu, lam_i0):
    """Largest tabulated rho0 whose delta satisfies mu/delta <= lambda_i0.

    Falls back to the entry with the smallest shortfall.
    """
    best = None
    for r0, d in table:
        if d > 0 and mu / d <= lam_i0:
            return r0, d
        gap = mu / d - lam_i0 if d > 0 else math.inf
        if best is None or gap < best[0]:
            best = (gap, r0, d)
    return best[1], best[2]


# ----------------------------------------------------------------- theorems


def existence_conditions(consts: ConstantsReport, lam, eta):
    """Conditions (a)-(d) of the existence theorem, evaluated on stored constants."""
    n = len(consts.rho)
    if consts.i0 is None or consts.delta is None or consts.rho0 is None:
        raise MissingConstant("existence needs i0, rho0 and delta")
    for name in ("M", "H"):
        if len(getattr(consts, name)) != n or any(b is None for b in getattr(consts, name)):
            raise MissingConstant(f"missing {name}")
    mu = consts.mu[consts.i0] if consts.mu else None
    if mu is None:
        raise MissingConstant("missing mu for i0")
    conds = []
    for i in range(n):
        fmin = consts.f_min[i] if consts.f_min else 0.0
        conds.append(Condition(f"a: f_{i + 1} >= 0", fmin >= 0, 0.0, fmin))
    rmin = min(consts.rho)
    r0 = consts.rho0
    conds.append(Condition("b: 0 < rho0 < min rho", 0 < r0 < rmin, r0, rmin, strict=True))
    d = consts.delta.value
    conds.append(Condition(f"b: delta > 0 on I0 (i0={consts.i0 + 1})", d > 0, 0.0, d, strict=True))
    for i in range(n):
        H = consts.H[i].value
        conds.append(Condition(f"c: H_{i + 1} < inf", math.isfinite(H), H, math.inf, strict=True))
    lhs = mu.value / d if d > 0 else math.inf
    conds.append(Condition("d1: mu_i0 / delta <= lambda_i0", lhs <= lam[consts.i0], lhs, float(lam[consts.i0])))
    for i in range(n):
        lhs = lam[i] * consts.M[i].value * consts.k1[i].value + eta[i] * consts.H[i].value * consts.gamma[i].value
        conds.append(Condition(f"d2[{i + 1}]: lambda M ||K(1)|| + eta H ||gamma|| <= rho", lhs <= consts.rho[i], lhs, consts.rho[i]))
    return conds


def nonexistence_conditions(consts: ConstantsReport, lam, eta):
    n = len(consts.rho)
    if len(consts.tau) != n or len(consts.xi) != n or any(b is None for b in consts.tau + consts.xi):
        raise BoundsNotVerified("tau and xi are required for every component")
    conds = []
    for i in range(n):
        lhs = lam[i] * consts.tau[i].value * consts.k1[i].value + eta[i] * consts.xi[i].value * consts.gamma[i].value
        conds.append(Condition(f"nonexistence[{i + 1}]: lambda tau ||K(1)|| + eta xi ||gamma|| < 1", lhs < 1.0, lhs, 1.0, strict=True))
    return conds


def _caveats(system, consts):
    out = []
    sampled = [name for name, b in consts.bounds() if b.provenance == "sampled"]
    if sampled:
        out.append("sampled (non-rigorous) constants: " + ", ".join(sampled))
    discrete = [name for name, b in consts.bounds() if b.provenance == "discrete"]
    if discrete:
        out.append(f"grid-computed constants at h={consts.h:g}: " + ", ".join(discrete))
    if consts.mu_extrapolated is not None:
        out.append(f"Richardson-extrapolated mu_i0 = {consts.mu_extrapolated:.10g}")
    if not getattr(system.spec.domain, "smooth_boundary", True):
        out.append("geometry outside theorem hypotheses (non-smooth boundary)")
    out.append("continuity of h_i on P_I assumed, not checked")
    return out


def certify_existence(system, consts: ConstantsReport, lam=None, eta=None) -> Certificate:
    lam = list(system.spec.lam if lam is None else lam)
    eta = list(system.spec.eta if eta is None else eta)
    conds = existence_conditions(consts, lam, eta)
    ok = all(c.satisfied for c in conds)
    rigorous = all(b.provenance != "sampled" for _, b in consts.bounds())
    verdict = "fail" if not ok else ("pass" if rigorous else "advisory")
    conclusion = ""
    if ok:
        conclusion = (
            f"nonzero positive solution with {consts.rho0:.6g} <= ||u|| and "
            + ", ".join(f"||u_{i + 1}|| <= {r:.6g}" for i, r in enumerate(consts.rho))
        )
    return Certificate("existence", system_digest(system.spec), lam, eta, consts, conds, verdict, _caveats(system, consts), conclusion)


def certify_nonexistence(system, consts: ConstantsReport, lam=None, eta=None) -> Certificate:
    lam = list(system.spec.lam if lam is None else lam)
    eta = list(system.spec.eta if eta is None else eta)
    conds = nonexistence_conditions(consts, lam, eta)
    c = max((x.lhs for x in conds), default=0.0)
    verified = all(b.verified for b in consts.tau + consts.xi)
    if not verified:
        verdict = "not-applicable"
    elif all(x.satisfied for x in conds):
        rigorous = all(b.provenance != "sampled" for _, b in consts.bounds())
        verdict = "pass" if rigorous else "advisory"
    else:
        verdict = "fail"
    conclusion = "at most the zero solution in P_I" if verdict in ("pass", "advisory") else ""
    return Certificate(
        "nonexistence", system_digest(system.spec), lam, eta, consts, conds, verdict, _caveats(system, consts), conclusion, c
    )


def replay(cert: Certificate):
    """Recompute the condition list from the certificate's own constants."""
    fn = existence_conditions if cert.kind == "existence" else nonexistence_conditions
    return fn(cert.constants, cert.lam, cert.eta)


# -------------------------------------------------------------------- sweeps


def parse_range(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma list."""
    if ":" in text:
        a, b, s = (float(t) for t in text.split(":"))
        if s <= 0 or b < a:
            raise ValueError(f"bad range {text!r}")
        count = int(round((b - a) / s)) + 1
        return np.linspace(a, a + (count - 1) * s, count)
    return np.array([float(t) for t in text.split(",") if t.strip()])


def _threads():
    try:
        return max(1, int(os.environ.get("CONECERT_THREADS", "1")))
    except ValueError:
        return 1


def sweep_region(system, consts: ConstantsReport, kind: str, axes: dict, table=None, threads=None):
    """Evaluate a certificate on the Cartesian product of the parameter axes.

    ``axes`` maps names like ``"lambda1"``/``"eta2"`` to value arrays; other
    parameters keep the values in the system spec.  For existence sweeps a
    ``table`` from :func:`rho0_table` picks rho0 per point.  Returns rows
    ``(*values, verdict, binding)`` in row-major axis order.
    """
    names = list(axes)
    grids = [np.asarray(axes[k], dtype=float) for k in names]
    if any(len(g) == 0 for g in grids):
        return names, []
    mesh = np.meshgrid(*grids, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    base_lam = list(system.spec.lam)
    base_eta = list(system.spec.eta)

    def one(p):
        lam = list(base_lam)
        eta = list(base_eta)
        for name, v in zip(names, p):
            target = lam if name.startswith("lambda") else eta
            target[int(name.lstrip("lambdaet")) - 1] = float(v)
        if kind == "existence":
            c = consts
            if table is not None:
                r0, d = pick_rho0(table, consts.mu[consts.i0].value, lam[consts.i0])
                c = replace(consts, rho0=r0, delta=Bound(d, "sampled"))
            cert = certify_existence(system, c, lam, eta)
        else:
            cert = certify_nonexistence(system, consts, lam, eta)
        return (*[float(v) for v in p], cert.verdict, cert.binding)

    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, points))
    else:
        rows = [one(p) for p in points]
    return names, rows


def rows_to_csv(names, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "verdict", "binding"])
    for r in rows:
        w.writerow([*(f"{v:.17g}" for v in r[: len(names)]), *r[len(names) :]])
    return buf.getvalue()
