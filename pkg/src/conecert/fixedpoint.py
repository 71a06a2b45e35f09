"""The system u = T u + Gamma u and damped Picard iteration in the order box."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .errors import OutOfBox, ValidationError
from .functionals import BoundFunctional, FunctionalSpec, nemytskii
from .geometry import Grid, build_grid, cell_weights
from .greens import SolutionOperator, SolverConfig
from .operator import BoundarySpec, EllipticSpec, assemble, reaction_vanishes, validate_elliptic

log = logging.getLogger(__name__)

BOX_TOL = 1e-9


@dataclass(frozen=True)
class ComponentSpec:
    L: EllipticSpec
    B: BoundarySpec
    f: ex.Expr
    h: FunctionalSpec
    lam: float = 0.0
    eta: float = 0.0
    rho: float = 1.0


@dataclass(frozen=True)
class SystemSpec:
    domain: object
    components: tuple

    @property
    def n(self):
        return len(self.components)

    @property
    def rho(self):
        return np.array([c.rho for c in self.components])

    @property
    def lam(self):
        return np.array([c.lam for c in self.components])

    @property
    def eta(self):
        return np.array([c.eta for c in self.components])

    def with_parameters(self, lam=None, eta=None):
        """Copy with replaced lambda and/or eta vectors."""
        comps = []
        for i, c in enumerate(self.components):
            comps.append(
                ComponentSpec(
                    c.L,
                    c.B,
                    c.f,
                    c.h,
                    float(lam[i]) if lam is not None else c.lam,
                    float(eta[i]) if eta is not None else c.eta,
                    c.rho,
                )
            )
        return SystemSpec(self.domain, tuple(comps))

    def validate(self):
        for i, c in enumerate(self.components):
            where = f"/components/{i}"
            if c.lam < 0 or c.eta < 0:
                raise ValidationError("lambda and eta must be nonnegative", where)
            if not c.rho > 0:
                raise ValidationError("rho must be positive", where + "/rho")
            allowed = ex.signature(self.n)
            extra = ex.free_names(c.f) - allowed
            if extra:
                raise ValidationError(f"f uses undeclared names {sorted(extra)}", where + "/f")
            for name, prim in c.h.primitives:
                if not 0 <= prim.component < self.n:
                    raise ValidationError(f"primitive {name!r} refers to a missing component", where + "/h")


@dataclass
class TraceStep:
    norm: float
    residual: float
    clamped: int


@dataclass
class PicardResult:
    u: np.ndarray
    status: str  # converged | maxiter | diverged
    trace: list
    clamp_events: int
    start: str = ""

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def residual(self):
        return self.trace[-1].residual if self.trace else math.nan

    @property
    def suspicious(self):
        """Converged while clamping was still active near the end."""
        return self.status == "converged" and any(s.clamped for s in self.trace[-3:])


@dataclass
class SolutionReport:
    residual: float
    in_box: bool
    norm: float
    component_norms: list
    nonzero: bool
    localization: Optional[bool] = None
    details: dict = field(default_factory=dict)


def product_norm(u) -> float:
    """max over components of the sup-norm."""
    u = np.atleast_2d(u)
    return float(np.max(np.abs(u))) if u.size else 0.0


class DiscreteSystem:
    """A SystemSpec discretised on one grid: K_i, gamma_i and bound functionals.

    Components with identical (L, B) share one SolutionOperator.
    """

    def __init__(self, spec: SystemSpec, grid: Grid, solver: SolverConfig = SolverConfig()):
        spec.validate()
        self.spec = spec
        self.grid = grid
        self.solver = solver
        self.weights = cell_weights(grid)
        cache = {}
        self.mu0 = []
        self.ops = []
        self.functionals = []
        for i, c in enumerate(spec.components):
            key = (c.L, c.B)
            if key not in cache:
                rep = validate_elliptic(c.L, grid)
                if c.B.kind == "neumann" and reaction_vanishes(c.L, grid):
                    raise ValidationError("neumann boundary needs a reaction term a != 0", f"/components/{i}/B")
                op = assemble(c.L, c.B, grid)
                if not op.m_matrix_certified:
                    log.warning("component %d: sign pattern check failed (%d violations)", i + 1, op.sign_violations)
                cache[key] = (SolutionOperator(op, solver), rep.mu0)
            self.ops.append(cache[key][0])
            self.mu0.append(cache[key][1])
            self.functionals.append(BoundFunctional(c.h, grid, self.weights))

    @classmethod
    def build(cls, spec: SystemSpec, h: float, solver: SolverConfig = SolverConfig()):
        return cls(spec, build_grid(spec.domain, h), solver)

    def with_parameters(self, lam=None, eta=None):
        """Same discretisation, new lambda/eta (operators are shared)."""
        other = object.__new__(DiscreteSystem)
        other.__dict__.update(self.__dict__)
        other.spec = self.spec.with_parameters(lam, eta)
        return other

    @property
    def n(self):
        return self.spec.n

    def zeros(self):
        return np.zeros((self.n, self.grid.size))

    def corner(self, scale=1.0):
        return np.repeat(scale * self.spec.rho[:, None], self.grid.size, axis=1)

    def random_in_box(self, rng, smooth=True):
        """A random element of the order box (smooth bumps or white noise)."""
        xy = self.grid.xy
        out = np.empty((self.n, self.grid.size))
        for i, r in enumerate(self.spec.rho):
            if smooth:
                c = rng.uniform(-1, 1, 2)
                k = rng.uniform(0.5, 4.0, 2)
                v = 0.5 + 0.5 * np.sin(k[0] * (xy[:, 0] - c[0])) * np.cos(k[1] * (xy[:, 1] - c[1]))
                out[i] = r * rng.uniform(0, 1) * v
            else:
                out[i] = r * rng.uniform(0, 1, self.grid.size)
        return np.clip(out, 0.0, self.spec.rho[:, None])

    def check_box(self, u, tol=BOX_TOL):
        rho = self.spec.rho[:, None]
        low = u < -tol
        high = u > rho + tol
        bad = low | high
        if bad.any():
            i, k = np.argwhere(bad)[0]
            w = {"component": int(i) + 1, "x": self.grid.xy[k].tolist(), "value": float(u[i, k])}
            raise OutOfBox(f"u leaves the order box at {w}", w)

    def T(self, u):
        out = np.empty_like(u)
        for i, c in enumerate(self.spec.components):
            if c.lam == 0:
                out[i] = 0.0
                continue
            out[i] = c.lam * self.ops[i].apply(nemytskii(c.f, u, self.grid))
        return out

    def Gamma(self, u):
        out = np.empty_like(u)
        for i, c in enumerate(self.spec.components):
            hv = self.functionals[i](u) if c.eta != 0 else 0.0
            out[i] = c.eta * hv * self.ops[i].gamma
        return out

    def apply(self, u, check=True):
        """(T + Gamma) u for u in the order box."""
        u = np.asarray(u, dtype=float).reshape(self.n, self.grid.size)
        if check:
            self.check_box(u)
        return self.T(u) + self.Gamma(u)

    def residual(self, u):
        return product_norm(u - self.apply(u))


def apply_TGamma(system: DiscreteSystem, u):
    return system.apply(u)


def picard_solve(
    system: DiscreteSystem,
    u0,
    theta: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 2000,
    diverge_factor: float = 1e8,
    start: str = "",
) -> PicardResult:
    """u <- (1 - theta) u + theta (T + Gamma) u, clamped into the order box."""
    if not 0 < theta <= 1:
        raise ValueError("damping must lie in (0, 1]")
    rho = system.spec.rho[:, None]
    u = np.array(u0, dtype=float).reshape(system.n, system.grid.size)
    system.check_box(u)
    trace = []
    clamps = 0
    first = None
    for _ in range(max_iter):
        tu = system.apply(u, check=False)
        res = product_norm(u - tu)
        if first is None:
            first = max(res, 1e-300)
        if not math.isfinite(res) or res > diverge_factor * first:
            trace.append(TraceStep(product_norm(u), res, 0))
            return PicardResult(u, "diverged", trace, clamps, start)
        if res <= tol:
            trace.append(TraceStep(product_norm(u), res, 0))
            return PicardResult(u, "converged", trace, clamps, start)
        new = (1 - theta) * u + theta * tu
        clipped = np.clip(new, 0.0, rho)
        n_clamped = int(np.count_nonzero(np.abs(clipped - new) > BOX_TOL))
        clamps += n_clamped
        trace.append(TraceStep(product_norm(u), res, n_clamped))
        u = clipped
    return PicardResult(u, "maxiter", trace, clamps, start)


def multi_start(system: DiscreteSystem, starts: int = 3, seed: int = 0, **kwargs):
    """Picard from the corner rho, the midpoint rho/2 and seeded random fields.

    Returns (results, distinct) where ``distinct`` lists converged fixed
    points that differ by more than 100 tol in the product norm.
    """
    rng = np.random.default_rng(seed)
    seeds = [("corner", system.corner(1.0)), ("midpoint", system.corner(0.5))]
    for k in range(max(0, starts - 2)):
        seeds.append((f"random{k}", system.random_in_box(rng)))
    seeds = seeds[: max(starts, 1)]
    tol = kwargs.get("tol", 1e-8)
    results = [picard_solve(system, u0, start=name, **kwargs) for name, u0 in seeds]
    distinct = []
    for r in results:
        if r.status != "converged":
            continue
        if all(product_norm(r.u - d.u) > 100 * tol for d in distinct):
            distinct.append(r)
    return results, distinct


def verify_solution(system: DiscreteSystem, u, tol: float = 1e-8, rho0: Optional[float] = None) -> SolutionReport:
    """Residual, box membership, norms and the predicted localization rho0 <= ||u||."""
    u = np.asarray(u, dtype=float).reshape(system.n, system.grid.size)
    rho = system.spec.rho
    in_box = bool(np.all(u >= -BOX_TOL) and np.all(u <= rho[:, None] + BOX_TOL))
    res = system.residual(np.clip(u, 0.0, rho[:, None])) if in_box else math.inf
    comp = [float(np.max(np.abs(ui))) for ui in u]
    norm = max(comp)
    loc = None
    if rho0 is not None:
        loc = bool(rho0 <= norm and all(c <= r + BOX_TOL for c, r in zip(comp, rho)))
    return SolutionReport(res, in_box, norm, comp, norm > tol, loc)
