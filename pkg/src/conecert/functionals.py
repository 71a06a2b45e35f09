"""Nemytskii operators, boundary functionals and the sampled theorem constants.

All sampling is over a fixed tensor lattice of the order box
``[0, rho_1] x ... x [0, rho_n]`` (endpoints included) times a set of
spatial points (grid nodes plus boundary cut points by default), so every
estimate is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .errors import (
    BoundViolated,
    EvalDomainError,
    NegativeFunctionalValue,
    NegativeNonlinearity,
    PointOutsideDomain,
)
from .geometry import Grid, cell_weights

DEFAULT_SAMPLES = 33
_CHUNK = 2_000_000
_SLACK = 1e-12


@dataclass(frozen=True)
class PointEval:
    component: int  # 0-based
    point: tuple


@dataclass(frozen=True)
class Integral:
    component: int  # 0-based
    weight: ex.Expr = ex.Num(1.0)


@dataclass(frozen=True)
class FunctionalSpec:
    primitives: tuple = ()  # ((name, PointEval | Integral), ...)
    combiner: ex.Expr = ex.Num(0.0)

    @property
    def names(self):
        return tuple(name for name, _ in self.primitives)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def build(cls, primitives: dict, combiner: str):
        prims = tuple(primitives.items())
        return cls(prims, ex.parse(combiner, [name for name, _ in prims]))


@dataclass(frozen=True)
class Bound:
    """A theorem constant together with where it came from.

    provenance is one of ``sampled`` (lattice estimate), ``user`` (supplied
    majorant), ``exact`` (trivially exact) or ``discrete`` (computed on the grid).
    """

    value: float
    provenance: str
    verified: Optional[bool] = None
    witness: Optional[dict] = None

    @property
    def rigorous(self):
        return self.provenance in ("user", "exact", "discrete")

    def to_dict(self):
        d = {"value": self.value, "provenance": self.provenance}
        if self.verified is not None:
            d["verified"] = bool(self.verified)
        if self.witness is not None:
            d["witness"] = self.witness
        return d


# ------------------------------------------------------------------ sampling


def box_lattice(rho, samples: int) -> np.ndarray:
    """Tensor lattice of the box, shape (samples**n, n)."""
    axes = [np.linspace(0.0, float(r), samples) for r in rho]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def space_points(grid: Grid, x_samples: Optional[int] = None) -> np.ndarray:
    """Grid nodes and boundary cut points, optionally thinned to ``x_samples`` points."""
    pts = np.vstack([grid.xy, grid.boundary_xy])
    if x_samples is not None and x_samples < len(pts):
        idx = np.unique(np.linspace(0, len(pts) - 1, x_samples).round().astype(int))
        pts = pts[idx]
    return pts


def _depends_on_x(e):
    return bool(ex.free_names(e) & {"x1", "x2"})


def _scan(f, X, U):
    """Yield (values, x_index, u_index) blocks of f over X x U."""
    if not _depends_on_x(f):
        X = X[:1]
    nx = len(X)
    step = max(1, _CHUNK // max(nx, 1))
    for s in range(0, len(U), step):
        Ub = U[s : s + step]
        env = {"x1": X[:, 0:1], "x2": X[:, 1:2]}
        for k in range(U.shape[1]):
            env[f"u{k + 1}"] = Ub[None, :, k]
        try:
            vals = ex.evaluate(f, env)
        except EvalDomainError as exc:
            raise EvalDomainError(f"{exc} while sampling {ex.to_text(f)}") from None
        vals = np.broadcast_to(vals, (nx, len(Ub)))
        yield vals, s


def _witness(X, U, vals, s, flat):
    i, j = np.unravel_index(flat, vals.shape)
    return {"x": X[i].tolist(), "u": U[s + j].tolist(), "value": float(vals[i, j])}


def check_nonnegative(f, rho, grid, samples=DEFAULT_SAMPLES, x_samples=None):
    """Minimum of f over the sampled box and its witness."""
    X = space_points(grid, x_samples)
    U = box_lattice(rho, samples)
    best, wit = math.inf, None
    for vals, s in _scan(f, X, U):
        k = int(np.argmin(vals))
        v = float(vals.flat[k])
        if v < best:
            best, wit = v, _witness(X if _depends_on_x(f) else X[:1], U, vals, s, k)
    return best, wit


def nemytskii(f: ex.Expr, u, grid: Grid) -> np.ndarray:
    """Node-wise substitution F(u)(x) = f(x, u(x)); ``u`` has shape (n, nodes)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    env = {"x1": grid.xy[:, 0], "x2": grid.xy[:, 1]}
    for k in range(u.shape[0]):
        env[f"u{k + 1}"] = u[k]
    try:
        vals = ex.evaluate(f, env)
    except EvalDomainError as exc:
        if exc.index is not None and exc.index < grid.size:
            where = grid.xy[exc.index].tolist()
            raise EvalDomainError(f"{exc} at node {where}", exc.index) from None
        raise
    return np.broadcast_to(vals, (grid.size,)).astype(float)


def estimate_M(f, rho, grid, samples=DEFAULT_SAMPLES, x_samples=None, allow_negative=False) -> Bound:
    """Sampled max of f over the closed domain times the box; errors if f < 0 anywhere."""
    X = space_points(grid, x_samples)
    U = box_lattice(rho, samples)
    Xw = X if _depends_on_x(f) else X[:1]
    best, wit = -math.inf, None
    for vals, s in _scan(f, X, U):
        lo = int(np.argmin(vals))
        if vals.flat[lo] < 0 and not allow_negative:
            w = _witness(Xw, U, vals, s, lo)
            raise NegativeNonlinearity(f"{ex.to_text(f)} is negative at {w}", w)
        hi = int(np.argmax(vals))
        if vals.flat[hi] > best:
            best, wit = float(vals.flat[hi]), _witness(Xw, U, vals, s, hi)
    return Bound(best, "sampled", witness=wit)


def find_delta(f, i0, rho0, grid, n, samples=DEFAULT_SAMPLES, x_samples=None) -> float:
    """Largest sampled delta with f >= delta * u_{i0} on the small box [0, rho0]^n.

    ``i0`` is 0-based.  Returns 0 when the ratio is not positive somewhere.
    """
    X = space_points(grid, x_samples)
    U = box_lattice([rho0] * n, samples)
    U = U[U[:, i0] > 0]
    delta = math.inf
    for vals, s in _scan(f, X, U):
        if vals.min() < 0:
            return 0.0
        ratio = vals / U[s : s + vals.shape[1], i0][None, :]
        delta = min(delta, float(ratio.min()))
    return delta if delta > 0 and math.isfinite(delta) else 0.0


# ---------------------------------------------------------------- functionals


class BoundFunctional:
    """A FunctionalSpec tied to a grid: interpolation stencils and quadrature rows."""

    def __init__(self, spec: FunctionalSpec, grid: Grid, weights=None):
        self.spec = spec
        self.grid = grid
        w = cell_weights(grid) if weights is None else weights
        self._point = {}
        self._quad = {}
        for name, prim in spec.primitives:
            if isinstance(prim, PointEval):
                self._point[name] = (prim.component, *_bilinear(grid, prim.point))
            else:
                xenv = {"x1": grid.xy[:, 0], "x2": grid.xy[:, 1]}
                alpha = np.broadcast_to(ex.evaluate(prim.weight, xenv), (grid.size,))
                if alpha.min() < 0:
                    raise ValueError(f"integral weight of {name!r} is negative somewhere")
                self._quad[name] = (prim.component, w * alpha)

    def primitive_values(self, u) -> dict:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        vals = {}
        for name, (k, idx, wts) in self._point.items():
            vals[name] = float(wts @ u[k, idx])
        for name, (k, q) in self._quad.items():
            vals[name] = float(q @ u[k])
        return vals

    def __call__(self, u) -> float:
        """h[u]; raises NegativeFunctionalValue if the combiner goes negative."""
        v = float(ex.evaluate(self.spec.combiner, self.primitive_values(u)))
        if v < 0:
            raise NegativeFunctionalValue(f"h[u] = {v:g} < 0")
        return v

    def on_constants(self, c) -> np.ndarray:
        """h on the constant fields u = c, vectorised over the rows of ``c``."""
        c = np.atleast_2d(np.asarray(c, dtype=float))
        env = {}
        for name, (k, _, wts) in self._point.items():
            env[name] = c[:, k] * wts.sum()
        for name, (k, q) in self._quad.items():
            env[name] = c[:, k] * q.sum()
        vals = ex.evaluate(self.spec.combiner, env)
        return np.broadcast_to(vals, (len(c),)).astype(float)


def eval_functional(h: BoundFunctional, u) -> float:
    return h(u)


def _bilinear(grid: Grid, point):
    """Indices and weights of the boundary-extended bilinear interpolant at ``point``."""
    p = np.asarray(point, dtype=float)
    if not grid.domain.contains(p):
        raise PointOutsideDomain(f"functional point {p.tolist()} is not inside the domain")
    rel = (p - grid.domain.anchor) / grid.h
    i0, j0 = np.floor(rel + 1e-12).astype(int)
    s, t = np.clip(rel - (i0, j0), 0.0, 1.0)
    idx, wts = [], []
    for di, dj, wt in ((0, 0, (1 - s) * (1 - t)), (1, 0, s * (1 - t)), (0, 1, (1 - s) * t), (1, 1, s * t)):
        if wt <= 1e-14:
            continue
        k = grid.index_of(i0 + di, j0 + dj)
        if k < 0:
            corner = grid.lattice_point(i0 + di, j0 + dj)
            k = int(np.argmin(np.sum((grid.xy - corner) ** 2, axis=1)))
        idx.append(k)
        wts.append(wt)
    wts = np.array(wts)
    return np.array(idx, dtype=int), wts / wts.sum()


def estimate_H(h: BoundFunctional, rho, samples=DEFAULT_SAMPLES) -> Bound:
    """Sup of h over constant fields in the box (heuristic; see Bound.provenance)."""
    if not h.spec.primitives and not ex.free_names(h.spec.combiner):
        return Bound(float(ex.evaluate(h.spec.combiner, {})), "exact")
    C = box_lattice(rho, samples)
    vals = h.on_constants(C)
    k = int(np.argmax(vals))
    return Bound(float(vals[k]), "sampled", witness={"u": C[k].tolist(), "value": float(vals[k])})


def check_functional_sign(h: BoundFunctional, rho, samples=DEFAULT_SAMPLES):
    """Minimum of h over the constant-field lattice (must be >= 0)."""
    C = box_lattice(rho, samples)
    vals = h.on_constants(C)
    k = int(np.argmin(vals))
    return float(vals[k]), C[k].tolist()


@dataclass
class LinearBoundReport:
    verified: bool
    f_slack: float  # min of tau*u_i - f
    h_slack: float  # min of xi*||c|| - h on constant fields
    f_min: float
    violations: int
    samples: int
    f_violations: int = 0
    h_violations: int = 0
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)


def verify_linear_bounds(
    f,
    i,
    tau,
    h: Optional[BoundFunctional],
    xi,
    rho,
    grid,
    samples=DEFAULT_SAMPLES,
    x_samples=None,
    raise_on_violation=False,
) -> LinearBoundReport:
    """Check 0 <= f <= tau u_i on the sampled box and h[c] <= xi ||c|| on constant fields.

    ``i`` is 0-based.  A sample counts as a violation when it exceeds the
    bound by more than a relative 1e-12 (equality cases in exact arithmetic).
    """
    X = space_points(grid, x_samples)
    U = box_lattice(rho, samples)
    Xw = X if _depends_on_x(f) else X[:1]
    violations = 0
    f_slack, f_min, wit = math.inf, math.inf, None
    total = len(Xw) * len(U)
    for vals, s in _scan(f, X, U):
        bound = tau * U[s : s + vals.shape[1], i][None, :]
        slack = bound - vals
        bad = (slack < -_SLACK * np.maximum(1.0, np.abs(bound))) | (vals < -_SLACK)
        violations += int(bad.sum())
        k = int(np.argmin(slack))
        if slack.flat[k] < f_slack:
            f_slack = float(slack.flat[k])
            if bad.any():
                wit = _witness(Xw, U, vals, s, int(np.flatnonzero(bad.ravel())[0]))
        f_min = min(f_min, float(vals.min()))
    f_violations = violations
    h_slack = math.inf
    if h is not None:
        C = box_lattice(rho, samples)
        hv = h.on_constants(C)
        bound = xi * np.max(np.abs(C), axis=1)
        slack = bound - hv
        bad = slack < -_SLACK * np.maximum(1.0, bound)
        violations += int(bad.sum())
        h_slack = float(slack.min())
        if bad.any() and wit is None:
            k = int(np.flatnonzero(bad)[0])
            wit = {"u": C[k].tolist(), "h": float(hv[k]), "bound": float(bound[k])}
    rep = LinearBoundReport(
        verified=violations == 0,
        f_slack=f_slack,
        h_slack=h_slack,
        f_min=f_min,
        violations=violations,
        samples=total,
        f_violations=f_violations,
        h_violations=violations - f_violations,
        witness=wit,
    )
    if raise_on_violation and not rep.verified:
        raise BoundViolated(f"{violations} samples violate the linear bounds", wit)
    return rep
