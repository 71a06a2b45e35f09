"""Elliptic and boundary operator specs and their finite-difference assembly.

Interior unknowns only: every stencil arm that reaches the boundary is
eliminated.  Dirichlet data moves to the right-hand side; Robin/Neumann
boundary values are replaced by a one-sided ghost relation along the arm,
using the outward normal at the cut point.  Diffusion uses Shortley-Weller
differences, cross diffusion the sign-aware 7-point stencil and advection
first-order upwinding, so the matrix stays a Z-matrix whenever the
coefficients allow it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import expr as ex
from .errors import (
    AsymmetricDiffusion,
    GridMismatch,
    InvalidBoundary,
    NegativeReaction,
    NotElliptic,
)
from .geometry import DIRECTIONS, E, N, NE, NW, S, SE, SW, W, Grid

COEFF_NAMES = ex.signature(0)  # x1, x2
ZERO = ex.Num(0.0)
ONE = ex.Num(1.0)


def _coef(text):
    return text if not isinstance(text, str) else ex.parse(text, COEFF_NAMES)


@dataclass(frozen=True)
class EllipticSpec:
    """L u = -sum a_jl u_{x_j x_l} + sum a_j u_{x_j} + a u."""

    a_second: tuple = ((ONE, ZERO), (ZERO, ONE))
    a_first: tuple = (ZERO, ZERO)
    a_zero: ex.Expr = ZERO

    @classmethod
    def from_strings(cls, diffusion=(("1", "0"), ("0", "1")), advection=("0", "0"), reaction="0"):
        return cls(
            tuple(tuple(_coef(c) for c in row) for row in diffusion),
            tuple(_coef(c) for c in advection),
            _coef(reaction),
        )

    @classmethod
    def laplacian(cls, scale=1.0):
        s = ex.Num(float(scale))
        return cls(((s, ZERO), (ZERO, s)))

    def to_dict(self):
        return {
            "diffusion": [[str(c) for c in row] for row in self.a_second],
            "advection": [str(c) for c in self.a_first],
            "reaction": str(self.a_zero),
        }


@dataclass(frozen=True)
class BoundarySpec:
    """B u = b u + delta du/dn: dirichlet (0, b=1), neumann (1, b=0), robin (1, b>=0)."""

    kind: str = "dirichlet"
    b: ex.Expr = ONE

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise InvalidBoundary(f"unknown boundary kind {self.kind!r}")
        if self.kind == "neumann":
            object.__setattr__(self, "b", ZERO)
        if self.kind == "dirichlet":
            object.__setattr__(self, "b", ONE)

    @classmethod
    def robin(cls, b="1"):
        return cls("robin", _coef(b))

    @property
    def delta(self):
        return 0 if self.kind == "dirichlet" else 1

    def to_dict(self):
        if self.kind == "robin":
            return {"kind": "robin", "b": str(self.b)}
        return {"kind": self.kind}


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)  # (name, passed, detail)
    mu0: float = float("nan")

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)


def _xenv(xy):
    return {"x1": xy[:, 0], "x2": xy[:, 1]}


def _field(e, xy):
    return np.broadcast_to(ex.evaluate(e, _xenv(xy)), (len(xy),)).astype(float)


def validate_elliptic(spec: EllipticSpec, grid: Grid, strict: bool = True) -> ValidationReport:
    """Check symmetry, uniform ellipticity and a >= 0 at the grid nodes.

    Returns the report with the sampled ellipticity constant ``mu0``; with
    ``strict`` the first failed check is raised.
    """
    xy = grid.xy
    a = np.array([[_field(c, xy) for c in row] for row in spec.a_second])  # 2,2,N
    a0 = _field(spec.a_zero, xy)
    rep = ValidationReport()
    asym = float(np.max(np.abs(a[0, 1] - a[1, 0])))
    rep.checks.append(("symmetric diffusion", asym <= 1e-12, f"max |a12 - a21| = {asym:g}"))
    # smallest eigenvalue of a symmetric 2x2 matrix
    tr = 0.5 * (a[0, 0] + a[1, 1])
    dif = 0.5 * (a[0, 0] - a[1, 1])
    off = 0.5 * (a[0, 1] + a[1, 0])
    lam_min = tr - np.sqrt(dif**2 + off**2)
    rep.mu0 = float(lam_min.min())
    rep.checks.append(("uniformly elliptic", rep.mu0 > 0, f"mu0 = {rep.mu0:g}"))
    amin = float(a0.min())
    rep.checks.append(("nonnegative reaction", amin >= 0, f"min a = {amin:g}"))
    if strict:
        errors = {
            "symmetric diffusion": AsymmetricDiffusion,
            "uniformly elliptic": NotElliptic,
            "nonnegative reaction": NegativeReaction,
        }
        for name, ok, detail in rep.checks:
            if not ok:
                raise errors[name](detail)
    return rep


def validate_boundary(bspec: BoundarySpec, grid: Grid):
    if bspec.kind != "robin":
        return
    b = _field(bspec.b, grid.boundary_xy)
    if b.size and b.min() < 0:
        raise InvalidBoundary(f"robin coefficient negative: min b = {b.min():g}")
    if not np.any(b > 0):
        raise InvalidBoundary("robin coefficient vanishes identically")


def reaction_vanishes(spec: EllipticSpec, grid: Grid) -> bool:
    return not np.any(_field(spec.a_zero, grid.xy) != 0)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Sparse system A u = g + B_map q over interior nodes.

    ``boundary_rhs_map`` takes boundary data sampled at ``grid.boundary_xy``
    to the right-hand-side contribution.
    """

    grid: Grid
    matrix: sp.csr_matrix
    boundary_rhs_map: sp.csr_matrix
    symmetric: bool
    m_matrix_certified: bool
    sign_violations: int = 0
    diagonally_dominant: bool = True

    @property
    def size(self):
        return self.matrix.shape[0]


class _Builder:
    def __init__(self, grid, bspec, b_coef):
        self.grid = grid
        self.n = grid.size
        self.rows, self.cols, self.vals = [], [], []
        self.brows, self.bcols, self.bvals = [], [], []
        self.diag = np.zeros(self.n)
        self.bspec = bspec
        self.b_coef = b_coef  # robin coefficient at boundary points

    def arm(self, d, coef, extrapolate=False):
        """Add ``coef`` times the value one full step along direction ``d``.

        With ``extrapolate`` a cut arm uses the linear extrapolation through
        the boundary point (for stencils that assume uniform spacing);
        otherwise the stencil already used the cut length and the boundary
        value enters directly.
        """
        g = self.grid
        coef = np.asarray(coef, dtype=float)
        nb = g.neighbor[:, d]
        live = coef != 0
        inner = live & (nb >= 0)
        k = np.flatnonzero(inner)
        self.rows.append(k)
        self.cols.append(nb[k])
        self.vals.append(coef[k])
        cut = np.flatnonzero(live & (nb < 0))
        if len(cut) == 0:
            return
        theta = g.fraction[cut, d]
        c = coef[cut]
        if extrapolate:
            self.diag[cut] += c * (1.0 - 1.0 / theta)
            c = c / theta
        bidx = g.bpoint[cut, d]
        if self.bspec.kind == "dirichlet":
            self._rhs(cut, bidx, -c)
            return
        step = g.h * DIRECTIONS[d].astype(float)
        length = np.linalg.norm(step)
        along = g.boundary_normal[bidx] @ (step / length)
        dist = theta * length * np.maximum(along, 1e-6)
        b = self.b_coef[bidx]
        w = 1.0 / (1.0 + b * dist)
        self.diag[cut] += c * w
        self._rhs(cut, bidx, -c * dist * w)

    def _rhs(self, rows, bidx, vals):
        self.brows.append(rows)
        self.bcols.append(bidx)
        self.bvals.append(vals)

    def finish(self):
        k = np.arange(self.n)
        rows = np.concatenate(self.rows + [k])
        cols = np.concatenate(self.cols + [k])
        vals = np.concatenate(self.vals + [self.diag])
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        A.sum_duplicates()
        nb = self.grid.n_boundary
        if self.brows:
            B = sp.csr_matrix(
                (np.concatenate(self.bvals), (np.concatenate(self.brows), np.concatenate(self.bcols))),
                shape=(self.n, nb),
            )
        else:
            B = sp.csr_matrix((self.n, nb))
        B.sum_duplicates()
        return A, B


def assemble(spec: EllipticSpec, bspec: BoundarySpec, grid: Grid) -> DiscreteOperator:
    """Discretise (L, B) on ``grid`` and certify the Z-matrix sign pattern."""
    validate_boundary(bspec, grid)
    xy = grid.xy
    h = grid.h
    h2 = h * h
    a11 = _field(spec.a_second[0][0], xy)
    a22 = _field(spec.a_second[1][1], xy)
    a12 = 0.5 * (_field(spec.a_second[0][1], xy) + _field(spec.a_second[1][0], xy))
    b1 = _field(spec.a_first[0], xy)
    b2 = _field(spec.a_first[1], xy)
    a0 = _field(spec.a_zero, xy)
    robin = _field(bspec.b, grid.boundary_xy) if grid.n_boundary else np.zeros(0)
    bld = _Builder(grid, bspec, robin)
    th = grid.fraction

    # Shortley-Weller second differences
    for (p, m), a in (((E, W), a11), ((N, S), a22)):
        tp, tm = th[:, p], th[:, m]
        bld.arm(p, -2.0 * a / (h2 * tp * (tp + tm)))
        bld.arm(m, -2.0 * a / (h2 * tm * (tp + tm)))
        bld.diag += 2.0 * a / (h2 * tp * tm)

    # cross term -2 a12 u_xy on the diagonal pair aligned with sign(a12)
    if np.any(a12 != 0):
        c = np.abs(a12) / h2
        pos = a12 > 0
        for d in (E, W, N, S):
            bld.arm(d, c, extrapolate=True)
        bld.arm(NE, np.where(pos, -c, 0.0), extrapolate=True)
        bld.arm(SW, np.where(pos, -c, 0.0), extrapolate=True)
        bld.arm(NW, np.where(~pos, -c, 0.0), extrapolate=True)
        bld.arm(SE, np.where(~pos, -c, 0.0), extrapolate=True)
        bld.diag += -2.0 * c

    # upwind advection
    for (p, m), b in (((E, W), b1), ((N, S), b2)):
        fwd = b < 0
        tp, tm = th[:, p], th[:, m]
        up = np.where(fwd, 0.0, b / (h * tm))
        down = np.where(fwd, -b / (h * tp), 0.0)
        bld.arm(m, -up)
        bld.arm(p, -down)
        bld.diag += up + down

    bld.diag += a0
    A, B = bld.finish()

    off = A - sp.diags(A.diagonal())
    diag = A.diagonal()
    scale = float(np.abs(diag).max()) if len(diag) else 1.0
    violations = int(np.count_nonzero(off.data > 1e-14 * scale)) + int(np.count_nonzero(diag <= 0))
    rowsum = np.asarray(A.sum(axis=1)).ravel()
    dominant = bool(np.all(rowsum >= -1e-12 * scale))
    asym = abs(A - A.T)
    symmetric = bool(asym.nnz == 0 or asym.max() <= 1e-12 * scale)
    return DiscreteOperator(
        grid=grid,
        matrix=A.tocsr(),
        boundary_rhs_map=B.tocsr(),
        symmetric=symmetric,
        m_matrix_certified=violations == 0 and dominant,
        sign_violations=violations,
        diagonally_dominant=dominant,
    )


def apply_operator(op: DiscreteOperator, u) -> np.ndarray:
    """Matrix-vector product on interior nodes."""
    u = np.asarray(u, dtype=float)
    if u.shape != (op.size,):
        raise GridMismatch(f"field of shape {u.shape} on a grid with {op.size} nodes")
    return op.matrix @ u
