"""Planar domains, the embedded Cartesian grid and cut-cell quadrature weights.

The lattice is anchored at the disk centre (so the centre is a node) or at
the lower-left corner of a rectangle (so the grid is boundary aligned when
the side lengths are multiples of ``h``).  Only lattice points strictly
inside the domain are unknowns; every stencil arm that leaves the domain is
cut at the boundary and its Shortley-Weller fraction is recorded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateCut, EmptyGrid

# unit stencil directions in lattice units: E, W, N, S, NE, SW, NW, SE
DIRECTIONS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (-1, 1), (1, -1)], dtype=int
)
E, W, N, S, NE, SW, NW, SE = range(8)

CUT_FLOOR = 1e-6
_INSIDE_EPS = 1e-12


@dataclass(frozen=True)
class Disk:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    kind = "disk"

    @property
    def anchor(self):
        return np.array(self.center)

    @property
    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r), (cx + r, cy + r)

    @property
    def area(self):
        return math.pi * self.radius**2

    @property
    def smooth_boundary(self):
        return True

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        return d2 < self.radius**2 * (1 - _INSIDE_EPS)

    def exit_distance(self, p, v):
        """Smallest t > 0 with p + t v on the boundary, for interior p."""
        p = np.asarray(p, dtype=float) - self.anchor
        v = np.asarray(v, dtype=float)
        a = np.sum(v * v, axis=-1)
        b = np.sum(p * v, axis=-1)
        c = np.sum(p * p, axis=-1) - self.radius**2
        return (-b + np.sqrt(np.maximum(b * b - a * c, 0.0))) / a

    def normal(self, q):
        q = np.asarray(q, dtype=float) - self.anchor
        return q / np.linalg.norm(q, axis=-1, keepdims=True)

    def box_overlap_area(self, lo, hi):
        """Exact area of the disk intersected with [lo, hi] (vectorised over rows)."""
        lo = np.atleast_2d(lo) - self.anchor
        hi = np.atleast_2d(hi) - self.anchor
        return np.array([_disk_box_area(self.radius, a, b) for a, b in zip(lo, hi)])

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Rectangle:
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)

    def __post_init__(self):
        lo = tuple(float(c) for c in self.lo)
        hi = tuple(float(c) for c in self.hi)
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValueError("rectangle corners must satisfy lo < hi component-wise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    kind = "rectangle"

    @property
    def anchor(self):
        return np.array(self.lo)

    @property
    def bbox(self):
        return self.lo, self.hi

    @property
    def area(self):
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])

    @property
    def smooth_boundary(self):
        return False

    def _tol(self):
        return _INSIDE_EPS * max(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1])

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        t = self._tol()
        return (
            (p[..., 0] > self.lo[0] + t)
            & (p[..., 0] < self.hi[0] - t)
            & (p[..., 1] > self.lo[1] + t)
            & (p[..., 1] < self.hi[1] - t)
        )

    def exit_distance(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(v > 0, (hi - p) / v, np.inf)
            t_lo = np.where(v < 0, (lo - p) / v, np.inf)
        return np.min(np.minimum(t_hi, t_lo), axis=-1)

    def normal(self, q):
        """Outward normal of the face nearest to q (corners pick one face)."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        gaps = np.stack(
            [q[:, 0] - self.lo[0], self.hi[0] - q[:, 0], q[:, 1] - self.lo[1], self.hi[1] - q[:, 1]],
            axis=1,
        )
        face = np.argmin(np.abs(gaps), axis=1)
        normals = np.array([(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)])
        return normals[face]

    def box_overlap_area(self, lo, hi):
        lo = np.atleast_2d(lo)
        hi = np.atleast_2d(hi)
        w = np.clip(np.minimum(hi[:, 0], self.hi[0]) - np.maximum(lo[:, 0], self.lo[0]), 0, None)
        h = np.clip(np.minimum(hi[:, 1], self.hi[1]) - np.maximum(lo[:, 1], self.lo[1]), 0, None)
        return w * h

    def to_dict(self):
        return {"type": "rectangle", "lo": list(self.lo), "hi": list(self.hi)}


DomainSpec = Union[Disk, Rectangle]


def domain_from_dict(d):
    kind = d.get("type")
    if kind == "disk":
        return Disk(tuple(d.get("center", (0.0, 0.0))), d.get("radius", 1.0))
    if kind == "rectangle":
        return Rectangle(tuple(d["lo"]), tuple(d["hi"]))
    raise ValueError(f"unknown domain type {kind!r}")


def contains(domain, p) -> bool:
    """True iff ``p`` lies strictly inside the domain."""
    return bool(domain.contains(np.asarray(p, dtype=float)))


def _seg_integral(r, x0, x1, y0, y1):
    """Integral over [x0, x1] of |[y0, y1] ∩ [-s(x), s(x)]|, s = sqrt(r^2 - x^2)."""
    x0 = max(x0, -r)
    x1 = min(x1, r)
    if x1 <= x0:
        return 0.0
    cuts = [x0, x1]
    for y in (y0, y1):
        if abs(y) < r:
            xs = math.sqrt(r * r - y * y)
            cuts += [-xs, xs]
    cuts = sorted(c for c in set(cuts) if x0 <= c <= x1)

    def s(x):
        return math.sqrt(max(r * r - x * x, 0.0))

    def prim(x):  # antiderivative of s
        x = min(max(x, -r), r)
        return 0.5 * (x * s(x) + r * r * math.asin(x / r))

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        m = 0.5 * (a + b)
        sm = s(m)
        top_is_s = y1 > sm
        bot_is_s = y0 < -sm
        if min(y1, sm) <= max(y0, -sm):
            continue
        top = prim(b) - prim(a) if top_is_s else y1 * (b - a)
        bot = -(prim(b) - prim(a)) if bot_is_s else y0 * (b - a)
        total += top - bot
    return total


def _disk_box_area(r, lo, hi):
    return _seg_integral(r, lo[0], hi[0], lo[1], hi[1])


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior lattice nodes plus the cut links to the boundary.

    ``neighbor[k, d]`` is the node index reached from node ``k`` along
    direction ``d`` (see :data:`DIRECTIONS`) or -1 when the arm is cut;
    ``fraction[k, d]`` is the arm length in units of the full step (1 for
    interior neighbours); ``bpoint[k, d]`` indexes ``boundary_xy`` for cut arms.
    """

    domain: object
    h: float
    ij: np.ndarray
    xy: np.ndarray
    neighbor: np.ndarray
    fraction: np.ndarray
    bpoint: np.ndarray
    boundary_xy: np.ndarray
    boundary_normal: np.ndarray
    boundary_node: np.ndarray
    boundary_dir: np.ndarray
    clamped_cuts: int = 0
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return len(self.xy)

    @property
    def n_boundary(self):
        return len(self.boundary_xy)

    def index_of(self, i, j):
        return self._index.get((int(i), int(j)), -1)

    def lattice_point(self, i, j):
        return self.domain.anchor + self.h * np.array([i, j], dtype=float)

    def boundary_links(self):
        """(node, direction, fraction) for every cut axis arm."""
        rows = []
        for b in range(self.n_boundary):
            k = int(self.boundary_node[b])
            d = int(self.boundary_dir[b])
            if d < 4:
                rows.append((k, d, float(self.fraction[k, d])))
        return rows


def build_grid(domain, h: float, cut_floor: float = CUT_FLOOR, strict: bool = False) -> Grid:
    """Lay a lattice of spacing ``h`` over the domain and cut it at the boundary.

    Cut fractions below ``cut_floor`` are clamped (and counted in
    ``Grid.clamped_cuts``); with ``strict=True`` they raise DegenerateCut.
    """
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    h = float(h)
    (x0, y0), (x1, y1) = domain.bbox
    anchor = domain.anchor
    i_lo = math.floor((x0 - anchor[0]) / h) - 1
    i_hi = math.ceil((x1 - anchor[0]) / h) + 1
    j_lo = math.floor((y0 - anchor[1]) / h) - 1
    j_hi = math.ceil((y1 - anchor[1]) / h) + 1
    ii, jj = np.meshgrid(np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    pts = anchor + h * np.stack([ii, jj], axis=1).astype(float)
    inside = domain.contains(pts)
    if not inside.any():
        raise EmptyGrid(f"no interior node for h={h}")
    ij = np.stack([ii[inside], jj[inside]], axis=1)
    # row-major ordering by (j, i) keeps the matrix banded
    order = np.lexsort((ij[:, 0], ij[:, 1]))
    ij = ij[order]
    xy = anchor + h * ij.astype(float)
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(ij)}

    n = len(ij)
    neighbor = np.full((n, 8), -1, dtype=int)
    fraction = np.ones((n, 8))
    bpoint = np.full((n, 8), -1, dtype=int)
    b_xy, b_node, b_dir = [], [], []
    clamped = 0
    for d, (di, dj) in enumerate(DIRECTIONS):
        nb = np.array([index.get((int(a) + di, int(b) + dj), -1) for a, b in ij])
        neighbor[:, d] = nb
        cut = np.flatnonzero(nb < 0)
        if len(cut) == 0:
            continue
        step = h * np.array([di, dj], dtype=float)
        t = domain.exit_distance(xy[cut], step)
        t = np.minimum(t, 1.0)
        low = t < cut_floor
        if low.any():
            if strict:
                raise DegenerateCut(f"{int(low.sum())} cut fractions below {cut_floor}")
            clamped += int(low.sum())
            t = np.maximum(t, cut_floor)
        fraction[cut, d] = t
        start = len(b_xy)
        bpoint[cut, d] = np.arange(start, start + len(cut))
        b_xy.extend(xy[cut] + t[:, None] * step)
        b_node.extend(cut)
        b_dir.extend([d] * len(cut))
    b_xy = np.array(b_xy, dtype=float).reshape(-1, 2)
    b_normal = domain.normal(b_xy) if len(b_xy) else np.zeros((0, 2))
    arrays = [ij, xy, neighbor, fraction, bpoint, b_xy, b_normal]
    for a in arrays:
        a.setflags(write=False)
    return Grid(
        domain=domain,
        h=h,
        ij=ij,
        xy=xy,
        neighbor=neighbor,
        fraction=fraction,
        bpoint=bpoint,
        boundary_xy=b_xy,
        boundary_normal=np.asarray(b_normal).reshape(-1, 2),
        boundary_node=np.array(b_node, dtype=int),
        boundary_dir=np.array(b_dir, dtype=int),
        clamped_cuts=clamped,
        _index=index,
    )


def cell_weights(grid: Grid) -> np.ndarray:
    """Quadrature weight of every node: area of the domain inside its lattice cell.

    Lattice cells centred on exterior points that still overlap the domain
    hand their area to the nearest interior node, so the weights add up to
    the exact area of the domain.
    """
    h = grid.h
    dom = grid.domain
    w = dom.box_overlap_area(grid.xy - h / 2, grid.xy + h / 2)
    # exterior lattice points whose cells touch the domain
    (x0, y0), (x1, y1) = dom.bbox
    a = dom.anchor
    ii, jj = np.meshgrid(
        np.arange(math.floor((x0 - a[0]) / h) - 1, math.ceil((x1 - a[0]) / h) + 2),
        np.arange(math.floor((y0 - a[1]) / h) - 1, math.ceil((y1 - a[1]) / h) + 2),
        indexing="ij",
    )
    pts = a + h * np.stack([ii.ravel(), jj.ravel()], axis=1).astype(float)
    ext = pts[~dom.contains(pts)]
    if isinstance(dom, Disk):
        dist = np.linalg.norm(ext - a, axis=1)
        ext = ext[dist < dom.radius + h]
    if len(ext):
        area = dom.box_overlap_area(ext - h / 2, ext + h / 2)
        keep = area > 0
        if keep.any():
            _, owner = cKDTree(grid.xy).query(ext[keep])
            np.add.at(w, owner, area[keep])
    return w
