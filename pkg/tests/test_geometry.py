import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conecert.errors import DegenerateCut, EmptyGrid
from conecert.geometry import DIRECTIONS, Disk, Rectangle, build_grid, cell_weights, domain_from_dict


def test_unit_square_quarter_spacing():
    g = build_grid(Rectangle((0, 0), (1, 1)), 0.25)
    assert g.size == 9
    assert np.all(g.fraction == 1.0)
    assert g.clamped_cuts == 0
    # ordering is row by row
    assert g.xy[0].tolist() == [0.25, 0.25]
    assert g.xy[1].tolist() == [0.5, 0.25]
    assert g.n_boundary == 12 + 20  # 3 axis cuts per side, 5 edge nodes per diagonal direction
    np.testing.assert_allclose(cell_weights(g).sum(), 1.0, rtol=1e-14)


def test_disk_node_count_close_to_area_over_h2(disk_grid_64):
    assert abs(disk_grid_64.size - math.pi * 64**2) / (math.pi * 64**2) < 0.02


def test_disk_cut_points_lie_on_circle(disk_grid_32):
    g = disk_grid_32
    r = np.linalg.norm(g.boundary_xy, axis=1)
    np.testing.assert_allclose(r, 1.0, atol=1e-12)
    assert np.all((g.fraction > 0) & (g.fraction <= 1))
    n = g.boundary_normal
    np.testing.assert_allclose(n, g.boundary_xy, atol=1e-12)


def test_neighbour_links_are_consistent(disk_grid_32):
    g = disk_grid_32
    for d, (di, dj) in enumerate(DIRECTIONS):
        k = np.flatnonzero(g.neighbor[:, d] >= 0)
        m = g.neighbor[k, d]
        np.testing.assert_array_equal(g.ij[m] - g.ij[k], np.tile([di, dj], (len(k), 1)))
    for k, d, t in g.boundary_links():
        assert g.neighbor[k, d] == -1 and 0 < t <= 1


def test_disk_weights_integrate_area_and_moments():
    for h in (1 / 16, 1 / 32, 1 / 64):
        g = build_grid(Disk((0, 0), 1), h)
        w = cell_weights(g)
        assert w.min() > 0
        assert abs(w.sum() - math.pi) < 1e-12
    # int x1^2 over the unit disk is pi/4; error falls with h
    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        g = build_grid(Disk((0, 0), 1), h)
        errs.append(abs(cell_weights(g) @ g.xy[:, 0] ** 2 - math.pi / 4))
    assert errs[2] < errs[0] and errs[2] < 1e-3


def test_offcentre_disk_and_rectangle_areas():
    g = build_grid(Disk((0.3, -0.2), 0.7), 1 / 40)
    assert abs(cell_weights(g).sum() - math.pi * 0.49) < 1e-12
    g = build_grid(Rectangle((-1, 0), (2, 0.5)), 0.1)
    assert abs(cell_weights(g).sum() - 1.5) < 1e-12


def test_degenerate_cut_is_clamped_or_raised():
    dom = Disk((0, 0), 0.5 + 1e-8)
    g = build_grid(dom, 0.25)
    assert g.clamped_cuts > 0
    assert g.fraction.min() >= 1e-6
    with pytest.raises(DegenerateCut):
        build_grid(dom, 0.25, strict=True)


def test_empty_grid():
    with pytest.raises(EmptyGrid):
        build_grid(Rectangle((0, 0), (0.1, 0.1)), 0.5)
    # the disk lattice is anchored at the centre, so it is never empty
    assert build_grid(Disk((0, 0), 0.1), 0.5).size == 1
    with pytest.raises(ValueError):
        build_grid(Disk((0, 0), 1), 0.0)


def test_domain_dicts_round_trip():
    for d in (Disk((0.0, 1.0), 2.0), Rectangle((0.0, 0.0), (1.0, 3.0))):
        assert domain_from_dict(d.to_dict()) == d
    assert Disk((0, 0), 1).smooth_boundary and not Rectangle((0, 0), (1, 1)).smooth_boundary


def test_containment_is_strict():
    d = Disk((0, 0), 1)
    assert d.contains((0.0, 0.0)) and not d.contains((1.0, 0.0))
    r = Rectangle((0, 0), (1, 1))
    assert r.contains((0.5, 0.5)) and not r.contains((0.0, 0.5))


@given(
    st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0, 2 * math.pi), st.floats(0.1, 2.0)
)
def test_exit_distance_lands_on_boundary(px, py, ang, length):
    d = Disk((0, 0), 1)
    p = np.array([px, py])
    if not d.contains(p):
        return
    v = length * np.array([math.cos(ang), math.sin(ang)])
    t = float(np.asarray(d.exit_distance(p[None], v)).ravel()[0])
    q = p + t * v
    assert t > 0
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12


@given(st.floats(0.03, 0.3), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.2, 1.5))
def test_weights_always_sum_to_area(h, cx, cy, r):
    dom = Disk((cx, cy), r)
    try:
        g = build_grid(dom, h)
    except EmptyGrid:
        return
    assert abs(cell_weights(g).sum() - dom.area) < 1e-11 * max(1.0, dom.area)
