"""Grids, graded meshes, Lagrange spaces, quadrature exactness."""
import numpy as np
import pytest

from zpinchstab import FemSpace, make_grid, plasma_space, quadrature, vacuum_space
from zpinchstab.errors import BadGrading
from zpinchstab.mesh import ETA, XI, ZETA


def test_uniform_plasma_grid():
    g = make_grid("plasma", 8, 1.0, r0=2.5)
    assert np.allclose(g.nodes, np.linspace(0.0, 2.5, 9))
    assert np.allclose(g.widths, 2.5 / 8)


def test_graded_plasma_grid_symmetric():
    g = make_grid("plasma", 10, 1.3)
    w = g.widths
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert abs(w.sum() - 1.0) < 1e-14
    # smallest elements at both ends, ratio 1.3 between neighbors
    assert w[0] < w[4] and w[-1] < w[5]
    assert np.allclose(w[1:5] / w[0:4], 1.3)
    assert np.allclose(w[6:] / w[5:-1], 1.0 / 1.3)


def test_graded_vacuum_grid_fine_at_interface():
    g = make_grid("vacuum", 6, 1.5, r0=1.0, rw=2.0)
    w = g.widths
    assert g.nodes[0] == 1.0 and g.nodes[-1] == 2.0
    assert np.all(np.diff(w) > 0)  # growing away from r0
    assert np.allclose(w[1:] / w[:-1], 1.5)


@pytest.mark.parametrize(
    "args",
    [
        ("plasma", 3, 1.0, {}),
        ("plasma", 8, 0.9, {}),
        ("plasma", 8, 25.0, {}),
        ("vacuum", 8, 1.0, {}),  # missing rw
        ("vacuum", 8, 1.0, {"rw": 0.5}),  # wall inside plasma
        ("elsewhere", 8, 1.0, {}),
    ],
)
def test_bad_grids_rejected(args):
    region, n, ratio, kw = args
    with pytest.raises(BadGrading):
        make_grid(region, n, ratio, **kw)


def test_space_order_validation():
    g = make_grid("plasma", 4, 1.0)
    with pytest.raises(BadGrading):
        FemSpace(g, 3, 1, ())


def test_plasma_space_pins():
    g = make_grid("plasma", 4, 1.0)
    s0 = plasma_space(g, 2, 0)
    s1 = plasma_space(g, 2, 1)
    assert set(s0.essential_pins) == {(0, XI), (0, ZETA)}
    assert set(s1.essential_pins) == {(0, XI), (0, ETA), (0, ZETA)}
    assert s0.n_free == 3 * s0.n_nodes - 2
    assert s1.n_free == 3 * s1.n_nodes - 3
    assert s0.free_index[0, XI] == -1 and s0.free_index[0, ETA] >= 0


def test_vacuum_space_pins_wall():
    g = make_grid("vacuum", 4, 1.0, rw=2.0)
    s = vacuum_space(g, 2)
    assert s.nfields == 1
    assert set(s.essential_pins) == {(s.n_nodes - 1, 0)}


def test_node_positions_and_interpolation():
    g = make_grid("plasma", 5, 1.2)
    s = plasma_space(g, 2, 0)
    assert len(s.node_positions) == 2 * 5 + 1
    # a quadratic is reproduced exactly by the P2 space
    nodal = 3.0 * s.node_positions**2 - 2.0 * s.node_positions + 0.5
    r = np.linspace(0.0, 1.0, 57)
    assert np.allclose(s.evaluate(nodal, r), 3 * r**2 - 2 * r + 0.5, atol=1e-13)
    assert np.allclose(s.evaluate(nodal, r, deriv=1), 6 * r - 2, atol=1e-12)


@pytest.mark.parametrize("order,degree", [(1, 7), (2, 9)])
def test_quadrature_exactness(order, degree):
    g = make_grid("plasma", 6, 1.1, r0=1.7)
    pts = quadrature(plasma_space(g, order, 1))
    for d in range(degree + 1):
        approx = sum(w * r**d for r, w in pts)
        exact = 1.7 ** (d + 1) / (d + 1)
        assert abs(approx - exact) < 1e-13 * exact


def test_full_vector_scatter():
    g = make_grid("plasma", 4, 1.0)
    s = plasma_space(g, 1, 1)
    free = np.arange(1.0, s.n_free + 1.0)
    full = s.full_vector(free)
    assert full.shape == (s.n_nodes, 3)
    assert np.all(full[0] == 0.0)  # all three pinned on axis
    assert full[1, XI] == free[s.free_index[1, XI]]
