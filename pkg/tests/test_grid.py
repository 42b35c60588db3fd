import numpy as np
import pytest

from mixbgk.grid import (
    DistributionPair,
    GridError,
    PhaseGrid,
    SpatialGrid,
    VelocityGrid,
    check_on_grid,
    default_velocity_grid,
    inner_product_v,
    inner_product_xv,
    make_velocity_grid,
    norm_xv2,
)


def test_nodes_are_midpoints_and_symmetric():
    g = VelocityGrid(3.0, 6)
    assert g.h == pytest.approx(1.0)
    np.testing.assert_allclose(g.axis, [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5])
    np.testing.assert_array_equal(g.nodes[g.mirror], -g.nodes)
    assert g.nodes.shape == (216, 3)
    assert g.weights.sum() == pytest.approx(6.0**3)


def test_first_axis_varies_slowest():
    g = VelocityGrid(1.0, 4)
    assert np.all(np.diff(g.nodes[:16, 0]) == 0)
    assert g.nodes[16, 0] > g.nodes[0, 0]


def test_smallest_lattice_is_allowed():
    g = make_velocity_grid(1.0, 2)
    assert g.size == 8


@pytest.mark.parametrize("v_max,n", [(0.0, 8), (-1.0, 8), (1.0, 7), (1.0, 0)])
def test_rejects_bad_velocity_grids(v_max, n):
    with pytest.raises(GridError):
        VelocityGrid(v_max, n)


def test_default_grid_scales_with_light_mass():
    assert default_velocity_grid(4.0).v_max == pytest.approx(3.0)
    assert default_velocity_grid(1.0, 24).n_per_axis == 24


def test_spatial_grid():
    s = SpatialGrid(8, 2.0, 1)
    assert s.dx == pytest.approx(0.25)
    np.testing.assert_allclose(s.centers[:2], [0.125, 0.375])
    with pytest.raises(GridError):
        SpatialGrid(4, 1.0, 0)
    with pytest.raises(GridError):
        SpatialGrid(4, 1.0, 2)
    with pytest.raises(GridError):
        SpatialGrid(4, -1.0, 1)


def test_pair_arithmetic():
    a = DistributionPair(np.ones((2, 3)), 2 * np.ones((2, 3)))
    b = a.axpy(-1.0, a.scaled(0.5))
    np.testing.assert_allclose(b.first, 0.5)
    assert b.min() == 0.5 and b.max() == 1.0
    c = a.copy()
    c.first[0, 0] = 9.0
    assert a.first[0, 0] == 1.0
    with pytest.raises(GridError):
        DistributionPair(np.ones(3), np.ones(4))


def test_inner_products():
    vg = VelocityGrid(1.0, 2)
    grid = PhaseGrid(SpatialGrid(4, 2.0, 1), vg)
    assert inner_product_v(np.ones(8), np.ones(8), vg) == pytest.approx(8.0)
    a = DistributionPair(np.ones(grid.shape), np.zeros(grid.shape))
    # 4 cells of width 0.5, 8 nodes of weight 1
    assert norm_xv2(a, grid) == pytest.approx(16.0)
    assert inner_product_xv(a, a.scaled(-1.0), grid) == pytest.approx(-16.0)
    with pytest.raises(GridError):
        inner_product_v(np.ones(3), np.ones(8), vg)


def test_check_on_grid_promotes_single_cell():
    grid = PhaseGrid(SpatialGrid(), VelocityGrid(1.0, 2))
    assert check_on_grid(np.ones(8), grid).shape == (1, 8)
    with pytest.raises(GridError):
        check_on_grid(np.ones((2, 8)), grid)
