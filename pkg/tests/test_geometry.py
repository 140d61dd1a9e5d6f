"""Meshes, grid functions, and the ordered-pair quadrature."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import fraclab as fl
from fraclab.errors import DomainError, GridFunctionError
from fraclab.geometry import map_blocks, reduce_blocks


def test_interval_layout():
    dom = fl.build_interval(0.0, 1.0, 8)
    assert dom.n == 1
    assert dom.n_cells == 8
    assert dom.volume == pytest.approx(1.0, abs=0)
    # the boundary of an interval is two points, each carrying unit measure
    assert dom.n_facets == 2
    assert np.array_equal(dom.facet_measures, [1.0, 1.0])
    assert dom.facet_sides == ("left", "right")
    assert np.array_equal(dom.facet_cells, [0, 7])
    assert np.allclose(dom.cell_centroids[:, 0], (np.arange(8) + 0.5) / 8.0)


def test_rectangle_layout():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 2.0), 4, 8)
    assert dom.n == 2
    assert dom.n_cells == 32
    assert dom.n_facets == 2 * (4 + 8)
    assert dom.volume == pytest.approx(2.0, abs=1e-15)
    assert dom.boundary_measure == pytest.approx(6.0, abs=1e-15)
    assert set(dom.facet_sides) == {"left", "right", "bottom", "top"}
    # every facet centroid sits half a cell away from its adjacent cell centroid
    gap = np.linalg.norm(dom.facet_centroids - dom.cell_centroids[dom.facet_cells], axis=1)
    assert np.all((gap == 0.125) | (gap == 0.125))
    assert dom.diameter == pytest.approx(np.sqrt(0.75**2 + 1.75**2))


@pytest.mark.parametrize(
    "build",
    [
        lambda: fl.build_interval(1.0, 1.0, 4),
        lambda: fl.build_interval(0.0, 1.0, 0),
        lambda: fl.build_rectangle((0, 0), (1, 1), 0, 3),
        lambda: fl.build_rectangle((0, 0), (0, 1), 4, 4),
    ],
)
def test_degenerate_meshes_rejected(build):
    with pytest.raises(DomainError):
        build()


def test_recipe_round_trip():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 2.0), 4, 8)
    again = fl.build_from_recipe(dom.recipe)
    assert np.array_equal(again.cell_centroids, dom.cell_centroids)
    assert np.array_equal(again.facet_measures, dom.facet_measures)
    assert again.recipe == dom.recipe


def test_refine_preserves_measure():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 4, 4)
    fine = fl.refine(dom, 3)
    assert fine.n_cells == 9 * dom.n_cells
    assert fine.volume == pytest.approx(dom.volume, rel=1e-15)
    assert fine.boundary_measure == pytest.approx(dom.boundary_measure, rel=1e-15)


def test_box_selection():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
    cells = fl.cells_in_box(dom, (0.0, 0.0), (0.5, 0.5))
    assert cells.size == 16
    assert np.all(dom.cell_centroids[cells] <= 0.5)
    facets = fl.facets_in_box(dom, (0.0, 0.0), (0.5, 0.5))
    assert facets.size == 8
    assert fl.cells_in_box(dom, (2.0, 2.0), (3.0, 3.0)).size == 0


def test_grid_function_validation():
    dom = fl.build_interval(0.0, 1.0, 8)
    with pytest.raises(GridFunctionError, match="interior values"):
        fl.GridFunction(dom, np.zeros(5), np.zeros(2))
    with pytest.raises(GridFunctionError, match="boundary values"):
        fl.GridFunction(dom, np.zeros(8), np.zeros(3))
    with pytest.raises(GridFunctionError, match="finite"):
        fl.GridFunction(dom, np.full(8, np.nan), np.zeros(2))


def test_grid_function_is_immutable():
    dom = fl.build_interval(0.0, 1.0, 8)
    f = fl.GridFunction.from_callable(dom, lambda x: x[:, 0])
    with pytest.raises(ValueError):
        f.interior[0] = 5.0


def test_from_interior_extends_by_adjacent_trace():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 4, 4)
    vals = np.arange(dom.n_cells, dtype=float)
    f = fl.GridFunction.from_interior(dom, vals)
    assert np.array_equal(f.boundary, vals[dom.facet_cells])


def test_scaled():
    dom = fl.build_interval(0.0, 1.0, 8)
    f = fl.GridFunction.from_callable(dom, lambda x: x[:, 0] + 1.0)
    g = f.scaled(-2.0)
    assert np.array_equal(g.interior, -2.0 * f.interior)
    assert np.array_equal(g.boundary, -2.0 * f.boundary)


def test_pair_quadrature_counts_ordered_distinct_pairs():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 2.0), 4, 8)
    pq = fl.pair_quadrature(dom, "interior")
    n = dom.n_cells
    assert pq.n_points == n
    assert pq.n_pairs == n * (n - 1)
    ii, jj, ww, dd = pq.materialize()
    assert ii.shape == (pq.n_pairs,)
    assert np.all(ii != jj)
    # weights are products of the two cell measures
    assert np.allclose(ww, dom.cell_measures[ii] * dom.cell_measures[jj])
    assert np.allclose(dd, np.linalg.norm(dom.cell_centroids[ii] - dom.cell_centroids[jj], axis=1))


def test_pair_quadrature_subset_and_boundary_scope():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 4, 4)
    sub = fl.pair_quadrature(dom, "interior", subset=np.array([0, 3, 7]))
    assert sub.n_points == 3
    assert sub.n_pairs == 6
    bq = fl.pair_quadrature(dom, "boundary")
    assert bq.n_points == dom.n_facets
    assert bq.scope == "boundary"


def test_block_iteration_covers_every_row_once():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 5, 5)
    pq = fl.pair_quadrature(dom, "interior")
    rows = []
    for start, stop in pq.row_blocks():
        rows.extend(range(start, stop))
    assert rows == list(range(pq.n_points))
    blk = pq.block(0, 2)
    assert blk.weights.shape == (2, pq.n_points)
    assert blk.offdiag.dtype == bool
    # the diagonal entries of the leading block are the only masked ones
    assert np.count_nonzero(~blk.offdiag) == 2


def test_reduce_blocks_is_thread_invariant():
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), 9, 9)
    pq = fl.pair_quadrature(dom, "interior")

    def block_sum(block):
        term = block.weights * np.exp(-block.dist)
        return float(np.sum(np.where(block.offdiag, term, 0.0)))

    one = reduce_blocks(pq, block_sum, threads=1)
    four = reduce_blocks(pq, block_sum, threads=4)
    # bit-identical, not merely close: block order is fixed by the partition
    assert one == four
    parts = map_blocks(pq, block_sum, threads=4)
    assert sum(parts) == pytest.approx(one, rel=1e-15)


def test_default_thread_control():
    old = fl.get_default_threads()
    try:
        fl.set_default_threads(3)
        assert fl.get_default_threads() == 3
        # out-of-range requests clamp to the serial floor instead of raising;
        # the command line validates user input before it gets here
        fl.set_default_threads(0)
        assert fl.get_default_threads() == 1
    finally:
        fl.set_default_threads(old)


@given(n=st.integers(2, 30))
def test_interval_measures_sum(n):
    dom = fl.build_interval(-1.0, 2.5, n)
    assert dom.volume == pytest.approx(3.5, rel=1e-14)
    assert dom.n_cells == n
    assert dom.boundary_measure == 2.0


@given(nx=st.integers(2, 8), ny=st.integers(2, 8))
def test_rectangle_counts(nx, ny):
    dom = fl.build_rectangle((0.0, 0.0), (1.0, 1.0), nx, ny)
    assert dom.n_cells == nx * ny
    assert dom.n_facets == 2 * (nx + ny)
    assert dom.volume == pytest.approx(1.0, rel=1e-14)
