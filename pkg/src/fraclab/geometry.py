"""Meshed domains, grid functions, and the all-pairs quadrature fabric.

Cells and boundary facets are integrated with the midpoint rule: one value
per centroid, weighted by the cell or facet measure.  Double integrals use
every ordered pair of distinct centroids with weight ``|cell_i| * |cell_j|``.

Reduction order is part of the contract.  Pairs are enumerated in
lexicographic (i, j) order, split into row blocks of a fixed size that does
not depend on the worker count, and block sums are combined sequentially in
block order.  Reruns with different thread counts therefore produce
bit-identical sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridFunctionError, MeshError

# target number of pairs per reduction block; fixed so the partition of the
# pair set never depends on the thread count
PAIR_BLOCK_TARGET = 1 << 21

# pairs are materialized as flat index arrays only below this count
MATERIALIZE_LIMIT = 1 << 24

_DEFAULT_THREADS = 1


def set_default_threads(k: int) -> None:
    global _DEFAULT_THREADS
    _DEFAULT_THREADS = max(1, int(k))


def get_default_threads() -> int:
    return _DEFAULT_THREADS


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """Uniform mesh of an interval or an axis-aligned rectangle."""

    n: int
    cell_centroids: np.ndarray
    cell_measures: np.ndarray
    facet_centroids: np.ndarray
    facet_measures: np.ndarray
    facet_sides: tuple[str, ...]
    facet_cells: np.ndarray
    diameter: float
    recipe: dict = field(compare=False)

    @property
    def n_cells(self) -> int:
        return self.cell_centroids.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facet_centroids.shape[0]

    @property
    def volume(self) -> float:
        return float(np.sum(self.cell_measures))

    @property
    def boundary_measure(self) -> float:
        return float(np.sum(self.facet_measures))


def build_interval(a: float, b: float, n_cells: int) -> Domain:
    """Mesh (a, b) with n_cells uniform cells.

    The boundary consists of the two endpoints carrying counting measure 1.
    This convention exists for cheap one-dimensional smoke tests; trace
    statements are only meaningful on two-dimensional domains.
    """
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise DomainError(f"degenerate interval ({a}, {b})")
    n_cells = int(n_cells)
    if n_cells < 2:
        raise DomainError("interval needs at least 2 cells for pair quadrature")
    h = (b - a) / n_cells
    centers = a + (np.arange(n_cells) + 0.5) * h
    dom = Domain(
        n=1,
        cell_centroids=_readonly(centers[:, None]),
        cell_measures=_readonly(np.full(n_cells, h)),
        facet_centroids=_readonly(np.array([[a], [b]])),
        facet_measures=_readonly(np.ones(2)),
        facet_sides=("left", "right"),
        facet_cells=np.array([0, n_cells - 1]),
        diameter=(b - a) - h,
        recipe={"type": "interval", "bounds": [a, b], "resolution": [n_cells]},
    )
    _check_measures(dom, exact_volume=b - a, exact_boundary=2.0)
    return dom


def build_rectangle(lo, hi, nx: int, ny: int) -> Domain:
    """Mesh the rectangle [lo1, hi1] x [lo2, hi2] with nx by ny uniform cells."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (2,) or hi.shape != (2,):
        raise DomainError("rectangle corners must be 2-vectors")
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or not np.all(lo < hi):
        raise DomainError(f"degenerate rectangle {lo.tolist()} .. {hi.tolist()}")
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise DomainError("rectangle needs at least 2 cells per axis for pair quadrature")
    w, h = hi - lo
    hx, hy = w / nx, h / ny
    cx = lo[0] + (np.arange(nx) + 0.5) * hx
    cy = lo[1] + (np.arange(ny) + 0.5) * hy
    gx, gy = np.meshgrid(cx, cy)  # cell index = ix + iy * nx
    cells = np.column_stack([gx.ravel(), gy.ravel()])

    fx, fy, fm, fs, fc = [], [], [], [], []
    ix = np.arange(nx)
    iy = np.arange(ny)
    # bottom, top, left, right in that fixed order
    fx.append(cx), fy.append(np.full(nx, lo[1])), fm.append(np.full(nx, hx))
    fs += ["bottom"] * nx
    fc.append(ix)
    fx.append(cx), fy.append(np.full(nx, hi[1])), fm.append(np.full(nx, hx))
    fs += ["top"] * nx
    fc.append(ix + (ny - 1) * nx)
    fx.append(np.full(ny, lo[0])), fy.append(cy), fm.append(np.full(ny, hy))
    fs += ["left"] * ny
    fc.append(iy * nx)
    fx.append(np.full(ny, hi[0])), fy.append(cy), fm.append(np.full(ny, hy))
    fs += ["right"] * ny
    fc.append(iy * nx + (nx - 1))

    facets = np.column_stack([np.concatenate(fx), np.concatenate(fy)])
    dom = Domain(
        n=2,
        cell_centroids=_readonly(cells),
        cell_measures=_readonly(np.full(nx * ny, hx * hy)),
        facet_centroids=_readonly(facets),
        facet_measures=_readonly(np.concatenate(fm)),
        facet_sides=tuple(fs),
        facet_cells=np.concatenate(fc),
        diameter=math.hypot(w - hx, h - hy),
        recipe={"type": "rectangle", "bounds": [lo.tolist(), hi.tolist()], "resolution": [nx, ny]},
    )
    _check_measures(dom, exact_volume=w * h, exact_boundary=2 * (w + h))
    return dom


def _check_measures(dom: Domain, exact_volume: float, exact_boundary: float) -> None:
    if abs(dom.volume - exact_volume) > 1e-12 * exact_volume:
        raise DomainError("cell measures fail to sum to the domain volume")
    if abs(dom.boundary_measure - exact_boundary) > 1e-12 * exact_boundary:
        raise DomainError("facet measures fail to sum to the boundary measure")


def build_from_recipe(recipe: dict) -> Domain:
    kind = recipe.get("type")
    if kind == "interval":
        (a, b), (n,) = recipe["bounds"], recipe["resolution"]
        return build_interval(a, b, n)
    if kind == "rectangle":
        (lo, hi), (nx, ny) = recipe["bounds"], recipe["resolution"]
        return build_rectangle(lo, hi, nx, ny)
    raise DomainError(f"unknown domain type {kind!r}")


def refine(dom: Domain, factor: int) -> Domain:
    """Rebuild the same geometry with factor times the resolution per axis."""
    recipe = dict(dom.recipe)
    recipe["resolution"] = [r * int(factor) for r in recipe["resolution"]]
    return build_from_recipe(recipe)


def _in_box(points: np.ndarray, lo, hi, tol: float) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.flatnonzero(
        np.all(points >= lo[None, :] - tol, axis=1) & np.all(points <= hi[None, :] + tol, axis=1)
    )


def cells_in_box(dom: Domain, lo, hi) -> np.ndarray:
    """Indices of cells whose centroids lie in the closed box."""
    return _in_box(dom.cell_centroids, lo, hi, 1e-12 * max(1.0, dom.diameter))


def facets_in_box(dom: Domain, lo, hi) -> np.ndarray:
    return _in_box(dom.facet_centroids, lo, hi, 1e-12 * max(1.0, dom.diameter))


@dataclass(frozen=True)
class GridFunction:
    """Midpoint samples of a function: one value per cell and per facet."""

    domain: Domain
    interior: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        interior = _readonly(np.atleast_1d(np.asarray(self.interior, dtype=float)))
        boundary = _readonly(np.atleast_1d(np.asarray(self.boundary, dtype=float)))
        if interior.shape != (self.domain.n_cells,):
            raise GridFunctionError(
                f"need {self.domain.n_cells} interior values, got {interior.shape}"
            )
        if boundary.shape != (self.domain.n_facets,):
            raise GridFunctionError(
                f"need {self.domain.n_facets} boundary values, got {boundary.shape}"
            )
        if not np.all(np.isfinite(interior)) or not np.all(np.isfinite(boundary)):
            raise GridFunctionError("grid function values must be finite")
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "boundary", boundary)

    @classmethod
    def from_callable(cls, dom: Domain, fn) -> "GridFunction":
        return cls(dom, np.asarray(fn(dom.cell_centroids)), np.asarray(fn(dom.facet_centroids)))

    @classmethod
    def from_interior(cls, dom: Domain, interior) -> "GridFunction":
        """Extend interior values to the boundary by the adjacent-cell trace."""
        interior = np.asarray(interior, dtype=float)
        return cls(dom, interior, interior[dom.facet_cells])

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.domain, c * self.interior, c * self.boundary)


@dataclass(frozen=True)
class PairBlock:
    """One row block of the ordered pair set.

    Arrays are shaped (rows, M).  ``offdiag`` masks out the i == j entries;
    ``dist`` carries a placeholder 1.0 there so kernels never divide by zero.
    """

    row_start: int
    row_stop: int
    x_rows: np.ndarray
    x_all: np.ndarray
    weights: np.ndarray
    dist: np.ndarray
    offdiag: np.ndarray


@dataclass(frozen=True)
class PairQuadrature:
    """All ordered pairs of distinct centroids from one scope of a domain."""

    points: np.ndarray
    measures: np.ndarray
    scope: str
    dim: int
    subset: np.ndarray | None = None
    domain_diameter: float = 1.0

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_pairs(self) -> int:
        m = self.n_points
        return m * (m - 1)

    def row_blocks(self) -> list[tuple[int, int]]:
        m = self.n_points
        rows = max(1, PAIR_BLOCK_TARGET // max(1, m))
        return [(i, min(i + rows, m)) for i in range(0, m, rows)]

    def block(self, row_start: int, row_stop: int) -> PairBlock:
        pts = self.points
        xr = pts[row_start:row_stop]
        d2 = np.zeros((xr.shape[0], pts.shape[0]))
        for axis in range(self.dim):
            d2 += (xr[:, axis, None] - pts[None, :, axis]) ** 2
        dist = np.sqrt(d2)
        cols = np.arange(pts.shape[0])[None, :]
        rows = np.arange(row_start, row_stop)[:, None]
        offdiag = rows != cols
        bad = dist[offdiag]
        if bad.size and float(bad.min()) < 1e-15 * max(1.0, self.domain_diameter):
            raise MeshError("coincident quadrature points: pair distance below resolution floor")
        dist = np.where(offdiag, dist, 1.0)
        weights = self.measures[row_start:row_stop, None] * self.measures[None, :]
        return PairBlock(row_start, row_stop, xr, pts, weights, dist, offdiag)

    def values(self, f: GridFunction) -> np.ndarray:
        vals = f.interior if self.scope == "interior" else f.boundary
        if self.subset is not None:
            vals = vals[self.subset]
        return vals

    def materialize(self):
        """Flat (i, j, w, dist) arrays in lexicographic pair order."""
        if self.n_pairs > MATERIALIZE_LIMIT:
            raise MeshError(f"refusing to materialize {self.n_pairs} pairs")
        ii, jj, ww, dd = [], [], [], []
        for a, b in self.row_blocks():
            blk = self.block(a, b)
            mask = blk.offdiag
            rows = np.broadcast_to(np.arange(a, b)[:, None], mask.shape)
            cols = np.broadcast_to(np.arange(self.n_points)[None, :], mask.shape)
            ii.append(rows[mask])
            jj.append(cols[mask])
            ww.append(blk.weights[mask])
            dd.append(blk.dist[mask])
        return (
            np.concatenate(ii),
            np.concatenate(jj),
            np.concatenate(ww),
            np.concatenate(dd),
        )


def pair_quadrature(dom: Domain, scope: str, subset: np.ndarray | None = None) -> PairQuadrature:
    """Ordered-pair quadrature over cells (interior) or facets (boundary)."""
    if scope == "interior":
        pts, meas = dom.cell_centroids, dom.cell_measures
    elif scope == "boundary":
        pts, meas = dom.facet_centroids, dom.facet_measures
    else:
        raise DomainError(f"unknown scope {scope!r}")
    if subset is not None:
        subset = np.asarray(subset, dtype=int)
        pts, meas = pts[subset], meas[subset]
    if pts.shape[0] < 2:
        raise DomainError(f"{scope} pair quadrature needs at least 2 points")
    return PairQuadrature(
        points=_readonly(pts),
        measures=_readonly(meas),
        scope=scope,
        dim=dom.n,
        subset=subset,
        domain_diameter=dom.diameter,
    )


def map_blocks(pq: PairQuadrature, block_fn, threads: int | None = None) -> list:
    """Apply block_fn to every row block, results in block order.

    Worker count only changes wall time, never the result list: the block
    partition is fixed and each block is evaluated independently.
    """
    threads = _DEFAULT_THREADS if threads is None else max(1, int(threads))
    spans = pq.row_blocks()
    if threads == 1 or len(spans) == 1:
        return [block_fn(pq.block(a, b)) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda ab: block_fn(pq.block(*ab)), spans))


def reduce_blocks(pq: PairQuadrature, block_fn, threads: int | None = None) -> float:
    """Sum block_fn over all blocks, combining partial sums in block order."""
    total = 0.0
    for v in map_blocks(pq, block_fn, threads):
        total += v
    return float(total)
