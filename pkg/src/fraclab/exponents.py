"""Exponent fields and the subcritical covering certificate.

A field is an arithmetic expression over mesh coordinates.  Three arities
exist: point fields over the closed domain (variables ``x`` or ``x1, x2``),
pair fields over ordered point pairs (additionally ``y`` or ``y1, y2``),
and boundary fields sampled only at facet centroids.

Continuity assumptions enter the numerics only through sampled bounds:
``validate_bounds`` scans every mesh sample (cell centroids, facet
centroids, and for pair fields all ordered pairs of these, diagonal
included) and caches the observed infimum and supremum on the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import expressions as ex
from .errors import (
    ArityMismatchError,
    BoundViolationError,
    FieldError,
    PartitionError,
    SubcriticalityError,
)
from .geometry import Domain, GridFunction, cells_in_box, facets_in_box, refine

POINT = "point"
PAIR = "pair"
BOUNDARY = "boundary"

_ARITIES = (POINT, PAIR, BOUNDARY)

# admissible open ranges keyed by exponent role
_ROLE_RANGES = {
    "p": (1.0, math.inf),
    "q": (1.0, math.inf),
    "r": (1.0, math.inf),
    "s": (0.0, 1.0),
    "t": (0.0, 1.0),
    "data": (-math.inf, math.inf),
}


@dataclass
class ExponentField:
    """A scalar coefficient field with lazily cached sample bounds."""

    arity: str
    tree: object
    source: str = ""
    symmetric: bool = False
    cached_inf: float | None = dc_field(default=None, repr=False)
    cached_sup: float | None = dc_field(default=None, repr=False)
    _bounds_recipe: tuple | None = dc_field(default=None, repr=False)

    def constant_value(self) -> float | None:
        """The field's value if it is constant as an expression, else None."""
        if isinstance(self.tree, ex.Num):
            return float(self.tree.value)
        return None

    def eval_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        env = _point_env(pts)
        out = ex.evaluate(self.tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def eval_pairs(self, x_pts: np.ndarray, y_pts: np.ndarray) -> np.ndarray:
        """Evaluate at pairs given as equal-length point arrays."""
        if self.arity != PAIR:
            raise FieldError("eval_pairs needs a pair field")
        x_pts = np.atleast_2d(np.asarray(x_pts, dtype=float))
        y_pts = np.atleast_2d(np.asarray(y_pts, dtype=float))
        env = _point_env(x_pts)
        env.update(_point_env(y_pts, prefix_pair=True))
        out = ex.evaluate(self.tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (x_pts.shape[0],)).copy()

    def eval_pair_grid(self, x_rows: np.ndarray, y_cols: np.ndarray) -> np.ndarray:
        """Broadcast evaluation over the grid x_rows x y_cols, shape (r, c)."""
        if self.arity != PAIR:
            raise FieldError("eval_pair_grid needs a pair field")
        r, c = x_rows.shape[0], y_cols.shape[0]
        env = {}
        if x_rows.shape[1] == 1:
            env["x"] = x_rows[:, 0:1]
            env["y"] = y_cols[None, :, 0]
        else:
            env["x1"], env["x2"] = x_rows[:, 0:1], x_rows[:, 1:2]
            env["y1"], env["y2"] = y_cols[None, :, 0], y_cols[None, :, 1]
        out = ex.evaluate(self.tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (r, c))


def _point_env(pts: np.ndarray, prefix_pair: bool = False) -> dict:
    if pts.shape[1] == 1:
        return {"y" if prefix_pair else "x": pts[:, 0]}
    if prefix_pair:
        return {"y1": pts[:, 0], "y2": pts[:, 1]}
    return {"x1": pts[:, 0], "x2": pts[:, 1]}


def parse_field(source, arity: str, symmetric: bool = False) -> ExponentField:
    """Parse a number or expression string into a field of the given arity."""
    if arity not in _ARITIES:
        raise FieldError(f"unknown arity {arity!r}")
    if isinstance(source, (int, float)):
        if not math.isfinite(float(source)):
            raise FieldError("constant field must be finite")
        return ExponentField(arity, ex.Num(float(source)), str(source), symmetric=True)
    tree = ex.parse_expression(source)
    allowed = ex.POINT_VARS + ex.PAIR_VARS if arity == PAIR else ex.POINT_VARS
    ex.check_variables(tree, allowed, f"a {arity} field")
    if symmetric and arity != PAIR:
        raise FieldError("only pair fields can be marked symmetric")
    return ExponentField(arity, tree, source, symmetric=symmetric)


def constant_field(value: float, arity: str = POINT) -> ExponentField:
    return parse_field(float(value), arity)


def extend_symmetric_mean(f: ExponentField) -> ExponentField:
    """Bivariate extension averaging the two endpoint values.

    The diagonal restriction reproduces the original field exactly, also in
    floating point: (v + v) / 2 == v.
    """
    if f.arity == PAIR:
        raise FieldError("field is already bivariate")
    swapped = ex.substitute(f.tree, {"x": "y", "x1": "y1", "x2": "y2"})
    tree = ex.fold(ex.Bin("/", ex.Bin("+", f.tree, swapped), ex.Num(2.0)))
    return ExponentField(PAIR, tree, f"(({f.source}) averaged with itself)", symmetric=True)


def transpose_field(f: ExponentField) -> ExponentField:
    if f.arity != PAIR:
        raise FieldError("transpose needs a pair field")
    tree = ex.substitute(f.tree, {"x": "y", "y": "x", "x1": "y1", "y1": "x1", "x2": "y2", "y2": "x2"})
    return ExponentField(PAIR, tree, f"transpose({f.source})", symmetric=f.symmetric)


def diagonal_field(f: ExponentField) -> ExponentField:
    """Restrict a pair field to the diagonal, yielding a point field."""
    if f.arity != PAIR:
        raise FieldError("diagonal restriction needs a pair field")
    tree = ex.fold(ex.substitute(f.tree, {"y": "x", "y1": "x1", "y2": "x2"}))
    return ExponentField(POINT, tree, f"diag({f.source})")


def conjugate_field(p: ExponentField, r: ExponentField) -> ExponentField:
    """The field q with 1/r = 1/p + 1/q pointwise, i.e. q = p r / (p - r)."""
    if p.arity != r.arity:
        raise FieldError("conjugate construction needs matching arities")
    tree = ex.fold(
        ex.Bin("/", ex.Bin("*", p.tree, r.tree), ex.Bin("-", p.tree, r.tree))
    )
    return ExponentField(p.arity, tree, f"conjugate({p.source}; {r.source})")


def function_on_domain(f: ExponentField, dom: Domain) -> GridFunction:
    """Sample a point field at all cell and facet centroids."""
    if f.arity == PAIR:
        raise FieldError("cannot sample a pair field as a grid function")
    return GridFunction(dom, f.eval_points(dom.cell_centroids), f.eval_points(dom.facet_centroids))


def _sample_points(dom: Domain, arity: str) -> np.ndarray:
    if arity == BOUNDARY:
        return dom.facet_centroids
    return np.vstack([dom.cell_centroids, dom.facet_centroids])


def validate_bounds(f: ExponentField, dom: Domain, role: str) -> tuple[float, float]:
    """Scan the mesh sample set, enforce the role's range, cache the bounds.

    Point and boundary fields are sampled at centroids.  Pair fields are
    sampled at every ordered pair of domain samples, diagonal included, so
    the cached bounds also cover the diagonal restriction.  Idempotent: a
    repeated call with the same domain returns the cached pair.
    """
    if role not in _ROLE_RANGES:
        raise FieldError(f"unknown exponent role {role!r}")
    key = (tuple(map(str, dom.recipe.values())), role)
    if f._bounds_recipe == key and f.cached_inf is not None:
        return f.cached_inf, f.cached_sup

    if f.arity == PAIR:
        inf_v, sup_v, arg_lo, arg_hi = _pair_bounds(f, dom)
    else:
        pts = _sample_points(dom, f.arity)
        vals = f.eval_points(pts)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise BoundViolationError(
                f"field is not finite at sample {pts[bad].tolist()}",
                point=pts[bad].tolist(),
                value=float(vals[bad]),
            )
        i_lo, i_hi = int(np.argmin(vals)), int(np.argmax(vals))
        inf_v, sup_v = float(vals[i_lo]), float(vals[i_hi])
        arg_lo, arg_hi = pts[i_lo].tolist(), pts[i_hi].tolist()

    lo_req, hi_req = _ROLE_RANGES[role]
    if not inf_v > lo_req:
        raise BoundViolationError(
            f"role {role!r} requires values > {lo_req}; found {inf_v} at {arg_lo}",
            point=arg_lo,
            value=inf_v,
        )
    if not sup_v < hi_req:
        raise BoundViolationError(
            f"role {role!r} requires values < {hi_req}; found {sup_v} at {arg_hi}",
            point=arg_hi,
            value=sup_v,
        )
    f.cached_inf, f.cached_sup = inf_v, sup_v
    f._bounds_recipe = key
    return inf_v, sup_v


def _pair_bounds(f: ExponentField, dom: Domain):
    pts = _sample_points(dom, POINT)
    m = pts.shape[0]
    if f.constant_value() is not None:
        v = f.constant_value()
        return v, v, pts[0].tolist(), pts[0].tolist()
    rows_per = max(1, (1 << 21) // m)
    inf_v, sup_v = math.inf, -math.inf
    arg_lo = arg_hi = None
    for start in range(0, m, rows_per):
        stop = min(start + rows_per, m)
        grid = f.eval_pair_grid(pts[start:stop], pts)
        if f.symmetric:
            tgrid = transpose_field(f).eval_pair_grid(pts[start:stop], pts)
            if not np.array_equal(grid, tgrid):
                bad = np.argwhere(grid != tgrid)[0]
                raise FieldError(
                    "field marked symmetric but evaluation differs under argument swap "
                    f"near x={pts[start + bad[0]].tolist()}, y={pts[bad[1]].tolist()}"
                )
        if not np.all(np.isfinite(grid)):
            i, j = np.argwhere(~np.isfinite(grid))[0]
            pt = (pts[start + i].tolist(), pts[j].tolist())
            raise BoundViolationError(f"field is not finite at pair {pt}", point=pt, value=float(grid[i, j]))
        i, j = np.unravel_index(int(np.argmin(grid)), grid.shape)
        if grid[i, j] < inf_v:
            inf_v, arg_lo = float(grid[i, j]), (pts[start + i].tolist(), pts[j].tolist())
        i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
        if grid[i, j] > sup_v:
            sup_v, arg_hi = float(grid[i, j]), (pts[start + i].tolist(), pts[j].tolist())
    return inf_v, sup_v, arg_lo, arg_hi


def _diag_values(f: ExponentField, pts: np.ndarray) -> np.ndarray:
    """Values of a point field, or of a pair field restricted to x == y."""
    if f.arity == PAIR:
        return f.eval_pairs(pts, pts)
    return f.eval_points(pts)


def critical_trace_exponent(p: ExponentField, s, n: int, x) -> float:
    """Largest boundary integrability order carried by interior regularity.

    Returns (n - 1) pbar / (n - sbar pbar) at the point x, where pbar and
    sbar are diagonal values.  When n - sbar pbar <= 0 the exponent is
    unbounded and the extended real +inf is returned; callers must treat it
    as a tag, never feed it into arithmetic expecting a finite float.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pbar = float(_diag_values(p, x)[0])
    sbar = float(_diag_values(_as_field(s), x)[0])
    denom = n - sbar * pbar
    if denom <= 0:
        return math.inf
    return (n - 1) * pbar / denom


def _as_field(s) -> ExponentField:
    if isinstance(s, ExponentField):
        return s
    return constant_field(float(s), POINT)


def _p_star_at(p: ExponentField, s: ExponentField, n: int, pts: np.ndarray) -> np.ndarray:
    pbar = _diag_values(p, pts)
    sbar = _diag_values(s, pts)
    denom = n - sbar * pbar
    with np.errstate(divide="ignore"):
        vals = np.where(denom > 0, (n - 1) * pbar / np.where(denom > 0, denom, 1.0), math.inf)
    return vals


def subcritical_gap(p: ExponentField, q: ExponentField, s, dom: Domain) -> float:
    """Minimum of p_star - q over boundary samples.

    Samples where the critical exponent is unbounded never shrink the gap.
    If every sample is unbounded the gap itself is +inf.  A nonpositive gap
    raises, carrying the witness point and both exponent values.
    """
    s = _as_field(s)
    pts = dom.facet_centroids
    pstar = _p_star_at(p, s, dom.n, pts)
    qv = q.eval_points(pts)
    gaps = pstar - qv
    i = int(np.argmin(gaps))
    if not gaps[i] > 0:
        raise SubcriticalityError(
            f"boundary exponent is not subcritical at {pts[i].tolist()}: "
            f"critical exponent {pstar[i]:.6g}, boundary exponent {qv[i]:.6g}",
            witness=pts[i].tolist(),
            p_star=float(pstar[i]),
            q_value=float(qv[i]),
        )
    return float(np.min(gaps))


def freeze_margin_ok(p_i: float, s_i: float, n: int, q_values, k: float) -> bool:
    """Check (n-1) p_i / (n - s_i p_i) >= k/3 + q at every given q sample."""
    denom = n - s_i * p_i
    frozen = math.inf if denom <= 0 else (n - 1) * p_i / denom
    q_values = np.atleast_1d(np.asarray(q_values, dtype=float))
    return bool(np.all(frozen >= k / 3.0 + q_values))


@dataclass(frozen=True)
class PatchSpec:
    """One covering patch: a closed box with frozen constant exponents."""

    box_lo: tuple
    box_hi: tuple
    p_i: float
    s_i: float
    t: float
    delta: float
    cond_continuum_ok: bool  # sampled margin k/2 with the variable exponents
    cond_frozen_ok: bool     # margin k/3 with the frozen constants


@dataclass(frozen=True)
class GapCertificate:
    gap_k: float
    epsilon: float
    patches: tuple[PatchSpec, ...]

    @property
    def n_patches(self) -> int:
        return len(self.patches)


def _boundary_boxes(dom: Domain, side_len: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Overlapping axis-aligned boxes whose centers tile the boundary."""
    half = side_len / 2.0
    boxes = []
    seen = set()

    def add(center):
        c = np.asarray(center, dtype=float)
        key = tuple(np.round(c, 12).tolist())
        if key in seen:
            return
        seen.add(key)
        boxes.append((c - half, c + half))

    if dom.n == 1:
        (a, b) = dom.recipe["bounds"]
        add([a + half])
        add([b - half])
        return boxes
    (lo, hi) = dom.recipe["bounds"]
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def line(p0, p1):
        length = float(np.linalg.norm(np.asarray(p1) - np.asarray(p0)))
        steps = max(1, math.ceil(length / half))
        for u in np.linspace(0.0, 1.0, steps + 1):
            add((1 - u) * np.asarray(p0, dtype=float) + u * np.asarray(p1, dtype=float))

    line([lo[0], lo[1]], [hi[0], lo[1]])
    line([lo[0], hi[1]], [hi[0], hi[1]])
    line([lo[0], lo[1]], [lo[0], hi[1]])
    line([hi[0], lo[1]], [hi[0], hi[1]])
    return boxes


def _box_lattice(lo, hi, dom: Domain, m: int = 9) -> np.ndarray:
    """Deterministic lattice on the closed patch box clipped to the domain's
    bounding box.  Mesh centroids alone can miss a field extremum that sits
    on a box edge between samples, and a finer checking mesh would then
    undercut the frozen constants; the lattice pins the box edges and
    corners regardless of mesh alignment."""
    pts = np.vstack([dom.cell_centroids, dom.facet_centroids])
    dlo = np.min(pts, axis=0)
    dhi = np.max(pts, axis=0)
    clo = np.maximum(np.asarray(lo, dtype=float), dlo)
    chi = np.minimum(np.asarray(hi, dtype=float), dhi)
    axes = [np.linspace(clo[a], chi[a], m) for a in range(dom.n)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _patch_scan(p: ExponentField, s: ExponentField, pts: np.ndarray, n: int):
    """Mins of p, s, the product s*p, and the variable-exponent trace
    quotient over all ordered pairs of the patch sample points (diagonal
    included)."""
    m = pts.shape[0]
    rows_per = max(1, (1 << 21) // m)
    p_min = math.inf
    s_min = math.inf
    sp_min = math.inf
    quo_min = math.inf
    for start in range(0, m, rows_per):
        stop = min(start + rows_per, m)
        if p.arity == PAIR:
            pg = p.eval_pair_grid(pts[start:stop], pts)
        else:
            pg = np.broadcast_to(p.eval_points(pts[start:stop])[:, None], (stop - start, m))
        if s.arity == PAIR:
            sg = s.eval_pair_grid(pts[start:stop], pts)
        else:
            sg = np.broadcast_to(s.eval_points(pts[start:stop])[:, None], (stop - start, m))
        denom = n - sg * pg
        with np.errstate(divide="ignore"):
            quo = np.where(denom > 0, (n - 1) * pg / np.where(denom > 0, denom, 1.0), math.inf)
        p_min = min(p_min, float(np.min(pg)))
        s_min = min(s_min, float(np.min(sg)))
        sp_min = min(sp_min, float(np.min(sg * pg)))
        quo_min = min(quo_min, float(np.min(quo)))
    return p_min, s_min, sp_min, quo_min


def _freeze_constants(
    p_patch_min: float,
    s_patch_min: float,
    sp_patch_min: float,
    q_patch_max: float,
    k: float,
    n: int,
    delta0: float,
    retries: int,
):
    """Pick frozen (p_i, s_i, t, delta) meeting every patch constraint.

    Constraints: p_i strictly below the patch infimum of p by more than
    delta, p_i - 1 > delta, s_i at the patch infimum of s, s_i p_i above 1
    whenever the sampled product s p stays above 1 on the patch (the
    frozen quotient is read as +inf once s_i p_i reaches n, so no upper
    cap is imposed), an auxiliary order t strictly below s_i, and the
    frozen trace quotient clears k/3 + q.  The ladder halves delta on
    failure; smaller delta pushes the frozen constants toward the patch
    infima, which can only enlarge the frozen quotient.
    """
    for attempt in range(retries + 1):
        delta = delta0 / (2.0 ** attempt)
        p_i = p_patch_min - 2.0 * delta
        if not p_i > 1.0 + delta:
            continue
        s_i = s_patch_min
        if sp_patch_min > 1.0 and not s_i * p_i > 1.0:
            continue
        t = s_i - min(delta, s_i / 4.0)
        if not 0.0 < t < s_i:
            continue
        if freeze_margin_ok(p_i, s_i, n, q_patch_max, k):
            return p_i, s_i, t, delta
    return None


def covering_partition(
    p: ExponentField,
    q: ExponentField,
    s,
    dom: Domain,
    k: float,
    *,
    refine_factor: int = 2,
    eps_ladder: tuple = (0.5, 0.25, 0.125, 0.0625),
    delta_retries: int = 6,
) -> GapCertificate:
    """Construct a finite cover of the boundary by small certified patches.

    Each patch is a closed axis-aligned box of diameter strictly below the
    chosen epsilon < 1, intersected with the closed domain.  On each patch
    the variable exponents keep a sampled trace-quotient margin of k/2 over
    the boundary exponent, and frozen constants (p_i, s_i) keep a margin of
    k/3.  The auxiliary order t sits strictly below s_i so that chains of
    comparison seminorms built from the certificate dominate strictly.
    Conditions are certified on a sampling mesh refined by refine_factor
    relative to the input mesh.

    An infinite gap certifies trivially for any finite margin, so k = +inf
    is replaced by 1.0 before margins are formed.
    """
    if not (isinstance(k, (int, float)) and k > 0):
        raise PartitionError(f"need a positive subcritical gap, got {k!r}")
    k_eff = 1.0 if math.isinf(k) else float(k)
    s = _as_field(s)
    if dom.n < 2:
        raise PartitionError(
            "covering certificates need a two-dimensional domain: the frozen trace "
            "quotient carries a factor n - 1 that vanishes on intervals"
        )
    sdom = refine(dom, refine_factor)
    p_inf_global, _ = validate_bounds(p, sdom, "p")
    validate_bounds(s, sdom, "s")
    validate_bounds(q, sdom, "q")
    delta0 = min(0.1, (p_inf_global - 1.0) / 2.0)

    all_facets = sdom.facet_centroids
    failures = []
    for eps in eps_ladder:
        if not eps < 1.0:
            raise PartitionError(f"patch diameter bound must be below 1, got {eps}")
        side = 0.99 * eps / math.sqrt(dom.n)
        boxes = _boundary_boxes(dom, side)
        covered = np.zeros(all_facets.shape[0], dtype=bool)
        patches = []
        feasible = True
        for lo, hi in boxes:
            fidx = facets_in_box(sdom, lo, hi)
            if fidx.size == 0:
                continue
            covered[fidx] = True
            cidx = cells_in_box(sdom, lo, hi)
            pts = np.vstack(
                [sdom.cell_centroids[cidx], all_facets[fidx], _box_lattice(lo, hi, dom)]
            )
            p_min, s_min, sp_min, quo_min = _patch_scan(p, s, pts, dom.n)
            q_max = float(np.max(q.eval_points(all_facets[fidx])))
            cond_cont = bool(quo_min >= k_eff / 2.0 + q_max)
            if not cond_cont:
                failures.append(f"eps={eps}: sampled margin k/2 fails on a patch (min quotient {quo_min:.4g}, max q {q_max:.4g})")
                feasible = False
                break
            frozen = _freeze_constants(p_min, s_min, sp_min, q_max, k_eff, dom.n, delta0, delta_retries)
            if frozen is None:
                failures.append(f"eps={eps}: no frozen constants after {delta_retries} delta halvings")
                feasible = False
                break
            p_i, s_i, t, delta = frozen
            patches.append(
                PatchSpec(
                    box_lo=tuple(np.asarray(lo, dtype=float).tolist()),
                    box_hi=tuple(np.asarray(hi, dtype=float).tolist()),
                    p_i=p_i,
                    s_i=s_i,
                    t=t,
                    delta=delta,
                    cond_continuum_ok=cond_cont,
                    cond_frozen_ok=True,
                )
            )
        if feasible and patches and bool(np.all(covered)):
            return GapCertificate(gap_k=k_eff, epsilon=float(eps), patches=tuple(patches))
        if feasible and not bool(np.all(covered)):
            failures.append(f"eps={eps}: tiling left boundary samples uncovered")
    raise PartitionError("covering construction failed: " + "; ".join(failures[-3:]))


def verify_certificate(
    cert: GapCertificate,
    p: ExponentField,
    q: ExponentField,
    s,
    dom: Domain,
    *,
    refine_factor: int = 4,
) -> bool:
    """Re-check both patch conditions by exhaustive sampling on a finer mesh."""
    s = _as_field(s)
    sdom = refine(dom, refine_factor)
    for patch in cert.patches:
        lo = np.asarray(patch.box_lo)
        hi = np.asarray(patch.box_hi)
        fidx = facets_in_box(sdom, lo, hi)
        if fidx.size == 0:
            continue
        cidx = cells_in_box(sdom, lo, hi)
        pts = np.vstack(
            [sdom.cell_centroids[cidx], sdom.facet_centroids[fidx], _box_lattice(lo, hi, dom)]
        )
        p_min, s_min, _, quo_min = _patch_scan(p, s, pts, dom.n)
        q_vals = q.eval_points(sdom.facet_centroids[fidx])
        if not quo_min >= cert.gap_k / 2.0 + float(np.max(q_vals)):
            return False
        if not freeze_margin_ok(patch.p_i, patch.s_i, dom.n, q_vals, cert.gap_k):
            return False
        if not (patch.p_i < p_min - patch.delta and patch.p_i - 1.0 > patch.delta):
            return False
        if not (0.0 < patch.t < patch.s_i <= s_min):
            return False
    return True
