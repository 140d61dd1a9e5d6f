"""Strictly convex nonlocal Neumann energy and its first-order minimizer.

The discrete energy over interior cell values u is

    sum_{i != j} w_ij |u_i - u_j|^{p_ij} / (p_ij |x_i - x_j|^{n + s_ij p_ij})
    + sum_k w_k |u_k|^{pbar_k} / pbar_k
    - sum_f a_f g_f u_{cell(f)}

with the boundary trace of u taken from the facet's adjacent interior cell.
Each |.|^{p} term is convex and the bulk term is strictly so, which is what
the two-start uniqueness checks lean on.

Assembly is dense below _DENSE_LIMIT cells (a handful of cached M x M
arrays), blocked through the pair-quadrature machinery above it.  Both paths
sum in a fixed order, so reports do not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, ProblemError
from .exponents import (
    BOUNDARY,
    PAIR,
    ExponentField,
    _as_field,
    _p_star_at,
    constant_field,
    diagonal_field,
    extend_symmetric_mean,
    validate_bounds,
)
from .geometry import Domain, GridFunction, pair_quadrature, reduce_blocks, map_blocks
from .modular import _pair_term_fields, luxemburg_norm

CONVERGED = "converged"
NONCONVERGED = "nonconverged"
LINE_SEARCH_FAILURE = "line-search-failure"

_DENSE_LIMIT = 1024
_ARMIJO = 0.5
_SHRINK = 0.5
_SLOPE = 0.9  # slope-shrink factor for the flat-energy endgame
_MAX_BACKTRACKS = 60
_LBFGS_MEMORY = 10


@dataclass(frozen=True)
class EnergyProblem:
    """Data of the boundary-load energy: pair exponent p, order s, facet
    data g, and the integrability class r of g on the boundary."""

    domain: Domain
    p: ExponentField
    s: ExponentField
    g: GridFunction
    r: ExponentField

    def __post_init__(self):
        object.__setattr__(self, "s", _as_field(self.s))
        if not isinstance(self.r, ExponentField):
            object.__setattr__(self, "r", constant_field(float(self.r), BOUNDARY))
        if self.p.arity != PAIR:
            object.__setattr__(self, "p", extend_symmetric_mean(self.p))
        if not self.p.symmetric and not _sampled_symmetric(self.p, self.domain):
            raise ProblemError("pair exponent must satisfy p(x, y) = p(y, x)")
        validate_bounds(self.p, self.domain, "p")
        validate_bounds(self.s, self.domain, "s")
        validate_bounds(self.r, self.domain, "r")
        if self.g.boundary.shape[0] != self.domain.n_facets:
            raise ProblemError("boundary data does not match the mesh facets")
        _check_load_pairing(self.p, self.s, self.r, self.domain)


def _sampled_symmetric(p: ExponentField, dom: Domain, limit: int = 64) -> bool:
    pts = dom.cell_centroids[:limit]
    grid = p.eval_pair_grid(pts, pts)
    return bool(np.array_equal(grid, grid.T))


def _check_load_pairing(p, s, r, dom: Domain) -> None:
    """Trace pairing with L^{r} data needs the critical exponent to clear the
    conjugate r/(r-1) wherever it is finite."""
    if dom.n < 2:
        # the critical-exponent formula carries a factor n - 1 that vanishes
        # on intervals, where the trace is two point values and the pairing
        # is a finite sum for any data class
        return
    pts = dom.facet_centroids
    pstar = _p_star_at(p, s, dom.n, pts)
    rv = r.eval_points(pts)
    rconj = rv / (rv - 1.0)
    bad = np.isfinite(pstar) & (pstar <= rconj)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ProblemError(
            f"boundary data class too weak at {pts[j].tolist()}: "
            f"critical exponent {pstar[j]:.6g} <= conjugate {rconj[j]:.6g}"
        )


def _signed_power(delta: np.ndarray, expo: np.ndarray) -> np.ndarray:
    # the p < 2 integrand is defined as 0 at coincident values, before
    # exponentiation, so no 0^negative is ever formed
    out = np.zeros_like(delta)
    nz = delta != 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        np.copyto(out, np.sign(delta) * np.abs(delta) ** expo, where=nz)
    return out


class _Assembly:
    def __init__(self, prob: EnergyProblem):
        dom = prob.domain
        self.n_cells = dom.n_cells
        self.mass_w = dom.cell_measures
        self.mass_p = diagonal_field(prob.p).eval_points(dom.cell_centroids)
        load = np.zeros(dom.n_cells)
        np.add.at(load, dom.facet_cells, dom.facet_measures * prob.g.boundary)
        self.load = load

    def _bulk(self, u: np.ndarray) -> float:
        mass = float(np.sum(self.mass_w * np.abs(u) ** self.mass_p / self.mass_p))
        return mass - float(self.load @ u)

    def _bulk_grad(self, u: np.ndarray) -> np.ndarray:
        return self.mass_w * _signed_power(u, self.mass_p - 1.0) - self.load


class _DenseAssembly(_Assembly):
    def __init__(self, prob: EnergyProblem):
        super().__init__(prob)
        dom = prob.domain
        x = dom.cell_centroids
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        off = ~np.eye(dom.n_cells, dtype=bool)
        if float(np.min(dist[off])) < 1e-15 * max(1.0, dom.diameter):
            raise MeshError("coincident cell centroids")
        np.fill_diagonal(dist, 1.0)
        self.pgrid = prob.p.eval_pair_grid(x, x)
        s = prob.s
        if s.arity == PAIR:
            sgrid = s.eval_pair_grid(x, x)
        else:
            sgrid = np.broadcast_to(s.eval_points(x)[:, None], self.pgrid.shape)
        w = np.outer(dom.cell_measures, dom.cell_measures)
        kern = w / dist ** (dom.n + sgrid * self.pgrid)
        np.fill_diagonal(kern, 0.0)
        self.kern = kern
        self.kern_over_p = kern / self.pgrid

    def energy(self, u: np.ndarray, threads=None) -> float:
        du = np.abs(u[:, None] - u[None, :])
        with np.errstate(over="ignore"):
            pair = float(np.sum(self.kern_over_p * du**self.pgrid))
        return pair + self._bulk(u)

    def gradient(self, u: np.ndarray, threads=None) -> np.ndarray:
        t = self.kern * _signed_power(u[:, None] - u[None, :], self.pgrid - 1.0)
        return t.sum(axis=1) - t.sum(axis=0) + self._bulk_grad(u)


class _BlockAssembly(_Assembly):
    def __init__(self, prob: EnergyProblem):
        super().__init__(prob)
        self.pq = pair_quadrature(prob.domain, "interior")
        self.fields_on = _pair_term_fields(prob.p, prob.s, self.pq)

    def energy(self, u: np.ndarray, threads=None) -> float:
        def eblock(block) -> float:
            pg, kexp = self.fields_on(block)
            du = np.abs(u[block.row_start : block.row_stop, None] - u[None, :])
            with np.errstate(over="ignore"):
                term = block.weights * du**pg / (pg * block.dist**kexp)
            return float(np.sum(np.where(block.offdiag, term, 0.0)))

        return reduce_blocks(self.pq, eblock, threads) + self._bulk(u)

    def gradient(self, u: np.ndarray, threads=None) -> np.ndarray:
        def gblock(block):
            pg, kexp = self.fields_on(block)
            du = u[block.row_start : block.row_stop, None] - u[None, :]
            t = np.where(
                block.offdiag,
                block.weights * _signed_power(du, pg - 1.0) / block.dist**kexp,
                0.0,
            )
            return block.row_start, block.row_stop, t.sum(axis=1), t.sum(axis=0)

        grad = self._bulk_grad(np.asarray(u, dtype=float)).copy()
        for a, b, rows, cols in map_blocks(self.pq, gblock, threads):
            grad[a:b] += rows
            grad -= cols
        return grad


def _assembly(prob: EnergyProblem) -> _Assembly:
    asm = getattr(prob, "_asm", None)
    if asm is None:
        cls = _DenseAssembly if prob.domain.n_cells <= _DENSE_LIMIT else _BlockAssembly
        asm = cls(prob)
        object.__setattr__(prob, "_asm", asm)
    return asm


def energy(u: GridFunction, prob: EnergyProblem, threads: int | None = None) -> float:
    return _assembly(prob).energy(np.asarray(u.interior, dtype=float), threads)


def gradient(u: GridFunction, prob: EnergyProblem, threads: int | None = None) -> GridFunction:
    g = _assembly(prob).gradient(np.asarray(u.interior, dtype=float), threads)
    return GridFunction.from_interior(prob.domain, g)


def el_residual(u: GridFunction, prob: EnergyProblem, threads: int | None = None) -> float:
    """Sup-norm of the discrete first-variation; zero iff the weak form
    holds against every test vector."""
    g = _assembly(prob).gradient(np.asarray(u.interior, dtype=float), threads)
    return float(np.max(np.abs(g)))


def boundary_pairing(u: GridFunction, prob: EnergyProblem) -> float:
    """The load term: facet-weighted sum of g times the trace of u."""
    return float(_assembly(prob).load @ u.interior)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 42
    accelerate: bool = False
    start: str = "zero"


@dataclass(frozen=True)
class SolverReport:
    minimizer: GridFunction
    energy: float
    el_residual: float
    iterations: int
    history: tuple
    status: str


class _Lbfgs:
    def __init__(self, memory: int):
        self.memory = memory
        self.s: list[np.ndarray] = []
        self.y: list[np.ndarray] = []
        self.rho: list[float] = []

    def update(self, s: np.ndarray, y: np.ndarray) -> None:
        sy = float(s @ y)
        # curvature guard: skip the pair when it carries no positive signal
        if sy <= 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            return
        self.s.append(s)
        self.y.append(y)
        self.rho.append(1.0 / sy)
        if len(self.s) > self.memory:
            del self.s[0], self.y[0], self.rho[0]

    def direction(self, g: np.ndarray) -> np.ndarray:
        if not self.s:
            return -g
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(self.s), reversed(self.y), reversed(self.rho)):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        gamma = (1.0 / self.rho[-1]) / float(self.y[-1] @ self.y[-1])
        q *= gamma
        for (s, y, rho), a in zip(zip(self.s, self.y, self.rho), reversed(alphas)):
            b = rho * float(y @ q)
            q += s * (a - b)
        return -q


def minimize(
    prob: EnergyProblem,
    opts: SolverOptions | None = None,
    threads: int | None = None,
) -> SolverReport:
    """Descent with backtracking from the configured start.

    Sufficient decrease uses Armijo parameter 0.5 with step halving; the
    quasi-second-order direction is opt-in via opts.accelerate and falls
    back to steepest descent whenever its direction fails the slope test.

    Once the predicted Armijo decrease drops below the floating-point
    resolution of the energy value itself, sufficient decrease is no longer
    representable even though the gradient is still resolvable; in that
    regime a step is accepted when it does not raise the energy and shrinks
    the directional slope (approximate Wolfe endgame).
    """
    opts = opts or SolverOptions()
    asm = _assembly(prob)
    m = prob.domain.n_cells
    if opts.start == "zero":
        u = np.zeros(m)
    elif opts.start == "random":
        u = np.random.default_rng(opts.seed).standard_normal(m)
    else:
        raise ProblemError(f"unknown start '{opts.start}' (expected zero|random)")

    e = asm.energy(u, threads)
    g = asm.gradient(u, threads)
    ginf = float(np.max(np.abs(g)))
    history = [(0, e, ginf)]
    mem = _Lbfgs(_LBFGS_MEMORY) if opts.accelerate else None
    status = NONCONVERGED
    alpha_prev = 1.0

    for it in range(1, opts.max_iter + 1):
        if ginf <= opts.tol:
            status = CONVERGED
            break
        d = mem.direction(g) if mem is not None else -g
        gd = float(g @ d)
        if not np.isfinite(gd) or gd >= 0.0:
            d = -g
            gd = float(g @ d)
        alpha = 1.0 if mem is not None else 2.0 * alpha_prev
        flat = 32.0 * np.finfo(float).eps * (1.0 + abs(e))
        accepted = False
        g_new = None
        for _ in range(_MAX_BACKTRACKS):
            u_new = u + alpha * d
            e_new = asm.energy(u_new, threads)
            if np.isfinite(e_new) and e_new <= e + _ARMIJO * alpha * gd:
                accepted = True
                break
            if np.isfinite(e_new) and e_new <= e and _ARMIJO * alpha * -gd <= flat:
                # Armijo decrease below energy resolution: accept on slope
                g_trial = asm.gradient(u_new, threads)
                gd_new = float(g_trial @ d)
                if np.isfinite(gd_new) and _SLOPE * gd <= gd_new <= -1e-10 * gd:
                    accepted = True
                    g_new = g_trial
                    break
            alpha *= _SHRINK
        if not accepted:
            status = LINE_SEARCH_FAILURE
            break
        if g_new is None:
            g_new = asm.gradient(u_new, threads)
        if mem is not None:
            mem.update(alpha * d, g_new - g)
        u, e, g = u_new, e_new, g_new
        ginf = float(np.max(np.abs(g)))
        alpha_prev = alpha
        history.append((it, e, ginf))
    if status == NONCONVERGED and ginf <= opts.tol:
        status = CONVERGED

    return SolverReport(
        minimizer=GridFunction.from_interior(prob.domain, u),
        energy=e,
        el_residual=ginf,
        iterations=history[-1][0],
        history=tuple(history),
        status=status,
    )


@dataclass(frozen=True)
class CoercivityTable:
    rows: tuple
    increasing: bool | None


def coercivity_probe(
    u: GridFunction,
    prob: EnergyProblem,
    scales,
    threads: int | None = None,
) -> CoercivityTable:
    """Energy growth along the ray tau -> tau u, with the energy/norm ratio
    per scale and a monotonicity verdict (absent for a single scale)."""
    if float(np.max(np.abs(u.interior))) == 0.0:
        raise ProblemError("coercivity probe needs a nonzero ray")
    pbar = diagonal_field(prob.p)
    rows = []
    for tau in scales:
        v = u.scaled(float(tau))
        e = energy(v, prob, threads)
        nrm = luxemburg_norm(v, pbar, "interior").lambda_star
        rows.append((float(tau), e, e / nrm))
    ratios = [r for _, _, r in rows]
    verdict = None
    if len(rows) >= 2:
        verdict = all(b > a for a, b in zip(ratios, ratios[1:]))
    return CoercivityTable(tuple(rows), verdict)
