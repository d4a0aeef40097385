"""Quadrature building blocks shared by operators, norms and conditions.

The central primitive is the *shell sum*

    S(x, r) = sum_j w_j kw(theta_j) g(x - A_r theta_j, x),

a sphere quadrature over the rho-sphere of radius ``r`` around ``x``.  In two
dimensions cells in which the integrand jumps (a field level changes sign)
are re-integrated exactly up to the jump with split Gauss-Legendre rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError
from .geometry import AnisotropySpec, SphereGrid, sphere_grid

FieldFn = Callable[..., tuple[np.ndarray, list]]

_CHUNK = 3_000_000


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class ShellIntegrand:
    """``fn(y, x) -> (values, levels)`` weighted on the sphere by ``kernel_weight``.

    With ``subtract`` the value at ``y = x`` is removed from every node,
    which realises the kernel cancellation at quadrature level.
    """

    fn: FieldFn
    kernel_weight: Callable[[np.ndarray], np.ndarray]
    subtract: bool = False


def shell_sums(spec: AnisotropySpec, X, radii, integrand: ShellIntegrand,
               grid: SphereGrid | None = None, correct: bool = True) -> np.ndarray:
    """Shell sums for points ``X`` (M, n) and radii (M, K); returns (M, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if radii.ndim == 1:
        radii = np.broadcast_to(radii, (X.shape[0], radii.size))
    M, K = radii.shape
    grid = grid or sphere_grid(spec.n)
    pts = grid.points
    N = pts.shape[0]
    kw = np.asarray(integrand.kernel_weight(pts), dtype=float)
    wk = grid.weights * kw
    do_correct = correct and grid.angles is not None
    out = np.empty((M, K))
    alpha = spec.alpha_array
    rows = max(1, _CHUNK // max(1, K * N))
    for s in range(0, M, rows):
        Xc = X[s:s + rows]
        Rc = radii[s:s + rows]
        D = Rc[:, :, None, None] ** alpha * pts[None, None, :, :]
        Xb = Xc[:, None, None, :]
        Y = Xb - D
        vals, levels = integrand.fn(Y, Xb)
        vals = np.broadcast_to(vals, Y.shape[:-1])
        if integrand.subtract:
            base, _ = integrand.fn(Xc, Xc)
            base = np.broadcast_to(base, Xc.shape[:-1])
            vals = vals - base[:, None, None]
        else:
            base = None
        if not np.isfinite(vals).all():
            raise EvaluationError("non-finite integrand value in shell quadrature")
        S = vals @ wk
        if do_correct and levels:
            S += _boundary_correction(spec, Xc, Rc, integrand, grid, vals, levels, base)
        out[s:s + rows] = S
    return out


def _locate_jumps(spec, Xc, Rc, fn, grid, levels):
    """Circle cells in which a level changes sign, with the jump angle.

    Returns ``(m, k, cell, tstar)``: one entry per (point, radius, cell).
    """
    N = grid.size
    shape = Rc.shape + (N,)
    flagged = np.zeros(shape, dtype=bool)
    which = np.full(shape, -1, dtype=np.int64)
    for li, lev in enumerate(levels):
        inside = np.broadcast_to(lev, shape) < 0
        cross = inside != np.roll(inside, -1, axis=-1)
        which[cross & ~flagged] = li
        flagged |= cross
    if not flagged.any():
        e = np.empty(0, dtype=np.int64)
        return e, e, e, np.empty(0)
    m, k, j = np.nonzero(flagged)
    li = which[m, k, j]
    x = Xc[m]
    r = Rc[m, k]
    alpha = spec.alpha_array
    lo = grid.angles[j].copy()
    hi = grid.angles[(j + 1) % N] + np.where(j == N - 1, 2.0 * np.pi, 0.0)

    def level_at(theta):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        _, levs = fn(x - r[:, None] ** alpha * u, x)
        out = np.empty(theta.shape)
        for qq in np.unique(li):
            sel = li == qq
            out[sel] = np.broadcast_to(levs[qq], theta.shape)[sel]
        return out

    # Illinois (modified regula falsi) on the bracketing node pair
    fa = level_at(lo)
    fb = level_at(hi)
    side = np.zeros(lo.shape, dtype=np.int8)
    c = 0.5 * (lo + hi)
    for _ in range(60):
        denom = fb - fa
        c = np.where(denom != 0, hi - fb * (hi - lo) / np.where(denom != 0, denom, 1.0), 0.5 * (lo + hi))
        c = np.clip(c, np.minimum(lo, hi), np.maximum(lo, hi))
        fc = level_at(c)
        left = (fc < 0) == (fa < 0)
        lo_new = np.where(left, c, lo)
        hi_new = np.where(left, hi, c)
        fa_new = np.where(left, fc, np.where(side == -1, 0.5 * fa, fa))
        fb_new = np.where(left, np.where(side == 1, 0.5 * fb, fb), fc)
        side = np.where(left, 1, -1).astype(np.int8)
        lo, hi, fa, fb = lo_new, hi_new, fa_new, fb_new
        if np.all((np.abs(hi - lo) < 1e-13) | (fc == 0)):
            break
    tstar = np.mod(c, 2.0 * np.pi)
    cell = np.minimum((tstar / grid.cell_width).astype(np.int64), grid.cells - 1)
    # a cell may hold several jumps (both ends of a short arc near tangency)
    key = (m * shape[1] + k) * grid.cells + cell
    order = np.lexsort((tstar, key))
    key, m, k, cell, tstar = key[order], m[order], k[order], cell[order], tstar[order]
    uniq, first, counts = np.unique(key, return_index=True, return_counts=True)
    C = int(counts.max())
    H = grid.cell_width
    cuts = (cell[first] * H)[:, None] + np.full((uniq.size, C), H)
    rank = np.arange(key.size) - np.repeat(first, counts)
    cuts[np.repeat(np.arange(uniq.size), counts), rank] = tstar
    return m[first], k[first], cell[first], cuts


def _split_cell_rule(grid, cell, cuts):
    """Angles and weights of Gauss-Legendre rules on the pieces of each cell.

    ``cuts`` (P, C) holds sorted jump angles inside the cell, padded with the
    cell's right end; padded pieces get zero width.
    """
    q = grid.per_cell
    H = grid.cell_width
    gx, gw = gauss_legendre(q)
    a = (cell * H)[:, None]
    edges = np.concatenate([a, cuts, a + H], axis=1)
    lo, width = edges[:, :-1], np.diff(edges, axis=1)
    th = (lo[:, :, None] + width[:, :, None] * gx).reshape(cell.size, -1)
    wt = (width[:, :, None] * gw).reshape(cell.size, -1)
    return th, wt


def _boundary_correction(spec, Xc, Rc, integrand, grid, vals, levels, base):
    """Re-integrate circle cells that contain a jump with split Gauss-Legendre rules."""
    m, k, cell, cuts = _locate_jumps(spec, Xc, Rc, integrand.fn, grid, levels)
    if m.size == 0:
        return 0.0
    q = grid.per_cell
    x = Xc[m]
    r = Rc[m, k]
    th, wt = _split_cell_rule(grid, cell, cuts)
    P, Q = th.shape
    u = np.stack([np.cos(th), np.sin(th)], axis=-1)
    y = x[:, None, :] - r[:, None, None] ** spec.alpha_array * u
    v, _ = integrand.fn(y, x[:, None, :])
    v = np.broadcast_to(v, (P, Q))
    if base is not None:
        v = v - base[m][:, None]
    kw = np.asarray(integrand.kernel_weight(u.reshape(-1, 2)), dtype=float).reshape(P, Q)
    exact = np.sum(wt * kw * v, axis=1)
    idx = cell[:, None] * q + np.arange(q)[None, :]
    kw_nodes = np.asarray(integrand.kernel_weight(grid.points), dtype=float)
    old = np.sum((grid.weights * kw_nodes)[idx] * vals[m[:, None], k[:, None], idx], axis=1)
    corr = np.zeros(Rc.shape)
    np.add.at(corr, (m, k), exact - old)
    return corr


# ---------------------------------------------------------------------------
# radial rules


def radial_nodes(edges: Sequence[float], gamma: float, per_panel: int = 6):
    """Gauss-Legendre nodes in ``u = rho**gamma`` on consecutive panels.

    Returns ``(r, w, panel)`` with ``sum w h(r) ~ int_{edges[0]}^{edges[-1]} h(r) r**(gamma-1) dr``.
    """
    e = np.asarray(edges, dtype=float)
    if np.any(np.diff(e) <= 0) or e[0] < 0:
        raise ValueError("panel edges must be increasing and nonnegative")
    gx, gw = gauss_legendre(per_panel)
    u = e**gamma
    du = np.diff(u)
    un = u[:-1, None] + du[:, None] * gx[None, :]
    w = (du[:, None] * gw[None, :]) / gamma
    panel = np.repeat(np.arange(len(e) - 1), per_panel)
    return un.ravel() ** (1.0 / gamma), w.ravel(), panel


def ball_edges(radii: Sequence[float], breaks: Sequence[float] = (), inner_decades: int = 6,
               per_decade: int = 1) -> np.ndarray:
    """Panel edges for integrals over E(x0, r) for every r in ``radii``.

    A geometric ladder below the smallest radius resolves integrable
    singularities at the centre.
    """
    radii = np.asarray(radii, dtype=float)
    rmin = float(radii.min())
    ladder = rmin * np.logspace(-inner_decades, 0, inner_decades * per_decade + 1)[:-1]
    graded = [b * (1.0 + sgn * 0.25 * 4.0**-j) for b in breaks for sgn in (-1, 1) for j in range(7)]
    pts = np.concatenate([[0.0], ladder, radii, [b for b in list(breaks) + graded if 0 < b < radii.max()]])
    return np.unique(pts)


@dataclass(frozen=True)
class BallMeasure:
    """Discrete measure on E(x0, R) ordered by radial panel.

    ``points``/``weights`` integrate over E(x0, edges[-1]); the nodes inside
    E(x0, edges[i]) are exactly the first ``ends[i]`` entries.
    """

    points: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    ends: np.ndarray

    def prefix(self, r: float) -> int:
        i = int(np.searchsorted(self.edges, r))
        if i >= len(self.edges) or not math.isclose(self.edges[i], r, rel_tol=1e-12):
            raise ValueError(f"radius {r} is not a panel edge of this measure")
        return int(self.ends[i])

    def volumes(self, radii) -> np.ndarray:
        cw = np.concatenate([[0.0], np.cumsum(self.weights)])
        return np.array([cw[self.prefix(r)] for r in np.atleast_1d(radii)])

    def integrals(self, values, radii) -> np.ndarray:
        cv = np.concatenate([[0.0], np.cumsum(self.weights * values)])
        return np.array([cv[self.prefix(r)] for r in np.atleast_1d(radii)])


def ball_measure(spec: AnisotropySpec, x0, radii: Sequence[float], breaks: Sequence[float] = (),
                 fn: FieldFn | None = None, per_panel: int = 8, sphere_nodes=None,
                 max_panel_ratio: float | None = None, inner_decades: int = 6) -> BallMeasure:
    """Polar nodes on E(x0, max radii) with panel edges at every radius.

    When ``fn(y) -> (values, levels)`` is given (two dimensions), circle
    cells crossed by a level are replaced by split Gauss rules, so the
    measure integrates that field's jumps accurately.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    x0 = np.asarray(x0, dtype=float)
    edges = ball_edges(radii, breaks, inner_decades)
    if max_panel_ratio is not None:
        edges = _refine_edges(edges, max_panel_ratio)
    r, wr, panel = radial_nodes(edges, spec.gamma, per_panel)
    grid = sphere_grid(spec.n, sphere_nodes)
    J = _jac(spec, grid.points)
    K, N = r.size, grid.size
    alpha = spec.alpha_array
    pts = x0 - r[:, None, None] ** alpha * grid.points[None, :, :]
    wts = wr[:, None] * (grid.weights * J)[None, :]
    keep = np.ones((K, N), dtype=bool)
    extra_pts, extra_w, extra_k = [], [], []
    if fn is not None and grid.angles is not None:
        _, levels = fn(pts)
        if levels:
            wrap = lambda y, x: fn(y)
            m, k, cell, cuts = _locate_jumps(spec, x0[None, :], r[None, :], wrap, grid,
                                             [np.asarray(lv)[None] for lv in levels])
            if k.size:
                q = grid.per_cell
                keep[k[:, None], cell[:, None] * q + np.arange(q)[None, :]] = False
                th, wt = _split_cell_rule(grid, cell, cuts)
                u = np.stack([np.cos(th), np.sin(th)], axis=-1)
                extra_pts.append((x0 - r[k][:, None, None] ** alpha * u).reshape(-1, spec.n))
                extra_w.append((wr[k][:, None] * wt * _jac(spec, u)).ravel())
                extra_k.append(np.repeat(k, th.shape[1]))
    kk = np.repeat(np.arange(K), N).reshape(K, N)[keep]
    P = pts[keep]
    W = wts[keep]
    if extra_pts:
        P = np.concatenate([P] + extra_pts)
        W = np.concatenate([W] + extra_w)
        kk = np.concatenate([kk] + extra_k)
    order = np.argsort(kk, kind="stable")
    P, W, kk = P[order], W[order], kk[order]
    pan = panel[kk]
    ends = np.searchsorted(pan, np.arange(len(edges)), side="left")
    return BallMeasure(P, W, edges, ends)


def ball_integrals(spec: AnisotropySpec, fn, x0, radii: Sequence[float], breaks: Sequence[float] = (),
                   per_panel: int = 8, sphere_nodes=None, max_panel_ratio: float = 1.25):
    """Integrals of ``fn(y) -> (values, levels)`` over E(x0, r) for each r.

    Returns ``(integrals, volumes)`` computed with the same discrete measure,
    so averages of constants are exact.
    """
    meas = ball_measure(spec, x0, radii, breaks, fn, per_panel, sphere_nodes, max_panel_ratio)
    vals, _ = fn(meas.points)
    vals = np.broadcast_to(vals, meas.weights.shape)
    if not np.isfinite(vals).all():
        raise EvaluationError("non-finite integrand value on ellipsoid")
    return meas.integrals(vals, radii), meas.volumes(radii)


def _refine_edges(edges, ratio):
    """Split panels so consecutive positive edges differ by at most ``ratio``."""
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        if a > 0 and b / a > ratio:
            m = int(math.ceil(math.log(b / a) / math.log(ratio)))
            out.extend(a * (b / a) ** (np.arange(1, m) / m))
            out.append(b)
        else:
            out.append(b)
    return np.asarray(out)


def _jac(spec, u):
    return np.sum(spec.alpha_array * np.asarray(u) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# Gauss-Kronrod 15 adaptive integration of vectorised integrands

_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def gk_adaptive(f: Callable[[np.ndarray], np.ndarray], intervals, abs_tol: float = 1e-10,
                rel_tol: float = 1e-10, max_sweeps: int = 60, max_leaves: int = 4000):
    """Integrate a vectorised ``f`` over a union of intervals.

    Global adaptive Gauss-Kronrod 15: every sweep evaluates all new intervals
    in one call, then bisects the intervals with the largest Kronrod-Gauss
    differences until the remaining total would fall under the tolerance.
    Refinement stops once ``max_leaves`` intervals exist; the error estimate
    then reports what is left.  Returns ``(per_interval_values, error_estimate)`` for the input intervals.
    """
    iv = np.atleast_2d(np.asarray(intervals, dtype=float))
    n0 = iv.shape[0]
    leaves = iv
    owner = np.arange(n0)
    val = np.empty(0)
    err = np.empty(0)
    keep_iv = np.empty((0, 2))
    keep_owner = np.empty(0, dtype=np.int64)
    new = leaves
    new_owner = owner
    for _ in range(max_sweeps):
        a, b = new[:, 0:1], new[:, 1:2]
        c, hw = 0.5 * (a + b), 0.5 * (b - a)
        fx = np.asarray(f((c + hw * GK_NODES).ravel()), dtype=float).reshape(new.shape[0], 15)
        k = hw[:, 0] * (fx @ GK_WEIGHTS)
        e = np.abs(k - hw[:, 0] * (fx @ G_WEIGHTS))
        keep_iv = np.concatenate([keep_iv, new])
        keep_owner = np.concatenate([keep_owner, new_owner])
        val = np.concatenate([val, k])
        err = np.concatenate([err, e])
        total_err = float(err.sum())
        tol = max(abs_tol, rel_tol * abs(float(val.sum())))
        if total_err <= tol:
            break
        width = keep_iv[:, 1] - keep_iv[:, 0]
        splittable = width > 1e-13 * np.maximum(1.0, np.abs(keep_iv[:, 0]))
        order = np.argsort(-np.where(splittable, err, -1.0))
        cum = np.cumsum(err[order])
        need = total_err - 0.5 * tol
        count = int(np.searchsorted(cum, need) + 1)
        pick = order[:count]
        pick = pick[splittable[pick]][: max(0, max_leaves - err.size)]
        if pick.size == 0:
            break
        sel = np.zeros(err.size, dtype=bool)
        sel[pick] = True
        pb = keep_iv[sel]
        po = keep_owner[sel]
        mid = 0.5 * (pb[:, 0] + pb[:, 1])
        new = np.concatenate([np.column_stack([pb[:, 0], mid]), np.column_stack([mid, pb[:, 1]])])
        new_owner = np.concatenate([po, po])
        keep_iv, keep_owner, val, err = keep_iv[~sel], keep_owner[~sel], val[~sel], err[~sel]
    out = np.zeros(n0)
    np.add.at(out, keep_owner, val)
    return out, float(err.sum())


# ---------------------------------------------------------------------------
# one-dimensional integrals on (a, b) in log scale


def log_integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                  breakpoints: Sequence[float] = (), per_decade: int = 24, order: int = 8):
    """``int_a^b f(s) ds`` for ``0 < a < b < inf`` by Gauss-Legendre panels in ``ln s``.

    ``f`` must be vectorised.  Breakpoints (jumps/kinks) become panel edges.
    """
    if not (0 < a < b):
        raise ValueError("need 0 < a < b")
    edges = log_edges(a, b, breakpoints, per_decade)
    gx, gw = gauss_legendre(order)
    la, lb = np.log(edges[:-1]), np.log(edges[1:])
    t = la[:, None] + (lb - la)[:, None] * gx[None, :]
    s = np.exp(t)
    w = (lb - la)[:, None] * gw[None, :] * s
    v = np.asarray(f(s.ravel()), dtype=float).reshape(s.shape)
    return float(np.sum(w * v))


def log_edges(a, b, breakpoints=(), per_decade=24):
    n = max(1, int(math.ceil(per_decade * math.log10(b / a))))
    e = np.geomspace(a, b, n + 1)
    bp = [x for x in breakpoints if a < x < b]
    return np.unique(np.concatenate([e, bp]))
