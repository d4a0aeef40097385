"""Lebesgue, weak Lebesgue, local Morrey and local Campanato norms.

Every ``sup_{r>0}`` is a grid-sup over a declared log window; reports carry
the grid and the maximising radius so comparisons can use identical grids.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError
from .functions import RadialProfile, ScalarField
from .geometry import Ellipsoid
from .quadrature import ball_integrals, ball_measure

DEFAULT_WINDOW = (1e-3, 1e3)


@dataclass
class NormReport:
    value: float
    argsup_r: float | None
    r_window: tuple[float, float]
    grid: list = field(default_factory=list)
    est_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"value": self.value, "argsup_r": self.argsup_r, "r_window": list(self.r_window),
                "est_error": self.est_error, "diagnostics": self.diagnostics,
                "grid": [[r, v] for r, v in self.grid]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "local_value"])
            for r, v in self.grid:
                w.writerow([f"{r:.17g}", f"{v:.17g}"])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _check_p(p):
    if not p >= 1:
        raise ValueError("p must be >= 1")


def r_grid(window=DEFAULT_WINDOW, per_decade: int = 25) -> np.ndarray:
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("r_window must satisfy 0 < r_min < r_max")
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(lo, hi, max(n, 2))


# ---------------------------------------------------------------------------
# discrete-measure helpers


def lp_from_samples(values, weights, p: float) -> float:
    _check_p(p)
    return float(np.dot(weights, np.abs(values) ** p) ** (1.0 / p))


def weak_from_samples(values, weights, p: float) -> float:
    """``sup_t t * |{|f| > t}|^(1/p)`` for a discrete measure.

    The sup is attained as ``t`` increases to a sampled value, so it is the
    max over samples ``v_i`` of ``v_i * (sum of weights with |f| >= v_i)^(1/p)``.
    """
    _check_p(p)
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    order = np.argsort(-v, kind="stable")
    vs = v[order]
    cw = np.cumsum(np.asarray(weights, dtype=float)[order])
    return float(np.max(vs * cw ** (1.0 / p)))


def _refine_sup(local_at, rs, local):
    """Maximise ``local_at`` between the neighbours of the grid argmax (in ln r).

    Returns the grid with the refined node inserted (value, argsup unchanged
    when refinement does not improve on the grid).
    """
    from scipy.optimize import minimize_scalar

    i = int(np.argmax(local))
    if not np.isfinite(local[i]) or local[i] <= 0:
        return rs, local
    a = math.log(rs[max(i - 1, 0)])
    b = math.log(rs[min(i + 1, rs.size - 1)])
    if b <= a:
        return rs, local
    res = minimize_scalar(lambda u: -local_at(math.exp(u)), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-6})
    r_star, v_star = math.exp(res.x), -float(res.fun)
    if v_star <= local[i] or np.any(np.isclose(rs, r_star, rtol=1e-12)):
        return rs, local
    j = int(np.searchsorted(rs, r_star))
    return np.insert(rs, j, r_star), np.insert(local, j, v_star)


def _abs_power(f: ScalarField, p: float):
    def fn(y):
        v, lev = f.evaluate_full(y)
        return np.abs(v) ** p, lev

    return fn


# ---------------------------------------------------------------------------
# Lebesgue norms


def lp_norm(f: ScalarField, p: float, region: Ellipsoid | None = None, per_panel: int = 8,
            sphere_nodes=None) -> float:
    """``||f||_{L_p(region)}``; ``region=None`` means the whole space."""
    _check_p(p)
    if f.is_zero:
        return 0.0
    if region is not None:
        I, _ = ball_integrals(f.spec, _abs_power(f, p), region.center, [region.radius],
                              f.radial_breaks(region.center), per_panel, sphere_nodes)
        return float(I[0] ** (1.0 / p))
    if math.isfinite(f.support_radius):
        I, _ = ball_integrals(f.spec, _abs_power(f, p), f.center, [f.support_radius],
                              f.radial_breaks(f.center), per_panel, sphere_nodes)
        return float(I[0] ** (1.0 / p))
    radii = np.logspace(0, 6, 7)
    I, _ = ball_integrals(f.spec, _abs_power(f, p), f.center, radii, f.radial_breaks(f.center),
                          per_panel, sphere_nodes)
    if I[-1] - I[-2] > 1e-10 * I[-1]:
        raise EvaluationError(f"{f.name} does not appear to lie in L_{p:g} (integral still growing)")
    return float(I[-1] ** (1.0 / p))


def weak_lp_norm(f: ScalarField, p: float, region: Ellipsoid, per_panel: int = 8, sphere_nodes=None) -> float:
    """Weak L_p quasi-norm on ``region`` from the weighted distribution of node values.

    Uses the same discrete measure as :func:`lp_norm` with equal arguments,
    so ``weak_lp_norm <= lp_norm`` holds exactly.
    """
    _check_p(p)
    if f.is_zero:
        return 0.0
    meas = ball_measure(f.spec, region.center, [region.radius], f.radial_breaks(region.center),
                        f.evaluate_full, per_panel, sphere_nodes, 1.25)
    vals = np.abs(f(meas.points))
    return weak_from_samples(vals, meas.weights, p)


# ---------------------------------------------------------------------------
# local Morrey norms


def local_morrey_norm(f: ScalarField, p: float, phi: RadialProfile, x0, weak: bool = False,
                      r_window=DEFAULT_WINDOW, per_decade: int = 25, per_panel: int = 4,
                      sphere_nodes: int = 128, refine: bool = False) -> NormReport:
    """``sup_r phi(r)^-1 |E(x0,r)|^(-1/p) ||f||_{L_p(E(x0,r))}`` on a log grid of r.

    With ``weak`` the weak L_p norm replaces the L_p norm.  Nodes where
    ``phi = inf`` contribute 0 (reciprocal convention) and are counted in
    the diagnostics.  Strong and weak variants share one discrete measure.
    """
    _check_p(p)
    x0 = np.asarray(x0, dtype=float)
    rs = r_grid(r_window, per_decade)
    phis = np.asarray(phi(rs), dtype=float)
    meas = ball_measure(f.spec, x0, rs, f.radial_breaks(x0), f.evaluate_full, per_panel, sphere_nodes)
    vols = meas.volumes(rs)
    if f.is_zero:
        norms = np.zeros_like(rs)
    else:
        vals = np.abs(f(meas.points))
        if weak:
            norms = np.array([weak_from_samples(vals[: meas.prefix(r)], meas.weights[: meas.prefix(r)], p)
                              for r in rs])
        else:
            norms = meas.integrals(vals**p, rs) ** (1.0 / p)
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(np.isinf(phis), 0.0, norms / (phis * vols ** (1.0 / p)))
    local = np.where((phis == 0) & (norms == 0), 0.0, local)
    if refine and not f.is_zero:
        def local_at(r):
            ph = float(phi(r))
            if math.isinf(ph):
                return 0.0
            m = ball_measure(f.spec, x0, [r], f.radial_breaks(x0), f.evaluate_full, per_panel, sphere_nodes)
            v = np.abs(f(m.points))
            nrm = weak_from_samples(v, m.weights, p) if weak else lp_from_samples(v, m.weights, p)
            return nrm / (ph * m.weights.sum() ** (1.0 / p))

        rs, local = _refine_sup(local_at, rs, local)
    i = int(np.argmax(local))
    diag = {"infinite_phi_nodes": float(np.isinf(phis).sum()), "weak": float(weak)}
    return NormReport(float(local[i]), float(rs[i]), tuple(r_window), list(zip(rs.tolist(), local.tolist())),
                      0.0, diag)


# ---------------------------------------------------------------------------
# Campanato / BMO


def local_campanato_norm(b: ScalarField, p: float, lam: float, x0, r_window=DEFAULT_WINDOW,
                         per_decade: int = 25, per_panel: int = 6, sphere_nodes: int = 128,
                         refine: bool = True) -> NormReport:
    """``sup_r (|E|^-(1 + lam p) int_E |b - b_E|^p)^(1/p)`` over E = E(x0, r) on a log grid."""
    _check_p(p)
    gamma = b.spec.gamma
    if not 0 <= lam < 1.0 / gamma:
        raise ValueError("lam must lie in [0, 1/gamma)")
    x0 = np.asarray(x0, dtype=float)
    rs = r_grid(r_window, per_decade)
    meas = ball_measure(b.spec, x0, rs, b.radial_breaks(x0), b.evaluate_full, per_panel, sphere_nodes)
    vals = b(meas.points) if not b.is_zero else np.zeros(meas.weights.size)
    flat = np.ptp(vals) == 0
    if flat:
        vals = np.zeros_like(vals)  # constant samples: the oscillation vanishes exactly
    w = meas.weights
    local = np.empty(rs.size)
    means = np.empty(rs.size)
    for i, r in enumerate(rs):
        e = meas.prefix(r)
        vol = w[:e].sum()
        m = float(np.dot(w[:e], vals[:e]) / vol)
        osc = float(np.dot(w[:e], np.abs(vals[:e] - m) ** p))
        means[i] = m
        local[i] = (osc / vol ** (1.0 + lam * p)) ** (1.0 / p)
    if refine and not flat:
        def local_at(r):
            m = ball_measure(b.spec, x0, [r], b.radial_breaks(x0), b.evaluate_full, per_panel, sphere_nodes)
            v = b(m.points)
            vol = m.weights.sum()
            mean = float(np.dot(m.weights, v) / vol)
            return (float(np.dot(m.weights, np.abs(v - mean) ** p)) / vol ** (1.0 + lam * p)) ** (1.0 / p)

        rs, local = _refine_sup(local_at, rs, local)
    i = int(np.argmax(local))
    return NormReport(float(local[i]), float(rs[i]), tuple(r_window), list(zip(rs.tolist(), local.tolist())),
                      0.0, {"lambda": lam, "p": p, "refined": float(refine)})


def ellipsoid_means(b: ScalarField, x0, radii, per_panel: int = 8, sphere_nodes=None) -> np.ndarray:
    """``b_{E(x0, r)}`` for each r, from one discrete measure."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    I, V = ball_integrals(b.spec, b.evaluate_full, x0, radii, b.radial_breaks(x0), per_panel, sphere_nodes)
    return I / V


def bmo_norm_sampled(b: ScalarField, p: float, centers, r_window=DEFAULT_WINDOW, **kw) -> NormReport:
    """Max over ``centers`` of the lam = 0 local Campanato norm (a lower bound of the BMO norm)."""
    centers = [np.asarray(c, dtype=float) for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    best, best_i = None, 0
    for i, c in enumerate(centers):
        rep = local_campanato_norm(b, p, 0.0, c, r_window, **kw)
        if best is None or rep.value > best.value:
            best, best_i = rep, i
    best.diagnostics = dict(best.diagnostics, center_index=float(best_i), centers=float(len(centers)))
    return best
