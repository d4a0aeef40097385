"""Weighted Hardy operators, essential-infimum tails and weight-pair conditions.

All tail integrals ``int_t^inf`` are computed on one logarithmic panel grid
running from the smallest requested t to a horizon (1e6 by default), with a
power-law extrapolation of the integrand beyond the horizon.  The conventions
``1/inf = 0`` and ``0 * inf = 0`` are used throughout.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError
from .functions import RadialProfile
from .quadrature import gauss_legendre

HORIZON = 1e6
BASE_WINDOW = (1e-2, 1e2)
EXTENDED_WINDOW = (1e-3, 1e3)
HARDY_WINDOW = (1e-4, 1e4)
SATISFIED_GROWTH = 1.2
VIOLATED_GROWTH = 10.0

_NEXT = 1e-9  # relative offset realising the one-sided limit t+


# ---------------------------------------------------------------------------
# log panel grid


class _TailGrid:
    """Gauss-Legendre panels in ln s between ``lo`` and ``horizon``.

    ``nodes``/``weights`` integrate in ds; ``edges`` always contain the
    requested evaluation points so that tail integrals are exact prefix sums.
    """

    def __init__(self, lo, horizon, points=(), breakpoints=(), per_decade=20, order=8):
        if not 0 < lo < horizon:
            raise ValueError("need 0 < lo < horizon")
        n = max(int(math.ceil(per_decade * math.log10(horizon / lo))), 1)
        extra = [b for b in list(points) + list(breakpoints) if lo < b < horizon]
        edges = np.unique(np.concatenate([np.geomspace(lo, horizon, n + 1), extra]))
        # drop slivers created by points that nearly coincide with grid edges
        keep = np.concatenate([[True], np.diff(np.log(edges)) > 1e-12])
        self.edges = edges[keep]
        self.edges[-1] = horizon
        self.horizon = float(horizon)
        self.breakpoints = tuple(float(b) for b in breakpoints)
        x, w = gauss_legendre(order)
        u0 = np.log(self.edges[:-1])[:, None]
        du = np.diff(np.log(self.edges))[:, None]
        s = np.exp(u0 + du * x[None, :])
        self.nodes = s.ravel()
        self.weights = (du * w[None, :] * s).ravel()
        self.panel = np.repeat(np.arange(self.edges.size - 1), order)

    def samples(self, beyond_decades=4, beyond_per_decade=10):
        """Sample points for one-sided tail sup/inf, including points past the horizon."""
        pts = [self.nodes, self.nodes * (1 + _NEXT), self.edges * (1 + _NEXT)]
        pts.append(np.asarray(self.breakpoints, dtype=float) * (1 + 1e-12))
        m = beyond_decades * beyond_per_decade
        pts.append(self.horizon * np.logspace(0, beyond_decades, m + 1)[1:])
        s = np.unique(np.concatenate([np.ravel(p) for p in pts]))
        return s[s > 0]

    def tail_integrals(self, h, ts, log_weighted=False):
        """``int_t^inf (1 + ln(s/t))^[log] h(s) ds`` at each ``t`` in ``ts`` (all edges).

        Returns ``(values, tail_info)``; values are ``inf`` when the
        extrapolated tail diverges and ``h`` is positive near the horizon.
        """
        h = np.asarray(h, dtype=float)
        ts = np.asarray(ts, dtype=float)
        idx = np.searchsorted(self.edges, ts)
        idx = np.where((idx < self.edges.size) & np.isclose(self.edges[np.minimum(idx, self.edges.size - 1)], ts,
                                                            rtol=1e-12, atol=0), idx, -1)
        if np.any(idx < 0):
            raise ValueError("evaluation points must be grid edges")
        with np.errstate(invalid="ignore"):
            contrib = np.where(h == 0, 0.0, h * self.weights)
            lcontrib = np.where(h == 0, 0.0, h * self.weights * np.log(self.nodes))
        npan = self.edges.size - 1
        P = np.bincount(self.panel, contrib, npan)
        L = np.bincount(self.panel, lcontrib, npan)
        # inf - inf cannot occur: contributions are nonnegative or finite signed values
        A = np.concatenate([np.cumsum(P[::-1])[::-1], [0.0]])
        Lc = np.concatenate([np.cumsum(L[::-1])[::-1], [0.0]])
        t0, t1, info = _power_tail(self.nodes, h, self.horizon)
        A = A + t0
        Lc = Lc + t1
        a, lc = A[idx], Lc[idx]
        if not log_weighted:
            return a, info
        with np.errstate(invalid="ignore"):
            out = (1.0 - np.log(ts)) * a + lc
        out = np.where(np.isinf(a), np.inf, out)
        return out, info


def _power_tail(s, h, horizon):
    """Extrapolate ``h ~ c s^a`` from the last decade below ``horizon``.

    Returns ``(int_H^inf h, int_H^inf ln(s) h, info)``.
    """
    i2 = s.size - 1
    i1 = int(np.searchsorted(s, s[i2] / 10.0))
    h1, h2 = float(h[i1]), float(h[i2])
    if h2 == 0.0 or not np.isfinite(h2):
        if np.isinf(h2):
            return math.inf, math.inf, {"tail_exponent": math.inf, "tail": "divergent"}
        return 0.0, 0.0, {"tail_exponent": -math.inf, "tail": "zero"}
    if h1 <= 0 or np.sign(h1) != np.sign(h2):
        return 0.0, 0.0, {"tail_exponent": math.nan, "tail": "unfitted"}
    a = math.log(h2 / h1) / math.log(s[i2] / s[i1])
    if a >= -1.0 - 1e-9:
        return math.inf, math.inf, {"tail_exponent": a, "tail": "divergent"}
    c = h2 / s[i2] ** a
    H = horizon
    b = a + 1.0
    t0 = -c * H**b / b
    t1 = c * H**b * (-math.log(H) / b + 1.0 / b**2)
    return t0, t1, {"tail_exponent": a, "tail": "power"}


def _suffix(samples, values, queries, mode):
    """``inf``/``sup`` of ``values`` over samples strictly greater than each query."""
    acc = np.minimum if mode == "min" else np.maximum
    suf = acc.accumulate(values[::-1])[::-1]
    fill = math.inf if mode == "min" else -math.inf
    suf = np.concatenate([suf, [fill]])
    j = np.searchsorted(samples, queries, side="right")
    return suf[j]


def _weighted(phi: Callable, e: float, s):
    """``phi(s) * s**e`` with 0 * inf = 0."""
    v = np.asarray(phi(s), dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = v * np.asarray(s, dtype=float) ** e
    return np.where(v == 0, 0.0, out)


# ---------------------------------------------------------------------------
# essential infimum / supremum of a tail


def _tail_extreme(phi: RadialProfile, e: float, t: float, horizon: float, mode: str,
                  per_decade: int = 40, zooms: int = 8) -> float:
    mono = phi.monotonicity
    if e > 0:
        mono = mono if mono == "nondecreasing" else "unknown"
    elif e < 0:
        mono = mono if mono == "nonincreasing" else "unknown"
    up = mono == "nondecreasing"
    down = mono == "nonincreasing"
    at_start = t * (1 + 1e-12)
    if (mode == "min" and up) or (mode == "max" and down):
        return float(_weighted(phi, e, np.array([at_start]))[0])
    if (mode == "min" and down) or (mode == "max" and up):
        return float(_weighted(phi, e, np.array([horizon]))[0])

    n = max(int(per_decade * math.log10(horizon / t)), 8) + 1
    bps = [b * f for b in phi.breakpoints if t < b < horizon for f in (1 - 1e-12, 1 + 1e-12)]
    tau = np.unique(np.concatenate([[at_start, horizon], np.geomspace(at_start, horizon, n), bps]))
    vals = _weighted(phi, e, tau)
    pick = np.argmin if mode == "min" else np.argmax
    best = float(vals[pick(vals)])
    if np.all(np.isinf(vals)):
        return best
    for _ in range(zooms):
        i = int(pick(vals))
        a, b = tau[max(i - 1, 0)], tau[min(i + 1, tau.size - 1)]
        if b <= a * (1 + 1e-13):
            break
        tau = np.geomspace(a, b, 41)
        vals = _weighted(phi, e, tau)
        cand = float(vals[pick(vals)])
        best = min(best, cand) if mode == "min" else max(best, cand)
    return best


def essinf_tail(phi: RadialProfile, weight_exponent: float, t: float, horizon: float = HORIZON,
                use_hint: bool = True) -> float:
    """``essinf_{t < tau < horizon} phi(tau) tau**weight_exponent``.

    Monotone hints short-cut to an endpoint; otherwise the inf is taken over a
    log grid refined around the minimiser.  +inf values never attain the
    inf unless the whole tail is +inf, in which case +inf is returned.
    """
    if not 0 < t < horizon:
        raise ValueError("need 0 < t < horizon")
    if not use_hint:
        phi = RadialProfile(phi.fn, "unknown", phi.allow_infinite, phi.allow_zero, phi.name, phi.breakpoints)
    return _tail_extreme(phi, weight_exponent, t, horizon, "min")


def esssup_tail(phi: RadialProfile, weight_exponent: float, t: float, horizon: float = HORIZON,
                use_hint: bool = True) -> float:
    """Supremum analogue of :func:`essinf_tail`."""
    if not 0 < t < horizon:
        raise ValueError("need 0 < t < horizon")
    if not use_hint:
        phi = RadialProfile(phi.fn, "unknown", phi.allow_infinite, phi.allow_zero, phi.name, phi.breakpoints)
    return _tail_extreme(phi, weight_exponent, t, horizon, "max")


# ---------------------------------------------------------------------------
# Hardy operators


def _fn_breaks(g):
    return tuple(getattr(g, "breakpoints", ()) or ())


def hardy_values(g: Callable, omega: RadialProfile, ts, log_weighted: bool = False,
                 horizon: float = HORIZON, per_decade: int = 20) -> tuple[np.ndarray, dict]:
    """``H_omega g(t) = int_t^inf (1 + ln(s/t))^[log] g(s) omega(s) ds`` for every t in ``ts``."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(~(ts > 0)):
        raise ValueError("t must be positive")
    lo = float(ts.min())
    hi = max(horizon, float(ts.max()) * 10)
    inside = ts < hi
    grid = _TailGrid(lo, hi, ts[inside], _fn_breaks(g) + tuple(omega.breakpoints), per_decade)
    gv = np.asarray(g(grid.nodes), dtype=float)
    gv = np.broadcast_to(gv, grid.nodes.shape)
    wv = np.asarray(omega(grid.nodes), dtype=float)
    with np.errstate(invalid="ignore"):
        h = np.where((gv == 0) | (wv == 0), 0.0, gv * wv)
    vals, info = grid.tail_integrals(h, ts[inside], log_weighted)
    out = np.zeros(ts.size)
    out[inside] = vals
    return out, info


def hardy_apply(g: Callable, omega: RadialProfile, t: float, log_weighted: bool = False,
                r_anchor: float | None = None, horizon: float = HORIZON) -> float:
    """Weighted Hardy operator at one point; raises on a divergent tail."""
    if log_weighted and r_anchor is not None and not math.isclose(r_anchor, t, rel_tol=1e-12):
        raise ValueError("the log-weighted operator is anchored at r_anchor = t")
    vals, info = hardy_values(g, omega, [t], log_weighted, horizon)
    v = float(vals[0])
    if math.isinf(v) or math.isnan(v):
        raise EvaluationError(f"Hardy tail integral diverges at t={t:g} ({info})")
    return v


@dataclass
class HardyReport:
    value: float
    argsup_t: float
    samples: list
    window: tuple
    diagnostics: dict = field(default_factory=dict)


def hardy_report(v1: RadialProfile, v2: RadialProfile, omega: RadialProfile, log_weighted: bool = False,
                 window=HARDY_WINDOW, per_decade: int = 25, horizon: float = HORIZON) -> HardyReport:
    """Grid-sup over ``window`` of ``v2(t) int_t^inf (1+ln(s/t))^[log] omega(s) ds / esssup_{s<tau} v1(tau)``."""
    lo, hi = window
    ts = np.geomspace(lo, hi, int(round(per_decade * math.log10(hi / lo))) + 1)
    horizon = max(horizon, 10 * hi)
    bps = tuple(v1.breakpoints) + tuple(v2.breakpoints) + tuple(omega.breakpoints)
    grid = _TailGrid(lo, horizon, ts, bps)
    smp = grid.samples()
    v1s = np.asarray(v1(smp), dtype=float)
    sup_v1 = _suffix(smp, v1s, grid.nodes, "max")
    wv = np.asarray(omega(grid.nodes), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(wv == 0, 0.0, wv / sup_v1)  # 1/inf = 0, 0 * inf = 0
    zero_sup = int(np.sum((sup_v1 == 0) & (wv > 0)))
    inner, info = grid.tail_integrals(h, ts, log_weighted)
    v2t = np.asarray(v2(ts), dtype=float)
    with np.errstate(invalid="ignore"):
        vals = np.where((v2t == 0) | (inner == 0), 0.0, v2t * inner)
    i = int(np.argmax(vals))
    diag = dict(info, divergent_nodes=int(np.isinf(inner).sum()), zero_esssup_nodes=zero_sup,
                log_weighted=bool(log_weighted))
    return HardyReport(float(vals[i]), float(ts[i]), list(zip(ts.tolist(), vals.tolist())), tuple(window), diag)


def hardy_best_constant(v1: RadialProfile, v2: RadialProfile, omega: RadialProfile, log_weighted: bool = False,
                        window=HARDY_WINDOW, **kw) -> float:
    """The best constant B of the weighted Hardy inequality on non-decreasing g (grid-sup)."""
    return hardy_report(v1, v2, omega, log_weighted, window, **kw).value


def hardy_ratio(g: Callable, v1: RadialProfile, v2: RadialProfile, omega: RadialProfile,
                log_weighted: bool = False, window=HARDY_WINDOW, per_decade: int = 25) -> float:
    """``grid-sup v2 H_omega g / grid-sup v1 g`` on the same window grid used by :func:`hardy_report`."""
    lo, hi = window
    ts = np.geomspace(lo, hi, int(round(per_decade * math.log10(hi / lo))) + 1)
    H, _ = hardy_values(g, omega, ts, log_weighted, max(HORIZON, 10 * hi))
    v2t, v1t = np.asarray(v2(ts), dtype=float), np.asarray(v1(ts), dtype=float)
    gt = np.broadcast_to(np.asarray(g(ts), dtype=float), ts.shape)
    with np.errstate(invalid="ignore"):
        num = np.max(np.where((v2t == 0) | (H == 0), 0.0, v2t * H))
        den = np.max(np.where((v1t == 0) | (gt == 0), 0.0, v1t * gt))
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / den)


class StepFunction:
    """Non-decreasing step function ``sum_i c_i chi_(a_i, inf)`` plus a constant."""

    def __init__(self, jumps, heights, base: float = 0.0):
        self.jumps = np.asarray(jumps, dtype=float)
        self.heights = np.asarray(heights, dtype=float)
        if np.any(self.heights < 0) or base < 0:
            raise ValueError("heights must be non-negative")
        self.base = float(base)
        self.breakpoints = tuple(self.jumps.tolist())

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.base + np.sum(self.heights * (s[..., None] > self.jumps), axis=-1)


# ---------------------------------------------------------------------------
# weight-pair conditions


class ConditionTag(str, enum.Enum):
    DOUB_E32 = "DOUB_E32"
    ZYG_E33X = "ZYG_E33X"
    SUP_E35 = "SUP_E35"
    SUP_E37 = "SUP_E37"
    SUP_317 = "SUP_317"
    LOG_37 = "LOG_37"
    LOG_317STAR = "LOG_317STAR"


_PARAMS = {
    ConditionTag.DOUB_E32: (),
    ConditionTag.ZYG_E33X: ("p",),
    ConditionTag.SUP_E35: (),
    ConditionTag.SUP_E37: ("p", "gamma"),
    ConditionTag.SUP_317: ("p", "s", "gamma"),
    ConditionTag.LOG_37: ("p1", "lam", "gamma"),
    ConditionTag.LOG_317STAR: ("p1", "s", "lam", "gamma"),
}
_PAIR_KINDS = {ConditionTag.SUP_E35, ConditionTag.SUP_E37, ConditionTag.SUP_317, ConditionTag.LOG_37,
               ConditionTag.LOG_317STAR}


@dataclass(frozen=True)
class ConditionKind:
    tag: ConditionTag
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        tag = ConditionTag(self.tag)
        object.__setattr__(self, "tag", tag)
        need = set(_PARAMS[tag])
        have = set(self.params)
        if need != have:
            raise ValueError(f"{tag.value} takes parameters {sorted(need)}, got {sorted(have)}")
        pr = {k: float(v) for k, v in self.params.items()}
        object.__setattr__(self, "params", pr)
        for key in ("p", "p1"):
            if key in pr and not pr[key] >= 1:
                raise ValueError(f"{key} must be >= 1")
        if "s" in pr and not pr["s"] > 1:
            raise ValueError("s must be > 1")
        if "gamma" in pr and not pr["gamma"] > 0:
            raise ValueError("gamma must be positive")
        if "lam" in pr and not 0 <= pr["lam"] < 1.0 / pr["gamma"]:
            raise ValueError("lam must lie in [0, 1/gamma)")

    @property
    def needs_pair(self) -> bool:
        return self.tag in _PAIR_KINDS

    def to_json(self) -> dict:
        return {"tag": self.tag.value, "params": dict(self.params)}


def condition_kind(tag, **params) -> ConditionKind:
    return ConditionKind(ConditionTag(tag), params)


class Verdict(str, enum.Enum):
    SATISFIED = "satisfied_on_window"
    VIOLATED = "violated_unbounded_trend"
    INCONCLUSIVE = "inconclusive"


@dataclass
class ConditionReport:
    kind: ConditionKind
    window: tuple
    c_samples: list
    c_sup: float
    growth_ratio: float
    verdict: Verdict
    extended_window: tuple = EXTENDED_WINDOW
    c_sup_extended: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind.to_json(), "window": list(self.window),
                "extended_window": list(self.extended_window), "c_sup": _js(self.c_sup),
                "c_sup_extended": _js(self.c_sup_extended), "growth_ratio": _js(self.growth_ratio),
                "verdict": self.verdict.value, "diagnostics": self.diagnostics,
                "c_samples": [[r, _js(c)] for r, c in self.c_samples]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "C_of_r"])
            for r, c in self.c_samples:
                w.writerow([f"{r:.17g}", f"{c:.17g}"])


def _js(v):
    # JSON has no inf; keep it readable
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _exponents(kind: ConditionKind):
    """``(weight exponent inside the essinf, power of t in the denominator, power of r on the right, log)``."""
    pr = kind.params
    tag = kind.tag
    if tag == ConditionTag.SUP_E37:
        e = pr["gamma"] / pr["p"]
        return e, e + 1.0, 0.0, False
    if tag == ConditionTag.SUP_317:
        e = pr["gamma"] / pr["p"]
        return e, e - pr["gamma"] / pr["s"] + 1.0, pr["gamma"] / pr["s"], False
    if tag == ConditionTag.LOG_37:
        e = pr["gamma"] / pr["p1"]
        return e, e + 1.0 - pr["gamma"] * pr["lam"], 0.0, True
    if tag == ConditionTag.LOG_317STAR:
        e = pr["gamma"] / pr["p1"]
        g_s = pr["gamma"] / pr["s"]
        return e, e - g_s + 1.0 - pr["gamma"] * pr["lam"], g_s, True
    raise AssertionError(tag)


def condition_profile(kind: ConditionKind, phi1: RadialProfile, phi2: RadialProfile | None, window,
                      per_decade: int = 25, horizon: float = HORIZON) -> tuple[np.ndarray, np.ndarray, dict]:
    """``C(r) = LHS(r) / RHS(r)`` on a log grid over ``window``.

    Nodes where the right-hand weight vanishes are dropped (reported in the
    diagnostics); ``LHS = inf`` gives ``C = inf``.
    """
    lo, hi = window
    if not 0 < lo < hi < horizon:
        raise ValueError("window must satisfy 0 < r_min < r_max < horizon")
    if kind.needs_pair and phi2 is None:
        raise ValueError(f"{kind.tag.value} needs a pair of profiles")
    rs = np.geomspace(lo, hi, int(round(per_decade * math.log10(hi / lo))) + 1)
    tag = kind.tag
    diag: dict = {}
    if tag == ConditionTag.DOUB_E32:
        fr = np.asarray(phi1(rs), dtype=float)
        th = np.linspace(1.0, 2.0, 33)
        ft = np.asarray(phi1(rs[:, None] * th[None, :]), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.maximum(ft / fr[:, None], fr[:, None] / ft)
        q = np.where(ft == fr[:, None], 1.0, q)  # inf/inf and 0/0 count as equal values
        return rs, np.max(q, axis=1), diag

    bps = tuple(phi1.breakpoints) + (tuple(phi2.breakpoints) if phi2 is not None else ())
    grid = _TailGrid(lo, horizon, rs, bps)
    s = grid.nodes
    if tag == ConditionTag.ZYG_E33X:
        p = kind.params["p"]
        h = _weighted(lambda x: np.asarray(phi1(x), dtype=float) ** p, -1.0, s)
        lhs, info = grid.tail_integrals(h, rs)
        rhs = np.asarray(phi1(rs), dtype=float) ** p
    elif tag == ConditionTag.SUP_E35:
        h = _weighted(phi1, -1.0, s)
        lhs, info = grid.tail_integrals(h, rs)
        rhs = np.asarray(phi2(rs), dtype=float)
    else:
        e, a, rpow, logw = _exponents(kind)
        smp = grid.samples()
        psi = _suffix(smp, _weighted(phi1, e, smp), s, "min")
        with np.errstate(invalid="ignore", over="ignore"):
            h = np.where(psi == 0, 0.0, psi * s ** (-a))
        lhs, info = grid.tail_integrals(h, rs, logw)
        rhs = _weighted(phi2, rpow, rs)
        diag["infinite_essinf_nodes"] = int(np.isinf(psi).sum())
    diag.update(info)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = lhs / rhs
    c = np.where(lhs == 0, 0.0, c)
    c = np.where(np.isinf(rhs) & np.isfinite(lhs), 0.0, c)
    bad = (rhs == 0) | (np.isinf(rhs) & np.isinf(lhs))
    diag["skipped_nodes"] = int(bad.sum())
    return rs[~bad], c[~bad], diag


def _verdict(growth: float) -> Verdict:
    if growth <= SATISFIED_GROWTH:
        return Verdict.SATISFIED
    if growth >= VIOLATED_GROWTH:
        return Verdict.VIOLATED
    return Verdict.INCONCLUSIVE


def check_condition(kind: ConditionKind, phi1: RadialProfile, phi2: RadialProfile | None = None,
                    base_window=BASE_WINDOW, extended_window=EXTENDED_WINDOW, per_decade: int = 25,
                    horizon: float = HORIZON) -> ConditionReport:
    """Sample C(r) on both windows and classify the trend.

    ``growth_ratio = c_sup(extended) / c_sup(base)``; an infinite extended
    sup counts as unbounded growth (ratio inf), a vanishing profile on both
    windows as no growth (ratio 1).
    """
    rb, cb, diag = condition_profile(kind, phi1, phi2, base_window, per_decade, horizon)
    re, ce, diag_e = condition_profile(kind, phi1, phi2, extended_window, per_decade, horizon)
    if cb.size == 0 or ce.size == 0:
        return ConditionReport(kind, tuple(base_window), [], math.nan, math.nan, Verdict.INCONCLUSIVE,
                               tuple(extended_window), math.nan, dict(diag, reason="all nodes skipped"))
    sup_b, sup_e = float(np.max(cb)), float(np.max(ce))
    if math.isinf(sup_e):
        growth = math.inf
    elif sup_b == 0:
        growth = 1.0 if sup_e == 0 else math.inf
    else:
        growth = sup_e / sup_b
    diag = dict(diag, argsup_r=float(rb[int(np.argmax(cb))]), extended_skipped_nodes=diag_e["skipped_nodes"])
    return ConditionReport(kind, tuple(base_window), list(zip(rb.tolist(), cb.tolist())), sup_b, growth,
                           _verdict(growth), tuple(extended_window), sup_e, diag)
