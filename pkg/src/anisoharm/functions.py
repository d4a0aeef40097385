"""Scalar fields on R^n and radial weight profiles on (0, inf).

Fields return values together with a list of *level* arrays: each level is
negative on one side of a discontinuity surface and positive on the other.
Quadrature uses the levels to locate jumps between sphere nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError
from .geometry import AnisotropySpec, Ellipsoid, rho

_SMOOTHNESS_ORDER = {"smooth": 0, "piecewise": 1, "indicator": 2}
GAUSS_CUTOFF = math.sqrt(14.0 * math.log(10.0))  # exp(-s^2) < 1e-14 beyond this


def _rougher(a: str, b: str) -> str:
    return a if _SMOOTHNESS_ORDER[a] >= _SMOOTHNESS_ORDER[b] else b


class ScalarField:
    """Base class.  ``support_radius`` is measured in rho about ``center``."""

    def __init__(self, spec: AnisotropySpec, center=None, support_radius: float = math.inf,
                 smoothness_hint: str = "smooth", name: str = "field"):
        if smoothness_hint not in _SMOOTHNESS_ORDER:
            raise ValueError(f"unknown smoothness hint {smoothness_hint!r}")
        self.spec = spec
        c = np.zeros(spec.n) if center is None else np.array(center, dtype=float).reshape(-1)
        if c.shape != (spec.n,):
            raise ValueError(f"center must have dimension {spec.n}")
        c.setflags(write=False)
        self.center = c
        if not support_radius > 0:
            raise ValueError("support_radius must be positive")
        self.support_radius = float(support_radius)
        self.smoothness_hint = smoothness_hint
        self.name = name

    # subclasses implement this
    def evaluate_full(self, y: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError

    def radial_breaks(self, x0) -> list[float]:
        """Radii about ``x0`` where the field jumps along every ray (concentric jumps)."""
        return []

    def shell_breaks(self, X) -> np.ndarray:
        """Per-point radii where shell integrals about each row of ``X`` may have kinks.

        Shape ``(M, B)``; unused entries are NaN.
        """
        return np.empty((np.atleast_2d(X).shape[0], 0))

    def __call__(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=float)
        vals, _ = self.evaluate_full(y)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError(f"{self.name}: non-finite field value")
        return float(vals) if np.ndim(vals) == 0 else vals

    @property
    def is_zero(self) -> bool:
        return False

    def support_about(self, x0) -> float:
        """A radius R with supp f inside E(x0, R), using the quasi-triangle inequality."""
        if not math.isfinite(self.support_radius):
            return math.inf
        d = rho(self.spec, np.asarray(x0, dtype=float) - self.center)
        if d == 0.0:
            return self.support_radius
        return self.spec.k_quasi * (d + self.support_radius)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return SumField(self, other)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return SumField(self, other, 1.0, -1.0)

    def __mul__(self, c: float) -> "ScalarField":
        if isinstance(c, ScalarField):
            return ProductField(self, c)
        return SumField(self, None, float(c), 0.0)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class RadialField(ScalarField):
    """``profile(rho(y - center))``, optionally cut off at ``rho < disc_radius``."""

    def __init__(self, spec, profile: Callable[[np.ndarray], np.ndarray], center=None,
                 disc_radius: float | None = None, support_radius: float = math.inf,
                 smoothness_hint="smooth", name="radial"):
        if disc_radius is not None:
            support_radius = min(support_radius, disc_radius)
        super().__init__(spec, center, support_radius, smoothness_hint, name)
        self.profile = profile
        self.disc_radius = disc_radius

    def evaluate_full(self, y):
        r = rho(self.spec, y - self.center)
        vals = np.asarray(self.profile(r), dtype=float)
        if self.disc_radius is None:
            return vals, []
        level = r - self.disc_radius
        return np.where(level < 0, vals, 0.0), [level]

    def radial_breaks(self, x0):
        """The cut-off radius (concentric case) or the extreme rho-distances
        from ``x0`` to the cut-off surface, where shell integrals have kinks."""
        if self.disc_radius is None:
            return []
        x0 = np.asarray(x0, dtype=float)
        if np.array_equal(x0, self.center):
            return [self.disc_radius]
        key = tuple(x0)
        if key not in self._break_cache:
            self._break_cache[key] = _boundary_extremes(self.spec, x0, self.center, self.disc_radius)
        return list(self._break_cache[key])

    def shell_breaks(self, X):
        """The shell through the centre plus the tangency radii of the cut-off surface."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = np.atleast_1d(rho(self.spec, X - self.center))
        if self.disc_radius is None:
            return d[:, None]
        lo, hi = _boundary_extremes_many(self.spec, X, self.center, self.disc_radius)
        return np.column_stack([d, lo, hi])

    @property
    def _break_cache(self):
        try:
            return self.__dict__["_bc"]
        except KeyError:
            self.__dict__["_bc"] = {}
            return self.__dict__["_bc"]


def _boundary_extremes(spec, x0, c, R):
    """Min and max of rho(x0 - y) over the surface rho(y - c) = R."""
    from scipy.optimize import minimize_scalar

    d = x0 - c
    if spec.n != 2:
        from .geometry import sphere_grid

        u = sphere_grid(spec.n).points
        v = rho(spec, d - R**spec.alpha_array * u)
        return [float(v.min()), float(v.max())]
    aR = R**spec.alpha_array

    def h(t):
        return rho(spec, d - aR * np.array([np.cos(t), np.sin(t)]))

    th = np.linspace(0.0, 2.0 * np.pi, 721)
    v = rho(spec, d - aR * np.column_stack([np.cos(th), np.sin(th)]))
    out = []
    for sgn, i in ((1.0, int(np.argmin(v))), (-1.0, int(np.argmax(v)))):
        step = th[1] - th[0]
        res = minimize_scalar(lambda t: sgn * h(t), bounds=(th[i] - step, th[i] + step), method="bounded",
                              options={"xatol": 1e-13})
        out.append(float(min(sgn * res.fun, v[i]) if sgn > 0 else max(-res.fun, v[i])))
    return out


def _boundary_extremes_many(spec, X, c, R, samples=256, iters=40):
    """Vectorised min/max of rho(x - y) over the surface rho(y - c) = R for each row x."""
    D = X - c
    aR = R**spec.alpha_array
    if spec.n != 2:
        from .geometry import sphere_grid

        # breakpoints only steer panel placement, so a coarse grid suffices here
        u = aR * sphere_grid(spec.n, (12, 24)).points
        lo, hi = np.empty(D.shape[0]), np.empty(D.shape[0])
        step = max(1, (1 << 21) // u.shape[0])
        for i in range(0, D.shape[0], step):
            v = rho(spec, D[i:i + step, None, :] - u[None, :, :])
            lo[i:i + step], hi[i:i + step] = v.min(axis=1), v.max(axis=1)
        return lo, hi

    def h(th):
        u = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return rho(spec, D[:, None, :] - aR * u)

    th = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    v = h(np.broadcast_to(th, (X.shape[0], samples)))
    out = []
    for pick in (np.argmin, np.argmax):
        t = th[pick(v, axis=1)]
        step = 2.0 * np.pi / samples
        best = v[np.arange(X.shape[0]), pick(v, axis=1)]
        for _ in range(iters):
            cand = t[:, None] + step * np.array([-1.0, -0.5, 0.5, 1.0])[None, :]
            vc = h(cand)
            j = pick(vc, axis=1)
            vj = vc[np.arange(X.shape[0]), j]
            better = vj < best if pick is np.argmin else vj > best
            t = np.where(better, cand[np.arange(X.shape[0]), j], t)
            best = np.where(better, vj, best)
            step *= 0.5
        out.append(best)
    return out[0], out[1]


class ConstantField(ScalarField):
    def __init__(self, spec, value: float = 0.0):
        super().__init__(spec, None, math.inf if value != 0 else 1e-300, "smooth",
                         f"constant({value:g})")
        self.value = float(value)

    def evaluate_full(self, y):
        return np.full(np.shape(y)[:-1], self.value), []

    @property
    def is_zero(self):
        return self.value == 0.0


class CoordinateField(ScalarField):
    def __init__(self, spec, index: int = 0, center=None):
        super().__init__(spec, center, math.inf, "smooth", f"coordinate({index})")
        if not 0 <= index < spec.n:
            raise ValueError("coordinate index out of range")
        self.index = index

    def evaluate_full(self, y):
        return y[..., self.index] - self.center[self.index], []


class SumField(ScalarField):
    """``ca * a + cb * b``; ``b`` may be None for a pure rescaling."""

    def __init__(self, a: ScalarField, b: ScalarField | None, ca: float = 1.0, cb: float = 1.0):
        spec = a.spec
        if b is None:
            support = a.support_radius if ca != 0 else 1e-300
            hint = a.smoothness_hint
            name = f"{ca:g}*{a.name}"
        else:
            if b.spec != spec:
                raise ValueError("cannot combine fields on different specs")
            support = max(a.support_radius, b.support_about(a.center))
            hint = _rougher(a.smoothness_hint, b.smoothness_hint)
            name = f"{ca:g}*{a.name}+{cb:g}*{b.name}"
        super().__init__(spec, a.center, support, hint, name)
        self.a, self.b, self.ca, self.cb = a, b, float(ca), float(cb)

    def evaluate_full(self, y):
        va, la = self.a.evaluate_full(y)
        if self.b is None:
            return self.ca * va, la
        vb, lb = self.b.evaluate_full(y)
        return self.ca * va + self.cb * vb, la + lb

    def radial_breaks(self, x0):
        out = list(self.a.radial_breaks(x0))
        if self.b is not None:
            out += self.b.radial_breaks(x0)
        return out

    def shell_breaks(self, X):
        if self.b is None:
            return self.a.shell_breaks(X)
        return np.column_stack([self.a.shell_breaks(X), self.b.shell_breaks(X)])

    @property
    def is_zero(self):
        za = self.a.is_zero or self.ca == 0
        zb = self.b is None or self.b.is_zero or self.cb == 0
        return za and zb


class ProductField(ScalarField):
    """Pointwise product ``a * b`` (used for b*f in commutator identities)."""

    def __init__(self, a: ScalarField, b: ScalarField):
        if a.spec != b.spec:
            raise ValueError("cannot combine fields on different specs")
        if math.isfinite(b.support_radius) and not math.isfinite(a.support_radius):
            a, b = b, a
        super().__init__(a.spec, a.center, a.support_radius,
                         _rougher(a.smoothness_hint, b.smoothness_hint), f"{a.name}*{b.name}")
        self.a, self.b = a, b

    def evaluate_full(self, y):
        va, la = self.a.evaluate_full(y)
        vb, lb = self.b.evaluate_full(y)
        return va * vb, la + lb

    def radial_breaks(self, x0):
        return self.a.radial_breaks(x0) + self.b.radial_breaks(x0)

    def shell_breaks(self, X):
        return np.column_stack([self.a.shell_breaks(X), self.b.shell_breaks(X)])

    @property
    def is_zero(self):
        return self.a.is_zero or self.b.is_zero


def _safe_log(r):
    return np.log(np.maximum(r, 1e-300))


def builtin_field(spec: AnisotropySpec, name: str, **params) -> ScalarField:
    """Catalog of test fields.

    ``indicator-ellipsoid`` (center, r), ``gauss-rho`` (center, scale,
    amplitude), ``power-rho-truncated`` (a, R, center), ``log-rho`` (center),
    ``power-campanato`` (lam, center), ``constant`` (value), ``zero`` and
    ``coordinate`` (index).
    """
    center = params.pop("center", None)
    if name == "indicator-ellipsoid":
        r = float(params.pop("r", 1.0))
        _no_extra(name, params)
        return RadialField(spec, lambda t: np.ones_like(t), center, disc_radius=r,
                           smoothness_hint="indicator", name=f"indicator(r={r:g})")
    if name == "gauss-rho":
        scale = float(params.pop("scale", 1.0))
        amp = float(params.pop("amplitude", 1.0))
        _no_extra(name, params)
        if scale <= 0:
            raise ValueError("scale must be positive")
        return RadialField(spec, lambda t: amp * np.exp(-(t / scale) ** 2), center,
                           support_radius=scale * GAUSS_CUTOFF, name=f"gauss(s={scale:g})")
    if name == "power-rho-truncated":
        a = float(params.pop("a", 1.0))
        R = float(params.pop("R", 1.0))
        _no_extra(name, params)
        if a <= -spec.gamma:
            raise ValueError("exponent must exceed -gamma for local integrability")
        return RadialField(spec, lambda t: np.maximum(t, 1e-300) ** a, center, disc_radius=R,
                           smoothness_hint="piecewise", name=f"power(a={a:g},R={R:g})")
    if name == "log-rho":
        _no_extra(name, params)
        return RadialField(spec, _safe_log, center, name="log-rho")
    if name == "power-campanato":
        lam = float(params.pop("lam", 0.0))
        _no_extra(name, params)
        if not 0 <= lam < 1.0 / spec.gamma:
            raise ValueError("lam must lie in [0, 1/gamma)")
        e = spec.gamma * lam
        return RadialField(spec, lambda t: t**e, center, name=f"power-campanato(lam={lam:g})")
    if name == "constant":
        value = float(params.pop("value", 1.0))
        _no_extra(name, params)
        return ConstantField(spec, value)
    if name == "zero":
        _no_extra(name, params)
        return ConstantField(spec, 0.0)
    if name == "coordinate":
        index = int(params.pop("index", 0))
        _no_extra(name, params)
        return CoordinateField(spec, index, center)
    raise ValueError(f"unknown field {name!r}")


def _no_extra(name, params):
    if params:
        raise ValueError(f"unexpected parameters for {name}: {sorted(params)}")


# ---------------------------------------------------------------------------
# radial profiles

_MONO = ("nondecreasing", "nonincreasing", "unknown")
_FLIP = {"nondecreasing": "nonincreasing", "nonincreasing": "nondecreasing", "unknown": "unknown"}


@dataclass(frozen=True)
class RadialProfile:
    """A weight on (0, inf) with values in [0, inf].

    ``allow_infinite`` / ``allow_zero`` declare the extended values the
    profile may take; positivity is the default contract.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    monotonicity: str = "unknown"
    allow_infinite: bool = False
    allow_zero: bool = False
    name: str = "profile"
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.monotonicity not in _MONO:
            raise ValueError(f"unknown monotonicity {self.monotonicity!r}")

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(~(r_arr > 0)):
            raise ValueError("profiles are defined on (0, inf)")
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = np.asarray(self.fn(r_arr), dtype=float)
        v = np.broadcast_to(v, r_arr.shape)
        if np.isnan(v).any():
            raise EvaluationError(f"{self.name}: NaN profile value")
        if not self.allow_infinite and np.isinf(v).any():
            raise EvaluationError(f"{self.name}: infinite value but profile does not allow it")
        if np.any(v < 0) or (not self.allow_zero and np.any(v == 0)):
            raise EvaluationError(f"{self.name}: profile must be positive")
        return float(v) if v.ndim == 0 else np.array(v)

    def reciprocal(self) -> "RadialProfile":
        """``1/phi`` with the conventions 1/inf = 0 and 1/0 = inf."""
        fn = self.fn

        def inv(r):
            with np.errstate(divide="ignore"):
                return 1.0 / np.asarray(fn(r), dtype=float)

        return RadialProfile(inv, _FLIP[self.monotonicity], self.allow_zero, self.allow_infinite,
                             f"1/{self.name}", self.breakpoints)

    def times_power(self, e: float) -> "RadialProfile":
        """``phi(r) * r**e`` with 0 * inf = 0."""
        fn = self.fn

        def prod(r):
            v = np.asarray(fn(r), dtype=float)
            with np.errstate(invalid="ignore"):
                out = v * r**e
            return np.where(v == 0, 0.0, out)

        mono = self.monotonicity
        if e > 0 and mono != "nondecreasing":
            mono = "unknown"
        elif e < 0 and mono != "nonincreasing":
            mono = "unknown"
        return RadialProfile(prod, mono, self.allow_infinite, self.allow_zero, f"{self.name}*r^{e:g}",
                             self.breakpoints)

    def scaled(self, c: float) -> "RadialProfile":
        if not c > 0:
            raise ValueError("scale must be positive")
        fn = self.fn
        return RadialProfile(lambda r: c * np.asarray(fn(r), dtype=float), self.monotonicity,
                             self.allow_infinite, self.allow_zero, f"{c:g}*{self.name}", self.breakpoints)

    def check_monotonicity(self, lo=1e-3, hi=1e3, nodes=400) -> bool:
        """Spot-check the monotonicity hint on a log grid."""
        if self.monotonicity == "unknown":
            return True
        v = self(np.geomspace(lo, hi, nodes))
        with np.errstate(invalid="ignore"):
            d = np.diff(v)
        finite = np.isfinite(d)
        if self.monotonicity == "nondecreasing":
            return bool(np.all(d[finite] >= -1e-12 * np.abs(v[1:][finite]))) and _inf_ok(v, True)
        return bool(np.all(d[finite] <= 1e-12 * np.abs(v[:-1][finite]))) and _inf_ok(v, False)


def _inf_ok(v, increasing):
    inf = np.isinf(v)
    if not inf.any():
        return True
    idx = np.flatnonzero(inf)
    # infinite values must form a tail (increasing) or a head (decreasing)
    return bool(idx[-1] == len(v) - 1 and np.all(inf[idx[0]:])) if increasing else bool(
        idx[0] == 0 and np.all(inf[: idx[-1] + 1]))


def builtin_profile(name: str, **params) -> RadialProfile:
    """Catalog of weights.

    ``power`` (a, lo, hi, c): c * r**a on (lo, hi) and 0 elsewhere;
    ``morrey`` (lam, p, gamma): r**((lam - gamma)/p);
    ``remark-phi1`` (gamma, p, beta): r**(beta - gamma/p) for r > 1, +inf for r <= 1;
    ``remark-phi2`` (gamma, p, beta): r**(-gamma/p) * (1 + r**beta);
    ``constant`` (value).
    """
    p = dict(params)
    if name == "power":
        a = float(p.pop("a", 0.0))
        lo = float(p.pop("lo", 0.0))
        hi = float(p.pop("hi", math.inf))
        c = float(p.pop("c", 1.0))
        _no_extra(name, p)
        if not (0 <= lo < hi) or c <= 0:
            raise ValueError("power profile needs 0 <= lo < hi and c > 0")
        truncated = lo > 0 or math.isfinite(hi)

        def fn(r):
            v = c * r**a
            return np.where((r > lo) & (r < hi), v, 0.0) if truncated else v

        if a > 0:
            mono = "unknown" if math.isfinite(hi) else "nondecreasing"
        elif a < 0:
            mono = "unknown" if lo > 0 else "nonincreasing"
        else:
            if lo > 0 and math.isfinite(hi):
                mono = "unknown"
            elif lo > 0:
                mono = "nondecreasing"
            else:
                mono = "nonincreasing"
        bps = tuple(b for b in (lo, hi) if 0 < b < math.inf)
        return RadialProfile(fn, mono, False, truncated, f"power(a={a:g},lo={lo:g},hi={hi:g})", bps)
    if name == "constant":
        value = float(p.pop("value", 1.0))
        _no_extra(name, p)
        if value <= 0:
            raise ValueError("constant profile must be positive")
        return RadialProfile(lambda r: np.full(np.shape(r), value), "nonincreasing", name=f"constant({value:g})")
    if name == "morrey":
        lam, pp, gamma = float(p.pop("lam")), float(p.pop("p")), float(p.pop("gamma"))
        _no_extra(name, p)
        if pp < 1 or not 0 <= lam <= gamma:
            raise ValueError("morrey profile needs p >= 1 and 0 <= lam <= gamma")
        e = (lam - gamma) / pp
        mono = "nonincreasing" if e <= 0 else "nondecreasing"
        return RadialProfile(lambda r: r**e, mono, name=f"morrey(lam={lam:g},p={pp:g})")
    if name in ("remark-phi1", "remark-phi2"):
        gamma, pp, beta = float(p.pop("gamma")), float(p.pop("p")), float(p.pop("beta"))
        _no_extra(name, p)
        if pp < 1 or gamma <= 0:
            raise ValueError("need p >= 1 and gamma > 0")
        if not 0 < beta < gamma / pp:
            raise ValueError(f"beta must lie in (0, gamma/p) = (0, {gamma / pp:g})")
        if name == "remark-phi1":
            e = beta - gamma / pp
            return RadialProfile(lambda r: np.where(r > 1.0, r**e, np.inf), "nonincreasing",
                                 allow_infinite=True, name="remark-phi1", breakpoints=(1.0,))
        return RadialProfile(lambda r: r ** (-gamma / pp) * (1.0 + r**beta), "nonincreasing",
                             name="remark-phi2")
    raise ValueError(f"unknown profile {name!r}")


def mean_on_ellipsoid(f: ScalarField, E: Ellipsoid, **quad) -> float:
    """Average of ``f`` over ``E`` by polar quadrature about the centre of ``E``."""
    from .quadrature import ball_integrals

    total, vol = ball_integrals(f.spec, lambda y: f.evaluate_full(y), E.center, [E.radius],
                                breaks=f.radial_breaks(E.center), **quad)
    return float(total[0] / vol[0])
