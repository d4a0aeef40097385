"""Anisotropic dilations, the quasi-distance rho and ellipsoid geometry.

The dilation group is ``A_t = diag(t**alpha_1, ..., t**alpha_n)`` with
``1 <= alpha_1 <= ... <= alpha_n``.  For ``x != 0`` the quasi-norm ``rho(x)``
is the unique ``t > 0`` with

    F(x, t) = sum_i x_i**2 / t**(2 * alpha_i) = 1,

so that ``x = A_rho(x) x'`` with ``x'`` on the Euclidean unit sphere.  In these
polar coordinates ``dx = rho**(gamma - 1) J(x') drho dsigma(x')`` where
``J(x') = sum_i alpha_i x_i'**2`` and ``gamma = sum_i alpha_i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import DomainError

_SPEC_PRESETS = {
    "p0-2d": (1.0, 2.0),
    "p0-3d": (1.0, 1.0, 2.0),
    "iso-2d": (1.0, 1.0),
    "iso-3d": (1.0, 1.0, 1.0),
}


@dataclass(frozen=True)
class AnisotropySpec:
    """Exponent vector of a diagonal dilation group.

    ``k_quasi`` is the quasi-triangle constant used wherever the theory
    needs ``2k``-enlarged ellipsoids.  When it is not supplied it is
    estimated by sampling (see :func:`estimate_k`) and inflated by 5%.
    """

    alpha: tuple[float, ...]
    k: float | None = None
    _k_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if len(alpha) < 2:
            raise ValueError("dimension must be at least 2")
        if any(not math.isfinite(a) or a < 1.0 for a in alpha):
            raise ValueError(f"every exponent must be finite and >= 1, got {alpha}")
        if any(b < a for a, b in zip(alpha, alpha[1:])):
            raise ValueError(f"exponents must be nondecreasing, got {alpha}")
        if self.k is not None and not (self.k >= 1.0):
            raise ValueError(f"quasi-triangle constant must be >= 1, got {self.k}")

    @property
    def n(self) -> int:
        return len(self.alpha)

    @cached_property
    def alpha_array(self) -> np.ndarray:
        arr = np.asarray(self.alpha, dtype=float)
        arr.setflags(write=False)
        return arr

    @property
    def gamma(self) -> float:
        """Homogeneous dimension, the trace of the dilation generator."""
        return float(sum(self.alpha))

    @property
    def k_quasi(self) -> float:
        if self.k is not None:
            return float(self.k)
        if "k" not in self._k_cache:
            self._k_cache["k"] = 1.05 * estimate_k(self, trials=20_000, seed=0)
        return self._k_cache["k"]

    @property
    def is_isotropic(self) -> bool:
        return all(a == self.alpha[0] for a in self.alpha)

    @classmethod
    def preset(cls, name: str) -> "AnisotropySpec":
        try:
            return cls(_SPEC_PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown spec preset {name!r}; known: {sorted(_SPEC_PRESETS)}") from None

    @classmethod
    def from_json(cls, obj) -> "AnisotropySpec":
        """Build from ``{"alpha": [...], "k": optional}``, a JSON string, or a preset name."""
        if isinstance(obj, str):
            if obj in _SPEC_PRESETS:
                return cls.preset(obj)
            obj = json.loads(obj)
        if "alpha" not in obj:
            raise ValueError("spec object needs an 'alpha' list")
        return cls(tuple(obj["alpha"]), obj.get("k"))

    def to_json(self) -> dict:
        out = {"alpha": list(self.alpha)}
        if self.k is not None:
            out["k"] = self.k
        return out


@dataclass(frozen=True)
class Ellipsoid:
    """The rho-ball ``E(center, radius) = {y : rho(center - y) < radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"ellipsoid radius must be positive and finite, got {self.radius}")

    def contains(self, spec: AnisotropySpec, y) -> np.ndarray:
        return rho(spec, self.center - np.asarray(y, dtype=float)) < self.radius

    def volume(self, spec: AnisotropySpec) -> float:
        return unit_volume(spec) * self.radius ** spec.gamma


# ---------------------------------------------------------------------------
# quasi-norm


@njit(cache=True, nogil=True)
def _rho_kernel(x, alpha, out, allow_closed):
    # Newton on g(u) = log F(x, e^u): convex and decreasing in u, so Newton
    # started left of the root climbs monotonically.  The bracket
    # [log m, log m + log(n) / (2 alpha_1)] with m = max |x_i|^(1/alpha_i)
    # always contains the root and guards against round-off.
    npts, n = x.shape
    closed = allow_closed and n == 2 and alpha[1] == 2.0 * alpha[0]
    half_log_n = 0.5 * math.log(n) / alpha[0]
    for i in range(npts):
        big = max(abs(x[i, 0]), abs(x[i, 1])) if closed else 0.0
        if 1e-100 < big < 1e100:
            # u = t^(2 alpha_1) solves u^2 - x1^2 u - x2^2 = 0
            a2 = x[i, 0] * x[i, 0]
            u = 0.5 * (a2 + math.hypot(a2, 2.0 * x[i, 1]))
            out[i] = u ** (0.5 / alpha[0]) if u > 0.0 else 0.0
            continue
        logm = -np.inf
        for j in range(n):
            a = abs(x[i, j])
            if a > 0.0:
                v = math.log(a) / alpha[j]
                if v > logm:
                    logm = v
        if logm == -np.inf:
            out[i] = 0.0
            continue
        lo = logm
        hi = logm + half_log_n
        u = lo
        for _ in range(100):
            fval = 0.0
            dval = 0.0
            for j in range(n):
                a = abs(x[i, j])
                if a > 0.0:
                    term = math.exp(2.0 * (math.log(a) - alpha[j] * u))
                    fval += term
                    dval -= 2.0 * alpha[j] * term
            g = math.log(fval)
            if g > 0.0:
                lo = u
            elif g < 0.0:
                hi = u
            else:
                break
            step = -g * fval / dval
            unew = u + step
            if not (lo <= unew <= hi):
                unew = 0.5 * (lo + hi)
            if abs(unew - u) <= 4e-16 * max(1.0, abs(u)):
                u = unew
                break
            u = unew
        out[i] = math.exp(u)


def rho(spec: AnisotropySpec, x, solver: str = "auto") -> np.ndarray | float:
    """Quasi-norm of ``x`` (shape ``(..., n)``); scalar in, scalar out.

    Solves ``F(x, t) = 1`` to round-off (well inside 1e-12 relative).  With
    ``solver="auto"`` the planar case ``alpha_2 = 2 alpha_1`` uses the root of
    the quadratic in ``t^(2 alpha_1)``; ``solver="newton"`` always root-finds.
    """
    if solver not in ("auto", "newton"):
        raise ValueError(f"unknown solver {solver!r}")
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (spec.n,):
        raise ValueError(f"expected trailing dimension {spec.n}, got shape {arr.shape}")
    flat = np.ascontiguousarray(arr.reshape(-1, spec.n))
    if not np.isfinite(flat).all():
        raise ValueError("rho: coordinates must be finite")
    out = np.empty(flat.shape[0])
    _rho_kernel(flat, spec.alpha_array, out, solver == "auto")
    out = out.reshape(arr.shape[:-1])
    return float(out) if out.ndim == 0 else out


def rho_paper_p0(x) -> np.ndarray | float:
    """The closed form printed for the standard parabolic case diag[1,...,1,2].

    ``sqrt((|x'|^2 + sqrt(|x'|^4 + x_n^2)) / 2)`` with ``x = (x', x_n)``.  It
    solves ``|x'|^2/t^2 + (x_n/2)^2/t^4 = 1`` and is therefore only an
    equivalent quasi-norm to :func:`rho`, never a substitute for it.
    """
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] < 2:
        raise ValueError("rho_paper_p0 needs dimension >= 2")
    if not np.isfinite(arr).all():
        raise ValueError("rho_paper_p0: coordinates must be finite")
    s = np.sum(arr[..., :-1] ** 2, axis=-1)
    out = np.sqrt((s + np.sqrt(s * s + arr[..., -1] ** 2)) / 2.0)
    return float(out) if np.ndim(out) == 0 else out


def dilate(spec: AnisotropySpec, t, x) -> np.ndarray:
    """Apply ``A_t``; ``t`` may be an array broadcasting against ``x[..., 0]``."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("dilation parameter must be positive")
    x = np.asarray(x, dtype=float)
    return x * t[..., None] ** spec.alpha_array


def polar_decompose(spec: AnisotropySpec, x):
    """Return ``(rho(x), A_{1/rho(x)} x)``; the direction lies on S^{n-1}."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(rho(spec, x))
    if np.any(r == 0):
        raise DomainError("polar_decompose: x = 0 has no direction")
    xprime = x / r[..., None] ** spec.alpha_array
    return (float(r) if r.ndim == 0 else r), xprime


def polar_compose(spec: AnisotropySpec, r, xprime) -> np.ndarray:
    return dilate(spec, r, xprime)


def jacobian_J(spec: AnisotropySpec, xprime) -> np.ndarray | float:
    """Polar Jacobian factor ``sum_i alpha_i x_i'^2``, valued in [alpha_1, alpha_n]."""
    xp = np.asarray(xprime, dtype=float)
    norm2 = np.sum(xp * xp, axis=-1)
    if np.any(np.abs(norm2 - 1.0) > 2e-12):
        raise ValueError("jacobian_J expects unit vectors")
    out = np.sum(spec.alpha_array * xp * xp, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# sphere quadrature


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature nodes on S^{n-1} against the (unnormalised) surface measure.

    In two dimensions the circle is cut into ``cells`` equal arcs starting at
    angle 0, each carrying a 4-point Gauss-Legendre rule; ``angles`` holds the
    node parameters so callers can re-integrate individual cells.  Cell edges
    include the coordinate axes, where piecewise kernels jump.
    """

    points: np.ndarray
    weights: np.ndarray
    angles: np.ndarray | None = None
    cells: int = 0

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def per_cell(self) -> int:
        return self.size // self.cells if self.cells else 0

    @property
    def cell_width(self) -> float:
        return 2.0 * np.pi / self.cells if self.cells else 0.0


_GRID_CACHE: dict = {}
CIRCLE_RULE = 4


def sphere_grid(n: int, nodes: int | tuple[int, int] | None = None) -> SphereGrid:
    """Composite Gauss-Legendre on the circle for n = 2 (default 512 nodes);
    Gauss-Legendre(cos polar) x uniform azimuth for n = 3 (default 64 x 128)."""
    key = (n, nodes)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    if n == 2:
        N = 512 if nodes is None else int(nodes)
        if N < 16 or N % (4 * CIRCLE_RULE):
            raise ValueError("circle node count must be a positive multiple of 16")
        cells = N // CIRCLE_RULE
        H = 2.0 * np.pi / cells
        gx, gw = np.polynomial.legendre.leggauss(CIRCLE_RULE)
        theta = (np.arange(cells)[:, None] + 0.5 * (gx[None, :] + 1.0)) * H
        theta = theta.ravel()
        w = np.tile(0.5 * gw * H, cells)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        grid = SphereGrid(pts, w, theta, cells)
    elif n == 3:
        if nodes is None:
            n_pol, n_az = 64, 128
        elif isinstance(nodes, tuple):
            n_pol, n_az = nodes
        else:
            n_pol, n_az = max(4, int(nodes) // 2), int(nodes)
        z, wz = np.polynomial.legendre.leggauss(n_pol)
        phi = 2.0 * np.pi * np.arange(n_az) / n_az
        Z, PHI = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - Z * Z)
        pts = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), Z.ravel()])
        w = (wz[:, None] * np.full(n_az, 2.0 * np.pi / n_az)[None, :]).ravel()
        grid = SphereGrid(pts, w)
    else:
        raise NotImplementedError("sphere quadrature is provided for n = 2 and n = 3")
    for arr in (grid.points, grid.weights):
        arr.setflags(write=False)
    _GRID_CACHE[key] = grid
    return grid


def unit_volume(spec: AnisotropySpec, nodes=None) -> float:
    """Volume of E(0, 1): ``(1/gamma) * integral of J over the sphere``."""
    grid = sphere_grid(spec.n, nodes)
    J = np.sum(spec.alpha_array * grid.points**2, axis=-1)
    return float(np.dot(grid.weights, J) / spec.gamma)


def monte_carlo_volume(spec: AnisotropySpec, r: float, samples: int = 1_000_000, seed: int = 0) -> float:
    """Hit-or-miss estimate of |E(0, r)| inside its bounding box.

    ``|y_i| <= r**alpha_i`` on E(0, r) because the polar direction is a unit vector.
    """
    rng = np.random.default_rng(seed)
    half = r ** spec.alpha_array
    pts = rng.uniform(-1.0, 1.0, size=(samples, spec.n)) * half
    inside = rho(spec, pts) < r
    return float(np.prod(2.0 * half) * inside.mean())


def estimate_k(spec: AnisotropySpec, trials: int = 100_000, seed: int = 42) -> float:
    """Largest sampled ``rho(x - y) / (rho(x - z) + rho(y - z))``.

    Points are dilated unit-ball samples at log-uniform scales in [1e-2, 1e2]
    so that both the isotropic and the stretched regimes are probed.  The
    degenerate triple ``z = y`` (ratio exactly 1) is always included.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)

    def sample():
        u = rng.normal(size=(trials, spec.n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u *= rng.uniform(0.0, 1.0, size=(trials, 1)) ** (1.0 / spec.n)
        t = 10.0 ** rng.uniform(-2.0, 2.0, size=trials)
        return dilate(spec, t, u)

    x, y, z = sample(), sample(), sample()
    num = rho(spec, x - y)
    den = rho(spec, x - z) + rho(spec, y - z)
    ok = den > 0
    best = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0
    return max(1.0, best)
