"""Rough kernels: degree-zero homogeneous functions given by their values on S^{n-1}."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DomainError, EvaluationError
from .geometry import AnisotropySpec, polar_decompose, sphere_grid

CANCELLATION_TOL = 1e-12


def _sign(v):
    return np.where(np.abs(v) < 1e-12, 0.0, np.sign(v))


# sphere functions in terms of the coordinates u = (u_1, ..., u_n) of a unit vector
_CATALOG: dict[str, tuple[Callable, str]] = {
    "const": (lambda u: np.ones(u.shape[:-1]), "constant 1"),
    "cos1": (lambda u: u[..., 0], "u_1"),
    "sin1": (lambda u: u[..., 1], "u_2"),
    "cos2": (lambda u: u[..., 0] ** 2, "u_1^2"),
    "sin2": (lambda u: u[..., 1] ** 2, "u_2^2"),
    "cos3": (lambda u: u[..., 0] ** 3, "u_1^3"),
    "cos2theta": (lambda u: u[..., 0] ** 2 - u[..., 1] ** 2, "u_1^2 - u_2^2"),
    "x1x2": (lambda u: u[..., 0] * u[..., 1], "u_1 u_2"),
    "sign2": (lambda u: _sign(u[..., 0]), "sign(u_1)"),
    "sign4": (lambda u: _sign(u[..., 0] * u[..., 1]), "sign(u_1 u_2)"),
}
KERNEL_IDS = tuple(_CATALOG)


class RoughKernel:
    """``Omega(x) = sphere_fn(A_{1/rho(x)} x)``.

    The J-weighted mean ``int Omega J dsigma`` is computed once at
    construction; ``cancellation_checked`` records whether it vanishes to
    within 1e-12.
    """

    def __init__(self, spec: AnisotropySpec, sphere_fn: Callable[[np.ndarray], np.ndarray],
                 s_exponent: float = math.inf, name: str = "kernel", sphere_nodes=None):
        if not s_exponent > 1:
            raise ValueError("s_exponent must lie in (1, inf]")
        self.spec = spec
        self.sphere_fn = sphere_fn
        self.s_exponent = float(s_exponent)
        self.name = name
        self._grid = sphere_grid(spec.n, sphere_nodes)
        vals = self.on_sphere(self._grid.points)
        J = np.sum(spec.alpha_array * self._grid.points**2, axis=-1)
        self.residual = float(np.dot(self._grid.weights, vals * J))
        self.j_total = float(np.dot(self._grid.weights, J))
        self.cancellation_checked = abs(self.residual) <= CANCELLATION_TOL

    def on_sphere(self, u) -> np.ndarray:
        v = np.asarray(self.sphere_fn(np.asarray(u, dtype=float)), dtype=float)
        v = np.broadcast_to(v, np.shape(u)[:-1])
        if not np.isfinite(v).all():
            raise EvaluationError(f"{self.name}: non-finite kernel value")
        return v

    def evaluate(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        try:
            _, u = polar_decompose(self.spec, x)
        except DomainError:
            raise DomainError(f"{self.name}: kernel is undefined at x = 0") from None
        out = self.on_sphere(u)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def weight(self, u) -> np.ndarray:
        """``Omega(u) J(u)``: the sphere weight used by singular integrals."""
        return self.on_sphere(u) * np.sum(self.spec.alpha_array * np.asarray(u) ** 2, axis=-1)

    def abs_weight(self, u) -> np.ndarray:
        return np.abs(self.on_sphere(u)) * np.sum(self.spec.alpha_array * np.asarray(u) ** 2, axis=-1)

    def abs_kernel(self) -> "RoughKernel":
        fn = self.sphere_fn
        return RoughKernel(self.spec, lambda u: np.abs(fn(u)), self.s_exponent, f"|{self.name}|")

    def __repr__(self):
        return f"<RoughKernel {self.name} residual={self.residual:.3g}>"


def cancellation_residual(kernel: RoughKernel) -> float:
    return kernel.residual


def project_to_cancellation(kernel: RoughKernel) -> RoughKernel:
    """Subtract the J-weighted mean so that ``int Omega J dsigma = 0``."""
    if kernel.cancellation_checked and abs(kernel.residual) <= 1e-14:
        return kernel
    shift = kernel.residual / kernel.j_total
    fn = kernel.sphere_fn
    name = kernel.name if kernel.name.endswith("-projected") else f"{kernel.name}-projected"
    return RoughKernel(kernel.spec, lambda u: np.asarray(fn(u), dtype=float) - shift,
                       kernel.s_exponent, name)


def sphere_s_norm(kernel: RoughKernel, s: float) -> float:
    """``(int |Omega|^s dsigma)^(1/s)``; for ``s = inf`` the maximum over the grid nodes."""
    if not s > 1:
        raise ValueError("s must lie in (1, inf]")
    grid = kernel._grid
    v = np.abs(kernel.on_sphere(grid.points))
    if math.isinf(s):
        return float(v.max())
    return float(np.dot(grid.weights, v**s) ** (1.0 / s))


def sphere_measure(spec: AnisotropySpec) -> float:
    return float(sphere_grid(spec.n).weights.sum())


def builtin_kernel(spec: AnisotropySpec, kernel_id: str, s_exponent: float | None = None) -> RoughKernel:
    """Catalog lookup; a ``-projected`` suffix applies :func:`project_to_cancellation`."""
    base, projected = kernel_id, False
    if kernel_id.endswith("-projected"):
        base, projected = kernel_id[: -len("-projected")], True
    if base not in _CATALOG:
        raise ValueError(f"unknown kernel {kernel_id!r}; known: {', '.join(KERNEL_IDS)}")
    fn, _ = _CATALOG[base]
    if spec.n < 2:
        raise ValueError("kernels need n >= 2")
    k = RoughKernel(spec, fn, math.inf if s_exponent is None else s_exponent, base)
    return project_to_cancellation(k) if projected else k
