"""Smooth functionals of finitely many path values, and a named catalog.

A cylindrical functional is F = f(X_{t_{i_1}}, ..., X_{t_{i_k}}) with smooth
f; its Malliavin derivative is the energy-space element

    DF = sum_i (d_i f)(X) * k_{t_i},

i.e. gradient components placed at the representer indices.  Integral
functionals F = int_0^T g(s, X_s) ds reduce to cylindrical ones by
trapezoid quadrature over the grid (the pinned node at time 0 contributes a
constant).

Every catalog entry has a *diagonal* gradient: component i depends on x_i
alone.  That structure is what makes predictable projections cheap (each
conditional expectation is one-dimensional), so the catalog records the
per-coordinate maps and their derivatives explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .models import TimeGrid

__all__ = [
    "CylindricalFunctional",
    "IntegralFunctional",
    "discretize_integral_functional",
    "gradient_check",
    "catalog_names",
    "make_functional",
]


@dataclass(frozen=True)
class CylindricalFunctional:
    """f over the path values at ``indices`` (0-based grid positions).

    ``f`` maps (..., k) -> (...); ``grad`` maps (..., k) -> (..., k).
    When the gradient is diagonal, ``diag[i]`` is the scalar map with
    (d_i f)(x) = diag[i](x_i) and ``diag_deriv[i]`` its derivative; both are
    None for genuinely coupled gradients.  Separable functionals
    additionally record f(x) = f_const + sum_i diag_terms[i](x_i), which is
    what makes exact conditional means of F itself cheap.
    """

    name: str
    indices: tuple[int, ...]
    f: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    diag: tuple[Callable, ...] | None = None
    diag_deriv: tuple[Callable, ...] | None = None
    diag_terms: tuple[Callable, ...] | None = None
    f_const: float = 0.0

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("functional needs at least one grid index")
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("indices must be strictly increasing")
        for maps in (self.diag, self.diag_deriv, self.diag_terms):
            if maps is not None and len(maps) != len(self.indices):
                raise ValueError("per-coordinate maps must match the index count")

    @property
    def k(self) -> int:
        return len(self.indices)

    def values(self, paths: np.ndarray) -> np.ndarray:
        """F per row of an (m, N) path matrix (or a single (N,) path)."""
        x = np.asarray(paths, dtype=float)[..., list(self.indices)]
        return np.asarray(self.f(x), dtype=float)

    def gradient(self, paths: np.ndarray) -> np.ndarray:
        """(d_1 f, ..., d_k f) at the selected coordinates, shape (..., k)."""
        x = np.asarray(paths, dtype=float)[..., list(self.indices)]
        return np.asarray(self.grad(x), dtype=float)


@dataclass(frozen=True)
class IntegralFunctional:
    """F = int_0^T g(s, X_s) ds with smooth integrand g.

    dx_g and dxx_g are the first and second partials in the space argument.
    """

    name: str
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dx_g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dxx_g: Callable[[np.ndarray, np.ndarray], np.ndarray]


def discretize_integral_functional(
    fn: IntegralFunctional, grid: TimeGrid
) -> CylindricalFunctional:
    """Trapezoid reduction onto the full grid.

    Nodes are {0, t_1, ..., t_N}; the time-0 node is pinned at X_0 = 0 and
    contributes the constant w_0 * g(0, 0).  The result is a cylindrical
    functional over all N grid indices with diagonal gradient
    d_i f(x) = w_i * dx_g(t_i, x_i).
    """
    t = grid.times
    n = t.size
    nodes = np.concatenate(([0.0], t))
    w_all = np.empty(n + 1)
    w_all[0] = 0.5 * (nodes[1] - nodes[0])
    w_all[-1] = 0.5 * (nodes[-1] - nodes[-2])
    if n > 1:
        w_all[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
    const = w_all[0] * float(fn.g(0.0, 0.0))
    w = w_all[1:]
    times = t.copy()

    def f(x):
        return const + np.asarray(fn.g(times, x)) @ w

    def grad(x):
        return w * np.asarray(fn.dx_g(times, x))

    def _diag(i):
        ti, wi = float(times[i]), float(w[i])
        return (
            lambda x: wi * fn.dx_g(ti, x),
            lambda x: wi * fn.dxx_g(ti, x),
            lambda x: wi * fn.g(ti, x),
        )

    triples = [_diag(i) for i in range(n)]
    return CylindricalFunctional(
        name=fn.name,
        indices=tuple(range(n)),
        f=f,
        grad=grad,
        diag=tuple(p[0] for p in triples),
        diag_deriv=tuple(p[1] for p in triples),
        diag_terms=tuple(p[2] for p in triples),
        f_const=const,
    )


def gradient_check(
    fn: CylindricalFunctional,
    points: int = 100,
    step: float = 1e-5,
    seed: int = 0,
    box: float = 3.0,
) -> float:
    """Max relative error of ``grad`` against central differences.

    Points are drawn uniformly from [-box, box]^k.  Relative scaling uses
    max(1, |analytic|) per component so near-zero gradient entries are
    compared absolutely.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(points, fn.k))
    analytic = np.asarray(fn.grad(x), dtype=float)
    worst = 0.0
    for i in range(fn.k):
        hi = x.copy()
        lo = x.copy()
        hi[:, i] += step
        lo[:, i] -= step
        fd = (np.asarray(fn.f(hi)) - np.asarray(fn.f(lo))) / (2.0 * step)
        err = np.abs(fd - analytic[:, i]) / np.maximum(1.0, np.abs(analytic[:, i]))
        worst = max(worst, float(err.max()))
    return worst


# --- catalog ---------------------------------------------------------------

_CATALOG = ("quadratic", "two_time", "integral_sin", "integral_square",
            "linear", "terminal_exp")

_LINEAR_FRACTIONS = (0.25, 0.5, 1.0)
_LINEAR_COEFFS = (1.0, -2.0, 1.5)


def catalog_names() -> tuple[str, ...]:
    return _CATALOG


def _snap_index(grid: TimeGrid, t: float) -> int:
    i = grid.index_of(t, snap=True)
    if abs(grid.times[i] - t) > 1e-12 * max(1.0, abs(t)):
        warnings.warn(
            f"time {t} is off-grid; snapped to nearest grid point {grid.times[i]}",
            stacklevel=3,
        )
    return i


def make_functional(name: str, grid: TimeGrid) -> CylindricalFunctional:
    """Instantiate a catalog functional on a concrete grid.

    Reference times are fractions of the horizon; off-grid times snap to the
    nearest grid point with a warning.
    """
    horizon = grid.horizon
    if name == "quadratic":
        i = _snap_index(grid, horizon)
        return CylindricalFunctional(
            name=name,
            indices=(i,),
            f=lambda x: x[..., 0] ** 2,
            grad=lambda x: 2.0 * x,
            diag=(lambda v: 2.0 * v,),
            diag_deriv=(lambda v: 2.0 * np.ones_like(v),),
            diag_terms=(lambda v: np.asarray(v) ** 2,),
        )
    if name == "two_time":
        ia = _snap_index(grid, 0.5 * horizon)
        ib = _snap_index(grid, horizon)
        return CylindricalFunctional(
            name=name,
            indices=(ia, ib),
            f=lambda x: np.sin(x[..., 0]) + np.cos(x[..., 1]),
            grad=lambda x: np.stack([np.cos(x[..., 0]), -np.sin(x[..., 1])], axis=-1),
            diag=(np.cos, lambda v: -np.sin(v)),
            diag_deriv=(lambda v: -np.sin(v), lambda v: -np.cos(v)),
            diag_terms=(np.sin, np.cos),
        )
    if name == "linear":
        idx = [_snap_index(grid, frac * horizon) for frac in _LINEAR_FRACTIONS]
        if len(set(idx)) != len(idx):
            raise ValueError("grid too coarse to separate the linear functional's times")
        coeffs = np.array(_LINEAR_COEFFS)

        def _const(c):
            return lambda v: np.full_like(np.asarray(v, dtype=float), c)

        def _scaled(c):
            return lambda v: c * np.asarray(v, dtype=float)

        return CylindricalFunctional(
            name=name,
            indices=tuple(idx),
            f=lambda x: x @ coeffs,
            grad=lambda x: np.broadcast_to(coeffs, x.shape).copy(),
            diag=tuple(_const(c) for c in coeffs),
            diag_deriv=tuple(_const(0.0) for _ in coeffs),
            diag_terms=tuple(_scaled(c) for c in coeffs),
        )
    if name == "terminal_exp":
        i = _snap_index(grid, horizon)
        return CylindricalFunctional(
            name=name,
            indices=(i,),
            f=lambda x: np.exp(x[..., 0]),
            grad=lambda x: np.exp(x),
            diag=(np.exp,),
            diag_deriv=(np.exp,),
            diag_terms=(np.exp,),
        )
    if name == "integral_sin":
        fn = IntegralFunctional(
            name=name,
            g=lambda s, x: np.sin(x),
            dx_g=lambda s, x: np.cos(x),
            dxx_g=lambda s, x: -np.sin(x),
        )
        return discretize_integral_functional(fn, grid)
    if name == "integral_square":
        fn = IntegralFunctional(
            name=name,
            g=lambda s, x: np.asarray(x) ** 2,
            dx_g=lambda s, x: 2.0 * np.asarray(x),
            dxx_g=lambda s, x: 2.0 * np.ones_like(np.asarray(x, dtype=float)),
        )
        return discretize_integral_functional(fn, grid)
    raise KeyError(f"unknown functional {name!r}; known: {', '.join(_CATALOG)}")
