"""Malliavin derivative, Skorokhod divergence, and the Clark integrand.

For F = f(X_{t_{i_1}}, ..., X_{t_{i_k}}) the derivative is DF = sum_i
(d_i f)(X) k_{t_i}.  A vector field assigns each slot s a coefficient rule
a_s (a function of the path) and a fixed direction d_s; its divergence is

    delta(u) = sum_s a_s(X) I(d_s) - sum_s <D a_s, d_s>,

the Gaussian integration-by-parts adjoint of D: E[F delta(u)] = E<DF, u>
holds exactly in expectation for any smooth coefficients, adapted or not.
The correction term needs coefficient gradients; fields without gradient
rules must be deterministic.

The discrete Clark integrand assigns slot s (covering (t_{s-1}, t_s], with
t_{-1} = 0) the coefficient

    a_s(prefix) = <E[DF | F_{s}], d_s> / ||d_s||^2,

the conditionally expected derivative's density along the increment
direction d_s = k_{t_s} - k_{t_{s-1}}.  Conditioning is on the coordinates
strictly before the slot, so the field is predictable; at H = 1/2 the
coefficients reduce to the classical Euler Clark-Ocone scheme (local
averages of E[D_r F | F_r]) and delta(u) telescopes exactly for linear F.

For fields with affine coefficient rules a_s = p_s + q_s . x the
non-isometry defect has a closed form: with Q = sum_s w_s q_s^T (w_s the
direction coefficients),

    E[delta(u)^2] - E[||u||^2] = tr(Q Sigma Q Sigma),

a double Gram contraction that vanishes for predictable fields at H = 1/2
and equals 1 for u = X_T k_T on a unit-variance terminal coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import GramContext
from .errors import MissingGradientError
from .functionals import CylindricalFunctional
from .gaussian import (DEFAULT_NODES, conditional_expectation, expect_scalar,
                       regression_coefficients)

__all__ = [
    "VectorField",
    "AffineField",
    "derivative",
    "divergence",
    "derivative_pairing",
    "field_coefficients",
    "field_norm_sq",
    "increment_directions",
    "innovation_directions",
    "deterministic_field",
    "affine_field",
    "isometry_defect_affine",
    "predictable_projection",
    "conditional_gradient",
    "conditional_value",
    "clark_integrand",
]


@dataclass(frozen=True)
class VectorField:
    """Slot directions plus coefficient rules evaluated on path batches.

    ``coeff_fn`` maps an (m, N) path matrix to (m, n_slots) coefficients
    (or returns a constant (n_slots,) vector).  ``grad_dot(paths, V)``
    returns sum_k (d a_s / d x_k) V[s, k] per slot, the contraction the
    divergence correction needs; None is only legal for deterministic
    coefficients.  ``predictable`` declares that slot s's rule reads
    coordinates strictly before s.
    """

    directions: np.ndarray
    coeff_fn: Callable[[np.ndarray], np.ndarray]
    grad_dot: Callable[[np.ndarray, np.ndarray], np.ndarray] | None
    deterministic: bool
    predictable: bool

    @property
    def n_slots(self) -> int:
        return int(self.directions.shape[0])


@dataclass(frozen=True)
class AffineField(VectorField):
    """a_s(x) = const[s] + lin[s] . x, with the matrices kept for closed forms."""

    const: np.ndarray = None
    lin: np.ndarray = None


def derivative(ctx: GramContext, fn: CylindricalFunctional, x: np.ndarray) -> np.ndarray:
    """Energy-space coefficients of DF at x; batch-shaped like x.

    Linear in f by construction: gradients add componentwise.
    """
    if fn.grad is None:
        raise MissingGradientError(
            f"functional {fn.name!r} carries no gradient rule"
        )
    x = np.asarray(x, dtype=float)
    grads = fn.gradient(x)
    out = np.zeros(x.shape[:-1] + (ctx.n,))
    out[..., list(fn.indices)] = grads
    return out


def increment_directions(ctx: GramContext) -> np.ndarray:
    """Rows d_s = k_{t_s} - k_{t_{s-1}} (slot 0 is k_{t_0} from the pin)."""
    w = np.eye(ctx.n)
    w[1:, :-1] -= np.eye(ctx.n - 1)
    return w


def deterministic_field(directions: np.ndarray, weights: np.ndarray) -> VectorField:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (directions.shape[0],):
        raise ValueError("need one weight per direction row")
    return VectorField(
        directions=directions,
        coeff_fn=lambda paths: weights,
        grad_dot=None,
        deterministic=True,
        predictable=True,
    )


def affine_field(
    directions: np.ndarray, const: np.ndarray, lin: np.ndarray
) -> AffineField:
    """Field with a_s(x) = const[s] + lin[s] . x.

    Predictability is detected from the sparsity of ``lin``: slot s may read
    coordinates < s only.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    const = np.asarray(const, dtype=float)
    lin = np.asarray(lin, dtype=float)
    n_slots, n = directions.shape
    if const.shape != (n_slots,) or lin.shape != (n_slots, n):
        raise ValueError("const must be (n_slots,), lin (n_slots, n)")
    predictable = all(not lin[s, s:].any() for s in range(n_slots))

    def coeff_fn(paths):
        return const + paths @ lin.T

    def grad_dot(paths, v):
        return (lin * v).sum(axis=1)

    return AffineField(
        directions=directions,
        coeff_fn=coeff_fn,
        grad_dot=grad_dot,
        deterministic=False,
        predictable=predictable,
        const=const,
        lin=lin,
    )


def field_coefficients(field: VectorField, paths: np.ndarray) -> np.ndarray:
    """Total energy-space coefficients v(x) = sum_s a_s(x) d_s, per path."""
    a = np.asarray(field.coeff_fn(paths), dtype=float)
    return a @ field.directions


def divergence(ctx: GramContext, field: VectorField, paths: np.ndarray) -> np.ndarray:
    """delta(u) per path row."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    incr = paths @ field.directions.T
    a = np.asarray(field.coeff_fn(paths), dtype=float)
    out = (a * incr).sum(axis=-1)
    if not field.deterministic:
        if field.grad_dot is None:
            raise MissingGradientError(
                "state-dependent coefficients need gradient rules for the "
                "divergence correction term"
            )
        v = field.directions @ ctx.sigma
        corr = np.asarray(field.grad_dot(paths, v), dtype=float)
        out = out - (corr.sum() if corr.ndim == 1 else corr.sum(axis=-1))
    return out


def derivative_pairing(
    ctx: GramContext, fn: CylindricalFunctional, field: VectorField, paths: np.ndarray
) -> np.ndarray:
    """<DF, u> per path (the right-hand side of the adjointness identity)."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    grads = fn.gradient(paths)
    v = field_coefficients(field, paths)
    pairing = v @ ctx.sigma[:, list(fn.indices)]
    if pairing.ndim == 1:
        pairing = np.broadcast_to(pairing, grads.shape)
    return (grads * pairing).sum(axis=-1)


def field_norm_sq(ctx: GramContext, field: VectorField, paths: np.ndarray) -> np.ndarray:
    """||u||^2 per path."""
    v = field_coefficients(field, np.atleast_2d(np.asarray(paths, dtype=float)))
    v = np.atleast_2d(v)
    return ((v @ ctx.sigma) * v).sum(axis=-1)


def isometry_defect_affine(ctx: GramContext, field: AffineField) -> float:
    """Closed-form E[delta(u)^2] - E[||u||^2] = tr(Q Sigma Q Sigma)."""
    q = field.directions.T @ field.lin
    qs = q @ ctx.sigma
    return float(np.trace(qs @ qs))


def conditional_gradient(
    ctx: GramContext,
    fn: CylindricalFunctional,
    j: int,
    prefixes: np.ndarray,
    nodes: int = DEFAULT_NODES,
    use_deriv: bool = False,
) -> np.ndarray:
    """E[(d_i f)(X) | first j coordinates] for each row of ``prefixes``.

    Returns (m, k).  Diagonal-gradient functionals integrate each component
    against its one-dimensional conditional law; general functionals fall
    back to tensorized quadrature per row.  ``use_deriv`` integrates the
    per-coordinate second derivatives instead (diagonal functionals only).
    """
    prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
    idx = np.asarray(fn.indices, dtype=int)
    maps = fn.diag_deriv if use_deriv else fn.diag
    if maps is None:
        if use_deriv:
            raise ValueError(f"functional {fn.name!r} has no diagonal second derivatives")
        out = np.empty((prefixes.shape[0], fn.k))
        for r, row in enumerate(prefixes):
            for i in range(fn.k):
                out[r, i] = conditional_expectation(
                    ctx,
                    lambda xs, i=i: fn.grad(xs)[..., i],
                    idx,
                    j,
                    row[:j],
                    nodes=nodes,
                )
        return out
    beta, cov = regression_coefficients(ctx, j, idx)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    mu = prefixes[:, :j] @ beta if j else np.zeros((prefixes.shape[0], idx.size))
    out = np.empty((prefixes.shape[0], fn.k))
    for i in range(fn.k):
        if sd[i] == 0.0:
            out[:, i] = np.asarray(maps[i](mu[:, i]), dtype=float)
        else:
            out[:, i] = expect_scalar(maps[i], mu[:, i], sd[i], nodes)
    return out


def conditional_value(
    ctx: GramContext,
    fn: CylindricalFunctional,
    j: int,
    prefixes: np.ndarray,
    nodes: int = DEFAULT_NODES,
) -> np.ndarray:
    """E[F | first j coordinates] per prefix row, for separable functionals.

    Uses f(x) = f_const + sum_i diag_terms[i](x_i), so each conditional
    expectation is a one-dimensional Gaussian integral (exact for
    polynomial terms at the default node count).
    """
    if fn.diag_terms is None:
        raise ValueError(f"functional {fn.name!r} is not separable")
    prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
    idx = np.asarray(fn.indices, dtype=int)
    beta, cov = regression_coefficients(ctx, j, idx)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    mu = prefixes[:, :j] @ beta if j else np.zeros((prefixes.shape[0], idx.size))
    out = np.full(prefixes.shape[0], fn.f_const)
    for i in range(fn.k):
        if sd[i] == 0.0:
            out = out + np.asarray(fn.diag_terms[i](mu[:, i]), dtype=float)
        else:
            out = out + expect_scalar(fn.diag_terms[i], mu[:, i], sd[i], nodes)
    return out


def predictable_projection(
    ctx: GramContext,
    fn: CylindricalFunctional,
    j: int,
    prefix: np.ndarray,
    nodes: int = DEFAULT_NODES,
) -> np.ndarray:
    """(Pi DF)_j = sum_i E[d_i f | prefix] P_j k_{t_i}, supported on :j."""
    prefix = np.asarray(prefix, dtype=float)
    if prefix.ndim != 1 or prefix.size < j:
        raise ValueError("prefix must be a 1-d path with at least j coordinates")
    out = np.zeros(ctx.n)
    if j == 0:
        return out
    cond = conditional_gradient(ctx, fn, j, prefix[None, :j], nodes=nodes)[0]
    idx = np.asarray(fn.indices, dtype=int)
    y = ctx.solve_leading(j, ctx.sigma[:j, idx])
    out[:j] = y @ cond
    return out


def innovation_directions(ctx: GramContext) -> np.ndarray:
    """Rows w_s = e_s - P_s k_{t_s}: each grid evaluation stripped of its
    projection onto the observed prefix.

    I(w_s) is the slot-s innovation X_{t_s} - E[X_{t_s} | X_{t_1..t_{s-1}}],
    orthogonal to the first s coordinates in the energy geometry.  At
    H = 1/2 the projection is P_s k_{t_s} = k_{t_{s-1}} and these reduce to
    the raw increment directions.
    """
    n = ctx.n
    w = np.eye(n)
    for s in range(1, n):
        w[s, :s] = -ctx.solve_leading(s, ctx.sigma[:s, s])
    return w


@dataclass(frozen=True)
class _ClarkTables:
    """Per-slot precomputation for the Clark field of one functional."""

    betas: tuple[np.ndarray, ...]  # (s, k) regression of X[idx] on first s coords
    sds: np.ndarray                # (n_slots, k) conditional std devs
    gains: np.ndarray              # (n_slots, k) <k_idx, w_s>/||w_s||^2
    directions: np.ndarray         # (n_slots, n) innovation directions


def _clark_tables(ctx: GramContext, fn: CylindricalFunctional) -> _ClarkTables:
    n = ctx.n
    idx = np.asarray(fn.indices, dtype=int)
    betas = []
    sds = np.empty((n, fn.k))
    for s in range(n):
        beta, cov = regression_coefficients(ctx, s, idx)
        betas.append(np.asarray(beta).reshape(s, fn.k))
        sds[s] = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    w = innovation_directions(ctx)
    sw = w @ ctx.sigma
    norm2 = np.einsum("sj,sj->s", sw, w)
    gains = sw[:, idx] / norm2[:, None]
    return _ClarkTables(tuple(betas), sds, gains, w)


def clark_integrand(
    ctx: GramContext, fn: CylindricalFunctional, nodes: int = DEFAULT_NODES
) -> VectorField:
    """Predictable field u with F - E[F] ~ delta(u) (exact for linear F at
    H = 1/2 on grids containing the functional's times).

    Slot s pairs the projected increment direction w_s = k_{t_s} - P_s
    k_{t_s} with coefficient

        a_s = sum_i E[(d_i f)(X) | X_{< s}] <k_{t_i}, w_s> / ||w_s||^2,

    so a_s I(w_s) is the best prefix-measurable multiple of the slot
    innovation approximating the martingale difference E[F | X_{<= s}] -
    E[F | X_{< s}]; the L2 residual of delta(u) against F - E[F] is the
    discarded higher-order innovation energy, which vanishes under grid
    refinement.  Pairing the raw increment k_{t_s} - k_{t_{s-1}} instead
    leaves an O(1) residual for H < 1/2: the predictable part of each
    increment feeds noise back into delta.
    """
    if fn.diag is None or fn.diag_deriv is None:
        raise ValueError(
            f"functional {fn.name!r} lacks diagonal gradient maps; the Clark "
            "field needs per-coordinate conditional expectations"
        )
    tables = _clark_tables(ctx, fn)
    n = ctx.n
    k = fn.k

    def _cond(paths, s, use_deriv):
        mu = paths[:, :s] @ tables.betas[s] if s else np.zeros((paths.shape[0], k))
        maps = fn.diag_deriv if use_deriv else fn.diag
        out = np.empty((paths.shape[0], k))
        for i in range(k):
            sd = tables.sds[s, i]
            if sd == 0.0:
                out[:, i] = np.asarray(maps[i](mu[:, i]), dtype=float)
            else:
                out[:, i] = expect_scalar(maps[i], mu[:, i], sd, nodes)
        return out

    def coeff_fn(paths):
        paths = np.atleast_2d(paths)
        a = np.zeros((paths.shape[0], n))
        for s in range(n):
            a[:, s] = _cond(paths, s, use_deriv=False) @ tables.gains[s]
        return a

    def grad_dot(paths, v):
        paths = np.atleast_2d(paths)
        out = np.zeros((paths.shape[0], n))
        for s in range(1, n):
            r = tables.betas[s].T @ v[s, :s]
            scal = tables.gains[s] * r
            if not scal.any():
                continue
            out[:, s] = _cond(paths, s, use_deriv=True) @ scal
        return out

    return VectorField(
        directions=tables.directions,
        coeff_fn=coeff_fn,
        grad_dot=grad_dot,
        deterministic=False,
        predictable=True,
    )
