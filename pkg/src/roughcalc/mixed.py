"""Mixed process X = alpha * B + beta * B^H built from independent components.

The underlying Gaussian system is the 2N vector (B, B^H) with block-diagonal
Gram diag(Sigma_B, Sigma_H); the energy space is the direct sum with

    ||(u, v)||^2 = ||u||^2_B + ||v||^2_H.

Functionals read the mixed path values X_{t_i}, so the chain rule puts the
weights in the derivative:

    D F = (alpha * sum_i d_i f k^B_{t_i},  beta * sum_i d_i f k^H_{t_i}),

and the divergence acts componentwise, delta(u, v) = delta_B(u) + delta_H(v).
With the weights placed this way, Gaussian integration by parts on the joint
system gives exact adjointness E[F delta(u, v)] = E<DF, (u, v)> and the
degenerations are literal: beta = 0 recovers the Brownian pipeline
(bit-identical paths for matching seeds, since the B block consumes the same
leading draws), alpha = 0 the fractional one.

Conditioning is always on the observable filtration of X itself, whose Gram
Sigma_X = alpha^2 Sigma_B + beta^2 Sigma_H is the MIXED covariance model, so
the single-process conditioning machinery applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import GramContext
from .errors import MissingGradientError
from .functionals import CylindricalFunctional
from .gaussian import RngStream, _fill_chunks, expect_scalar, regression_coefficients
from .malliavin import VectorField, innovation_directions
from .models import CovarianceModel, TimeGrid

__all__ = ["MixedContext", "MixedEnsemble", "mixed_derivative_pair",
           "mixed_divergence", "mixed_pairing", "mixed_field_norm_sq",
           "mixed_clark_fields"]


@dataclass(frozen=True)
class MixedContext:
    """Gram contexts for the two components and for the observable mixture."""

    alpha: float
    beta: float
    ctx_b: GramContext   # Brownian component
    ctx_h: GramContext   # fractional component
    ctx_x: GramContext   # mixture itself (conditioning filtration)

    @staticmethod
    def build(alpha: float, beta: float, hurst: float, grid: TimeGrid) -> "MixedContext":
        return MixedContext(
            alpha=float(alpha),
            beta=float(beta),
            ctx_b=GramContext.build(CovarianceModel.bm(), grid),
            ctx_h=GramContext.build(CovarianceModel.fbm(hurst), grid),
            ctx_x=GramContext.build(CovarianceModel.mixed(alpha, beta, hurst), grid),
        )

    @property
    def n(self) -> int:
        return self.ctx_x.n


@dataclass(frozen=True)
class MixedEnsemble:
    paths_b: np.ndarray
    paths_h: np.ndarray
    paths_x: np.ndarray
    seed: int
    stream: int

    @property
    def m(self) -> int:
        return int(self.paths_x.shape[0])


def sample_mixed(
    mctx: MixedContext, m: int, seed: int, stream: int = 0, workers: int = 1
) -> MixedEnsemble:
    """Joint draw of (B, B^H, X) with the B block reading the leading normals
    of each chunk, so beta = 0 reproduces the pure Brownian ensemble bit for
    bit at matching (seed, stream)."""
    if m < 1:
        raise ValueError("ensemble size must be >= 1")
    n = mctx.n
    rng = RngStream(seed, stream)
    lb = mctx.ctx_b.chol.T
    lh = mctx.ctx_h.chol.T
    paths_b = np.empty((m, n))
    paths_h = np.empty((m, n))

    def fill(c, lo, hi):
        gen = rng.generator(c)
        zb = gen.standard_normal((hi - lo, n))
        zh = gen.standard_normal((hi - lo, n))
        paths_b[lo:hi] = zb @ lb
        paths_h[lo:hi] = zh @ lh

    _fill_chunks(m, workers, fill)
    paths_x = mctx.alpha * paths_b + mctx.beta * paths_h
    for arr in (paths_b, paths_h, paths_x):
        arr.setflags(write=False)
    return MixedEnsemble(paths_b, paths_h, paths_x, seed, stream)


def mixed_derivative_pair(
    mctx: MixedContext, fn: CylindricalFunctional, paths_x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Component coefficient matrices (DF)_B and (DF)_H, each (m, N)."""
    paths_x = np.atleast_2d(np.asarray(paths_x, dtype=float))
    grads = fn.gradient(paths_x)
    base = np.zeros((paths_x.shape[0], mctx.n))
    base[:, list(fn.indices)] = grads
    return mctx.alpha * base, mctx.beta * base


def _component_divergence(
    ctx: GramContext,
    field: VectorField,
    component_paths: np.ndarray,
    coeff_paths: np.ndarray,
    chain: float,
) -> np.ndarray:
    """delta of a field whose rules read the mixture while its directions
    live in one component; ``chain`` is d(mixture)/d(component)."""
    incr = component_paths @ field.directions.T
    a = np.asarray(field.coeff_fn(coeff_paths), dtype=float)
    out = (a * incr).sum(axis=-1)
    if not field.deterministic:
        if field.grad_dot is None:
            raise MissingGradientError("component field needs gradient rules")
        v = field.directions @ ctx.sigma
        corr = np.asarray(field.grad_dot(coeff_paths, v), dtype=float)
        corr_sum = corr.sum() if corr.ndim == 1 else corr.sum(axis=-1)
        out = out - chain * corr_sum
    return out


def mixed_divergence(
    mctx: MixedContext,
    field_b: VectorField | None,
    field_h: VectorField | None,
    ens: MixedEnsemble,
) -> np.ndarray:
    """delta(u, v) = delta_B(u) + delta_H(v); coefficient rules read X."""
    out = np.zeros(ens.m)
    if field_b is not None:
        out = out + _component_divergence(
            mctx.ctx_b, field_b, ens.paths_b, ens.paths_x, mctx.alpha
        )
    if field_h is not None:
        out = out + _component_divergence(
            mctx.ctx_h, field_h, ens.paths_h, ens.paths_x, mctx.beta
        )
    return out


def _component_pairing(ctx, grads, indices, field, coeff_paths, weight):
    a = np.asarray(field.coeff_fn(coeff_paths), dtype=float)
    v = a @ field.directions
    pairing = v @ ctx.sigma[:, list(indices)]
    if pairing.ndim == 1:
        pairing = np.broadcast_to(pairing, grads.shape)
    return weight * (grads * pairing).sum(axis=-1)


def mixed_pairing(
    mctx: MixedContext,
    fn: CylindricalFunctional,
    field_b: VectorField | None,
    field_h: VectorField | None,
    ens: MixedEnsemble,
) -> np.ndarray:
    """<DF, (u, v)> per path in the direct-sum geometry."""
    grads = fn.gradient(ens.paths_x)
    out = np.zeros(ens.m)
    if field_b is not None:
        out = out + _component_pairing(
            mctx.ctx_b, grads, fn.indices, field_b, ens.paths_x, mctx.alpha
        )
    if field_h is not None:
        out = out + _component_pairing(
            mctx.ctx_h, grads, fn.indices, field_h, ens.paths_x, mctx.beta
        )
    return out


def mixed_field_norm_sq(
    mctx: MixedContext,
    field_b: VectorField | None,
    field_h: VectorField | None,
    ens: MixedEnsemble,
) -> np.ndarray:
    out = np.zeros(ens.m)
    for ctx, field in ((mctx.ctx_b, field_b), (mctx.ctx_h, field_h)):
        if field is None:
            continue
        a = np.asarray(field.coeff_fn(ens.paths_x), dtype=float)
        v = np.atleast_2d(a @ field.directions)
        out = out + ((v @ ctx.sigma) * v).sum(axis=-1)
    return out


def mixed_clark_fields(
    mctx: MixedContext, fn: CylindricalFunctional, nodes: int = 32
) -> tuple[VectorField, VectorField]:
    """Componentwise Clark fields for the mixture's martingale factorization.

    The slot-s direction is the X-innovation representer w_s = k^X_{t_s} -
    P_s k^X_{t_s} computed in the Sigma_X geometry; its component pair is
    (alpha w_s, beta w_s) with the SAME coefficient vector, because
    observing X pins the two components only jointly.  The shared scalar
    coefficient

        a_s = sum_i E[(d_i f)(X) | X_{< s}] <k_{t_i}, w_s>_X / ||w_s||^2_X

    makes alpha a_s I_B(w_s) + beta a_s I_H(w_s) = a_s (X-innovation), the
    best prefix-measurable multiple of the innovation of X, exactly as in
    the single-process field.  weight_B = alpha and weight_H = beta sit in
    the component coefficients (chain rule); at weight 0 a component field
    is identically zero and the other one reproduces the pure pipeline.
    """
    if fn.diag is None or fn.diag_deriv is None:
        raise ValueError("mixed Clark fields need diagonal gradient maps")
    n = mctx.n
    k = fn.k
    idx = np.asarray(fn.indices, dtype=int)
    betas = []
    sds = np.empty((n, k))
    for s in range(n):
        beta, cov = regression_coefficients(mctx.ctx_x, s, idx)
        betas.append(np.asarray(beta).reshape(s, k))
        sds[s] = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    w = innovation_directions(mctx.ctx_x)
    sw = w @ mctx.ctx_x.sigma
    norm2 = np.einsum("sj,sj->s", sw, w)
    gains = sw[:, idx] / norm2[:, None]

    def _cond(paths, s, use_deriv):
        mu = paths[:, :s] @ betas[s] if s else np.zeros((paths.shape[0], k))
        maps = fn.diag_deriv if use_deriv else fn.diag
        out = np.empty((paths.shape[0], k))
        for i in range(k):
            sd = sds[s, i]
            if sd == 0.0:
                out[:, i] = np.asarray(maps[i](mu[:, i]), dtype=float)
            else:
                out[:, i] = expect_scalar(maps[i], mu[:, i], sd, nodes)
        return out

    def _component(weight):
        def coeff_fn(paths):
            paths = np.atleast_2d(paths)
            a = np.zeros((paths.shape[0], n))
            for s in range(n):
                a[:, s] = weight * (_cond(paths, s, use_deriv=False) @ gains[s])
            return a

        def grad_dot(paths, v):
            paths = np.atleast_2d(paths)
            out = np.zeros((paths.shape[0], n))
            for s in range(1, n):
                scal = gains[s] * (betas[s].T @ v[s, :s])
                if not scal.any():
                    continue
                out[:, s] = weight * (_cond(paths, s, use_deriv=True) @ scal)
            return out

        return VectorField(
            directions=w,
            coeff_fn=coeff_fn,
            grad_dot=grad_dot,
            deterministic=False,
            predictable=True,
        )

    return _component(mctx.alpha), _component(mctx.beta)
