"""Sampling and conditioning for grid Gaussian vectors.

Two samplers produce ensembles of paths X ~ N(0, Sigma):

* `sample_ensemble` draws z ~ N(0, I) and maps through the Cholesky factor;
  works for every model/grid.
* `sample_ensemble_circulant` uses circulant embedding of the stationary
  fractional Gaussian noise autocovariance

      rho(k) = 0.5 * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})

  on uniform grids: the length-2n symmetric extension of rho is diagonalized
  by the FFT, complex normals are shaped to Hermitian symmetry, and the real
  part of the inverse transform is exact stationary noise provided every
  embedding eigenvalue is nonnegative.  Eigenvalues below -1e-9 * max force
  a fallback to the dense sampler, flagged on the ensemble.

Randomness is keyed by (seed, stream, chunk): each fixed-size chunk of rows
gets its own PCG64 generator via SeedSequence spawn keys, so ensembles are
bit-identical for any worker count and any chunk execution order.

Conditioning is plain Gaussian linear algebra: given the first j coordinates,
the remaining block has mean map Sigma_fp Sigma_pp^{-1} and covariance the
Schur complement Sigma_ff - Sigma_fp Sigma_pp^{-1} Sigma_pf.  Conditional
expectations of smooth functions of future coordinates integrate with
tensorized Gauss-Hermite quadrature (probabilists' weights, whitened by a
Cholesky factor of the Schur block) or by Monte Carlo.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .energy import GramContext
from .errors import IllConditionedModelError, UnsupportedDimensionError
from .models import ModelKind

__all__ = [
    "CHUNK_ROWS",
    "RngStream",
    "PathEnsemble",
    "sample_ensemble",
    "sample_ensemble_circulant",
    "isonormal",
    "write_ensemble",
    "read_ensemble",
    "ConditionalLaw",
    "conditional_law",
    "regression_coefficients",
    "conditional_expectation",
    "expect_scalar",
]

CHUNK_ROWS = 16384

_ENSEMBLE_MAGIC = b"RGCE"
_ENSEMBLE_VERSION = 1


@dataclass(frozen=True)
class RngStream:
    """Deterministic generator family keyed by (seed, stream, chunk)."""

    seed: int
    stream: int = 0

    def generator(self, chunk: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, chunk))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class PathEnsemble:
    """Rows are i.i.d. path vectors over the grid."""

    paths: np.ndarray
    ctx: GramContext
    seed: int
    stream: int
    sampler: str
    fallback: bool = False

    @property
    def m(self) -> int:
        return int(self.paths.shape[0])


def _chunk_bounds(m: int):
    starts = range(0, m, CHUNK_ROWS)
    return [(lo, min(lo + CHUNK_ROWS, m)) for lo in starts]


def _fill_chunks(m, workers, fill):
    bounds = _chunk_bounds(m)
    if workers <= 1 or len(bounds) <= 1:
        for c, (lo, hi) in enumerate(bounds):
            fill(c, lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fill, c, lo, hi) for c, (lo, hi) in enumerate(bounds)]
        for f in futures:
            f.result()


def sample_ensemble(
    ctx: GramContext, m: int, seed: int, stream: int = 0, workers: int = 1
) -> PathEnsemble:
    """m i.i.d. draws of N(0, Sigma) via the cached Cholesky factor."""
    if m < 1:
        raise ValueError("ensemble size must be >= 1")
    rng = RngStream(seed, stream)
    lt = ctx.chol.T
    out = np.empty((m, ctx.n))

    def fill(c, lo, hi):
        z = rng.generator(c).standard_normal((hi - lo, ctx.n))
        out[lo:hi] = z @ lt

    _fill_chunks(m, workers, fill)
    out.setflags(write=False)
    return PathEnsemble(out, ctx, seed, stream, "cholesky")


def _fgn_autocov(h: float, n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    two_h = 2.0 * h
    return 0.5 * ((k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)


def circulant_eigenvalues(h: float, n: int) -> np.ndarray:
    """FFT spectrum of the symmetric length-2n embedding of rho(0..n)."""
    rho = _fgn_autocov(h, n)
    c = np.concatenate([rho[:n], rho[n:n + 1], rho[n - 1:0:-1]])
    return np.fft.fft(c).real


def sample_ensemble_circulant(
    ctx: GramContext, m: int, seed: int, stream: int = 0, workers: int = 1
) -> PathEnsemble:
    """Circulant-embedding sampler for fBM/BM on a uniform grid.

    Falls back to the dense Cholesky sampler (with ``fallback=True``) if the
    embedding spectrum dips below -1e-9 times its maximum.
    """
    model = ctx.model
    if model.kind is ModelKind.MIXED:
        raise ValueError("circulant sampler covers bm/fbm; sample mixed components separately")
    if not ctx.grid.uniform:
        raise ValueError("circulant sampler requires a uniform grid")
    if m < 1:
        raise ValueError("ensemble size must be >= 1")
    hurst = 0.5 if model.kind is ModelKind.BM else model.hurst
    n = ctx.n
    g = circulant_eigenvalues(hurst, n)
    if g.min() < -1e-9 * g.max():
        dense = sample_ensemble(ctx, m, seed, stream, workers)
        return PathEnsemble(dense.paths, ctx, seed, stream, "cholesky", fallback=True)
    g = np.clip(g, 0.0, None)
    sqrt_g = np.sqrt(g)
    m_emb = 2 * n
    dt = ctx.grid.times[0]
    scale = dt**hurst
    rng = RngStream(seed, stream)
    out = np.empty((m, n))
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def fill(c, lo, hi):
        rows = hi - lo
        z = rng.generator(c).standard_normal((rows, m_emb))
        zc = np.empty((rows, m_emb), dtype=complex)
        zc[:, 0] = z[:, 0]
        zc[:, n] = z[:, 1]
        a = z[:, 2:n + 1]
        b = z[:, n + 1:]
        zc[:, 1:n] = (a + 1j * b) * inv_sqrt2
        zc[:, n + 1:] = (a[:, ::-1] - 1j * b[:, ::-1]) * inv_sqrt2
        fgn = np.sqrt(m_emb) * np.fft.ifft(sqrt_g[None, :] * zc, axis=1).real[:, :n]
        out[lo:hi] = np.cumsum(scale * fgn, axis=1)

    _fill_chunks(m, workers, fill)
    out.setflags(write=False)
    return PathEnsemble(out, ctx, seed, stream, "circulant")


def isonormal(ctx: GramContext, c: np.ndarray, paths: np.ndarray) -> np.ndarray:
    """I(h) = sum_i c_i X_{t_i} applied to each row; Var I(h) = ||h||^2."""
    c = np.asarray(c, dtype=float)
    return paths @ c


def write_ensemble(path, ens: PathEnsemble) -> None:
    """Binary layout: magic, version u32, m u64, n u64, seed u64, then
    row-major little-endian float64 path data."""
    m, n = ens.paths.shape
    header = _ENSEMBLE_MAGIC + struct.pack("<IQQQ", _ENSEMBLE_VERSION, m, n, ens.seed)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ens.paths.astype("<f8").tobytes(order="C"))


def read_ensemble(path) -> tuple[np.ndarray, int]:
    """Returns (paths, seed); validates magic and version."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _ENSEMBLE_MAGIC:
            raise ValueError(f"not an ensemble file (magic {magic!r})")
        version, m, n, seed = struct.unpack("<IQQQ", fh.read(28))
        if version != _ENSEMBLE_VERSION:
            raise ValueError(f"unsupported ensemble version {version}")
        data = np.frombuffer(fh.read(8 * m * n), dtype="<f8").reshape(m, n)
    return data.copy(), seed


@dataclass(frozen=True)
class ConditionalLaw:
    """Law of the trailing block given the first j coordinates.

    mean shift = mean_map @ prefix; covariance is the Schur complement and
    does not depend on the prefix.
    """

    j: int
    mean_map: np.ndarray  # (n - j, j)
    cov: np.ndarray       # (n - j, n - j)


def conditional_law(ctx: GramContext, j: int) -> ConditionalLaw:
    if not 0 <= j <= ctx.n:
        raise ValueError(f"adapted index {j} out of range 0..{ctx.n}")
    sigma = ctx.sigma
    if j == 0:
        return ConditionalLaw(0, np.zeros((ctx.n, 0)), sigma.copy())
    fut = np.arange(j, ctx.n)
    beta = ctx.solve_leading(j, sigma[:j, fut]) if fut.size else np.zeros((j, 0))
    cov = sigma[np.ix_(fut, fut)] - sigma[np.ix_(fut, np.arange(j))] @ beta
    cov = 0.5 * (cov + cov.T)
    return ConditionalLaw(j, beta.T, cov)


def regression_coefficients(
    ctx: GramContext, j: int, idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional law of X[idx] given the first j coordinates.

    Returns (beta, cov): E[X[idx] | prefix] = beta.T @ prefix with beta of
    shape (j, k), and cov the k x k Schur block.  idx may contain observed
    indices (< j); those rows come out as exact interpolation with zero
    conditional variance, up to solver roundoff.
    """
    idx = np.atleast_1d(np.asarray(idx, dtype=int))
    if j == 0:
        return np.zeros((0, idx.size)), ctx.sigma[np.ix_(idx, idx)].copy()
    beta = np.asarray(ctx.solve_leading(j, ctx.sigma[:j, idx]))
    cov = ctx.sigma[np.ix_(idx, idx)] - ctx.sigma[np.ix_(idx, np.arange(j))] @ beta
    cov = 0.5 * (cov + cov.T)
    return beta, cov


def _chol_psd(cov: np.ndarray) -> np.ndarray:
    """Cholesky of a PSD matrix, tolerating tiny negative roundoff."""
    scale = float(np.mean(np.diag(cov))) or 1.0
    for eps in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
        try:
            return np.linalg.cholesky(cov + (eps * abs(scale)) * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise IllConditionedModelError("conditional covariance is not factorizable")


MAX_QUADRATURE_DIM = 4
DEFAULT_NODES = 32


def _hermite_nodes(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    z, w = hermegauss(nodes)
    return z, w / np.sqrt(2.0 * np.pi)


def conditional_expectation(
    ctx: GramContext,
    g,
    indices,
    j: int,
    prefix: np.ndarray,
    method: str = "quadrature",
    nodes: int = DEFAULT_NODES,
    mc_n: int = 4096,
    rng: np.random.Generator | None = None,
) -> float:
    """E[g(X[indices]) | X_{t_1..t_j} = prefix].

    g maps an array of shape (..., len(indices)) to (...,).  Observed
    indices (< j) are substituted from the prefix; the rest integrate under
    the conditional Gaussian.  Quadrature tensorizes `nodes` Gauss-Hermite
    points per future dimension and supports at most MAX_QUADRATURE_DIM of
    them; `method="mc"` draws mc_n conditional samples instead.
    """
    indices = np.atleast_1d(np.asarray(indices, dtype=int))
    prefix = np.asarray(prefix, dtype=float)
    if prefix.shape != (j,):
        raise ValueError(f"prefix must have shape ({j},), got {prefix.shape}")
    observed = indices < j
    base = np.zeros(indices.size)
    base[observed] = prefix[indices[observed]]
    fut = np.flatnonzero(~observed)
    if fut.size == 0:
        return float(g(base))
    beta, cov = regression_coefficients(ctx, j, indices[fut])
    mu = beta.T @ prefix if j else np.zeros(fut.size)
    if method == "quadrature":
        if fut.size > MAX_QUADRATURE_DIM:
            raise UnsupportedDimensionError(
                f"quadrature supports <= {MAX_QUADRATURE_DIM} future coordinates, "
                f"got {fut.size}; use method='mc'"
            )
        z, w = _hermite_nodes(nodes)
        grids = np.meshgrid(*([z] * fut.size), indexing="ij")
        pts = np.stack([grid.ravel() for grid in grids], axis=-1)
        wgrids = np.meshgrid(*([w] * fut.size), indexing="ij")
        weights = np.prod(np.stack([wg.ravel() for wg in wgrids], axis=-1), axis=-1)
        chol = _chol_psd(cov)
        samples = mu[None, :] + pts @ chol.T
    elif method == "mc":
        if rng is None:
            raise ValueError("method='mc' requires an explicit rng")
        chol = _chol_psd(cov)
        samples = mu[None, :] + rng.standard_normal((mc_n, fut.size)) @ chol.T
        weights = np.full(mc_n, 1.0 / mc_n)
    else:
        raise ValueError(f"unknown method {method!r}")
    args = np.broadcast_to(base, (samples.shape[0], indices.size)).copy()
    args[:, fut] = samples
    vals = np.asarray(g(args), dtype=float)
    return float(vals @ weights)


def expect_scalar(h, mu: np.ndarray, sd, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Vectorized E[h(mu_i + sd_i Z)], Z ~ N(0,1), via Gauss-Hermite.

    mu is (m,), sd scalar or (m,); h must broadcast elementwise.  Exact for
    polynomial h up to degree 2*nodes - 1, so affine and quadratic
    integrands incur no quadrature error.
    """
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    z, w = _hermite_nodes(nodes)
    pts = mu[..., None] + sd[..., None] * z
    return np.asarray(h(pts)) @ w
