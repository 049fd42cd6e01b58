"""Energy-space geometry: inner products, representers, adapted projection."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughcalc.energy import (GramContext, evaluate, increment_element,
                              inner_product, norm, project_adapted,
                              representer)
from roughcalc.models import CovarianceModel, TimeGrid, increment_variance


def make_ctx(h: float = 0.25, n: int = 8) -> GramContext:
    return GramContext.build(CovarianceModel.fbm(h), TimeGrid.uniform_grid(n))


def test_representer_inner_products_reproduce_covariance() -> None:
    ctx = make_ctx()
    t = ctx.grid.times
    for i in range(ctx.n):
        for j in range(ctx.n):
            want = 0.5 * (
                t[i] ** 0.5 + t[j] ** 0.5 - abs(t[i] - t[j]) ** 0.5
            )
            got = inner_product(ctx, representer(ctx, i), representer(ctx, j))
            assert got == pytest.approx(want, abs=1e-14)


def test_evaluate_is_inner_product_with_representer() -> None:
    ctx = make_ctx()
    rng = np.random.default_rng(3)
    c = rng.normal(size=ctx.n)
    for i in range(ctx.n):
        assert evaluate(ctx, c, i) == pytest.approx(
            inner_product(ctx, c, representer(ctx, i)), abs=1e-14
        )


def test_increment_element_norm_matches_model_variance() -> None:
    ctx = make_ctx(h=0.3, n=12)
    t = ctx.grid.times
    model = CovarianceModel.fbm(0.3)
    for i in range(ctx.n - 1):
        for j in range(i + 1, ctx.n):
            a = increment_element(ctx, i, j)
            want = increment_variance(model, float(t[i]), float(t[j]))
            assert norm(ctx, a) ** 2 == pytest.approx(want, abs=1e-12)


def test_increment_element_from_origin_is_plain_representer() -> None:
    ctx = make_ctx()
    a = increment_element(ctx, None, 4)
    assert np.array_equal(a, representer(ctx, 4))


def test_trapezoid_weights_energy_norm_bm() -> None:
    # independent quadratic-form value for the trapezoid weight vector on
    # the 8-point uniform grid under min(s, t)
    ctx = GramContext.build(CovarianceModel.bm(), TimeGrid.uniform_grid(8))
    w = np.full(8, 1.0 / 8.0)
    w[-1] = 0.5 / 8.0
    assert norm(ctx, w) ** 2 == pytest.approx(0.33203125, abs=1e-15)


def test_projection_idempotent_and_contractive() -> None:
    ctx = make_ctx(h=0.25, n=10)
    rng = np.random.default_rng(11)
    for j in range(ctx.n + 1):
        c = rng.normal(size=ctx.n)
        p = project_adapted(ctx, c, j)
        pp = project_adapted(ctx, p, j)
        assert np.max(np.abs(pp - p)) <= 1e-10
        assert norm(ctx, p) <= norm(ctx, c) * (1.0 + 1e-12)
        assert np.all(p[j:] == 0.0)


def test_projection_residual_orthogonal_to_prefix() -> None:
    ctx = make_ctx(h=0.25, n=10)
    rng = np.random.default_rng(12)
    c = rng.normal(size=ctx.n)
    for j in range(1, ctx.n):
        p = project_adapted(ctx, c, j)
        for g in rng.normal(size=(4, ctx.n)):
            g = g.copy()
            g[j:] = 0.0
            assert inner_product(ctx, c - p, g) == pytest.approx(0.0, abs=1e-10)


def test_projection_nesting() -> None:
    ctx = make_ctx(h=0.4, n=9)
    rng = np.random.default_rng(13)
    c = rng.normal(size=ctx.n)
    for i in range(1, ctx.n):
        for j in range(i, ctx.n):
            a = project_adapted(ctx, project_adapted(ctx, c, j), i)
            b = project_adapted(ctx, c, i)
            assert np.max(np.abs(a - b)) <= 1e-9


def test_full_prefix_projection_is_identity() -> None:
    ctx = make_ctx()
    rng = np.random.default_rng(14)
    c = rng.normal(size=ctx.n)
    assert np.max(np.abs(project_adapted(ctx, c, ctx.n) - c)) <= 1e-12


def test_bm_projects_representer_to_prefix_endpoint() -> None:
    # martingale geometry: for s <= t the best adapted approximation of k_t
    # is k_s, so the projected coefficients are the s-th coordinate vector
    ctx = GramContext.build(CovarianceModel.bm(), TimeGrid.uniform_grid(8))
    for j in range(1, ctx.n):
        for i in range(j - 1, ctx.n):
            p = project_adapted(ctx, representer(ctx, i), j)
            want = representer(ctx, min(i, j - 1))
            assert np.max(np.abs(p - want)) <= 1e-12


@given(
    h=st.sampled_from([0.1, 0.25, 0.4, 0.5]),
    j=st.integers(1, 8),
    seed=st.integers(0, 10_000),
)
@settings(max_examples=60, deadline=None)
def test_projection_orthogonality_property(h: float, j: int, seed: int) -> None:
    ctx = make_ctx(h=h, n=8)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=ctx.n)
    g = rng.normal(size=ctx.n)
    g[j:] = 0.0
    p = project_adapted(ctx, c, j)
    assert abs(inner_product(ctx, c - p, g)) <= 1e-10


def test_solve_leading_matches_dense_solve() -> None:
    ctx = make_ctx(h=0.25, n=12)
    rng = np.random.default_rng(15)
    for j in (1, 3, 7, 12):
        b = rng.normal(size=j)
        got = ctx.solve_leading(j, b)
        want = np.linalg.solve(ctx.sigma[:j, :j], b)
        assert np.max(np.abs(got - want)) <= 1e-9
