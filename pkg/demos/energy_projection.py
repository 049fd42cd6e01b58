"""Energy-space geometry at desk scale.

Builds a small fractional model, shows the reproducing property of the
representers, and compares the adapted projection with dense Gaussian
conditioning.  The Brownian case collapses to the familiar rule
P_s k_t = k_s.
"""

from __future__ import annotations

import numpy as np

from roughcalc import (CovarianceModel, GramContext, TimeGrid, inner_product,
                       project_adapted, representer)
from roughcalc.gaussian import conditional_law
from roughcalc.models import covariance

N = 8
H = 0.25


def main() -> None:
    grid = TimeGrid.uniform_grid(N)
    ctx = GramContext.build(CovarianceModel.fbm(H), grid)
    print(f"fractional model, H = {H}, n = {N} grid points on [0, 1]\n")

    t, s = grid.times[5], grid.times[2]
    k_t = representer(ctx, 5)
    k_s = representer(ctx, 2)
    print("reproducing property <k_t, k_s> = R(t, s):")
    print(f"  inner product   {inner_product(ctx, k_t, k_s):.12f}")
    print(f"  covariance      {covariance(ctx.model, t, s):.12f}\n")

    j = 4
    projected = project_adapted(ctx, k_t, j)
    law = conditional_law(ctx, j)
    print(f"adapted projection of k_t onto the first {j} coordinates")
    print("matches the conditional-mean regression row:")
    print(f"  projection coefficients  {np.round(projected[:j], 6)}")
    print(f"  regression row            {np.round(law.mean_map[5 - j], 6)}\n")

    bm = GramContext.build(CovarianceModel.bm(), grid)
    p = project_adapted(bm, representer(bm, 5), j)
    want = representer(bm, j - 1)
    print("Brownian case, P_s k_t = k_s:")
    print(f"  max coefficient gap  {np.max(np.abs(p - want)):.2e}")


if __name__ == "__main__":
    main()
