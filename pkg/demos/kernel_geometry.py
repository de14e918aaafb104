# Kernel geometry of Gaussian translates on a finite grid.
#
# Normalized Gaussian features sampled on T equispaced points induce a kernel
# and a Riemannian metric on the parameter line. As T grows (and the sampling
# window widens) both approach their continuous counterparts.

import numpy as np

from offgrid.kernel import (epsilon, epsilon_inf, gaussian_limit, gaussian_scenario, limit_compare, nu,
                            nu_inf)

# %% one grid, one limit
ctx = gaussian_scenario(1024, sigma0=1.0, shrink=0.5)
lim = gaussian_limit(1.0, ctx.window)
print("window", ctx.window, "grid points", ctx.measure.size)

th = np.linspace(*ctx.window, 7)
print("metric on the grid :", np.round(ctx.metric(th), 6))
print("metric in the limit:", np.round(lim.metric(th), 6))

# %% Riemannian distance is the Euclidean one scaled by 1/(sqrt(2) sigma0) in the limit
print("d(-1, 2) grid  =", float(ctx.distance(-1.0, 2.0)))
print("d(-1, 2) limit =", float(lim.distance(-1.0, 2.0)))

# %% how far is the grid kernel from the limit, up to second derivatives?
for T in (256, 1024, 4096):
    c = gaussian_scenario(T, shrink=0.5)
    cmp = limit_compare(c, gaussian_limit(1.0, c.window), np.linspace(*c.window, 81))
    print(f"T={T:5d}  V={cmp.V:.2e}  rho-1={cmp.rho - 1:.2e}")

# %% separation and curvature functions
for r in (0.25, 0.5, 1.0):
    print(f"r={r}: eps grid {epsilon(ctx, r):.5f} limit {float(epsilon_inf(r)):.5f} | "
          f"nu grid {nu(ctx, r):.5f} limit {float(nu_inf(r)):.5f}")
