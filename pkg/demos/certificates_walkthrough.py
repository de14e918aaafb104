# Dual certificates for two spikes.
#
# We compute the admissible constants, build interpolating and derivative
# certificates on a two-spike support and check every clause on a grid.

import numpy as np

from offgrid.certificates import optimal_radius, theoretical_constants, verify_assumptions
from offgrid.experiments import centred_support
from offgrid.kernel import gaussian_limit, gaussian_limit_constants, gaussian_scenario
from offgrid.separation import coherence, delta_hat

L = gaussian_limit_constants()
r = optimal_radius(L, rho=2.0)
c = theoretical_constants(L, r, rho=2.0)
print(f"near radius {r:.4f}  H1 {c.H1:.3e}  H2 {c.H2:.3e}")
print(f"C_N {c.C_N:.3e}  C_N' {c.C_N_prime:.4f}  C_F {c.C_F:.3e}  c_N {c.c_N:.4f}  c_F {c.c_F:.4f}")

# %% how far apart must two spikes be for the coherence to fall below 0.9 H2?
lim = gaussian_limit(1.0, (-40, 40))
print("required gap in the limit:", delta_hat(lim, 0.9 * c.H2, 2, restarts=8))

# %% check both certificate kinds at gap 9 on a grid
ctx = gaussian_scenario(2048)
support = centred_support(ctx, 2, 9.0)
print("support", support, "coherence", coherence(ctx, support))
report = verify_assumptions(ctx, support, c)
for res in report.results[:7]:
    print(f"{res.kind:14s} {str(res.signs):12s} {res.clause:11s} margin {res.margin: .3e}")
print("all clauses hold:", report.passed)

# %% and at a gap that is too small
close = verify_assumptions(ctx, centred_support(ctx, 2, 1.5), c)
print("gap 1.5 failures:", sorted({f.clause for f in close.failures()}))
