# %% [markdown]
# # Trace formula and spectral shift
#
# For Dirichlet against Neumann on the unit interval the determinant of
# the boundary data map is -z, so -d/dz ln det equals -1/z.  The sum over
# eigenvalues must reproduce the same number, and the spectral shift
# function is -1 on (0, infinity).

# %%
import numpy as np

from sl_krein import DIRICHLET, NEUMANN, PERIODIC, preset
from sl_krein.shift import ssf_boundary, ssf_counting, trace_formula_check

free_unit = preset("free-unit")

# %%
for z in (-1.0, -3.0, 2 + 2j):
    t = trace_formula_check(free_unit, DIRICHLET, NEUMANN, z, 20)
    print(f"z = {z!s:>7}: lhs = {t.lhs:.8f}  rhs = {t.rhs:.8f}  -1/z = {-1 / z:.8f}")

# %% [markdown]
# Periodic conditions have double eigenvalues, so the shift function
# against Dirichlet oscillates between -1 and 0.  Counting and the
# boundary-value route should agree after rounding.

# %%
xi = ssf_counting(free_unit, DIRICHLET, PERIODIC, 200)
print("jumps:", [(round(at, 6), to) for at, to in xi.jumps])
lams = np.linspace(1, 199, 12)
near = [v for v in lams if min(abs(v - at) for at, _ in xi.jumps) > 1]
bv = ssf_boundary(free_unit, DIRICHLET, PERIODIC, near)
for lam, v in zip(near, bv):
    print(f"lambda = {lam:7.2f}: counting {xi(lam):+d}, boundary value {v:+.4f}")
