# %% [markdown]
# # Von Neumann unitaries
#
# Each self-adjoint extension corresponds to an isometry between the
# deficiency spaces at i and -i.  Its matrix is computed in two ways,
# through the boundary data map and through closed case formulas, and
# the two must agree.  Because the deficiency bases are not orthonormal,
# isometry means U* G_- U = G_+ for the Gram matrices.

# %%
import numpy as np

from sl_krein import CoupledBC, SeparatedBC, preset
from sl_krein.vonneumann import (
    isometry_residual,
    vn_route_check,
    vn_unitary_specialized,
)

step_q = preset("step-q")
rng = np.random.default_rng(0)

# %%
cases = [SeparatedBC(*(round(float(t), 4) for t in rng.uniform(0, np.pi, 2))) for _ in range(4)]
cases += [SeparatedBC(0.0, 0.0), CoupledBC(0.0, ((1, 0), (0, 1))), CoupledBC(0.7, ((1, 1), (0, 1)))]
for c in cases:
    bc = c.to_ab()
    r = vn_route_check(step_q, bc)
    iso = isometry_residual(vn_unitary_specialized(step_q, bc))
    print(f"{c!s:60.60}  route gap {r.residual:.1e}  isometry {iso:.1e}")

# %% [markdown]
# Dirichlet conditions give exactly -I in the two-point basis.

# %%
print(vn_unitary_specialized(step_q, SeparatedBC(0.0, 0.0).to_ab()).U.real)
