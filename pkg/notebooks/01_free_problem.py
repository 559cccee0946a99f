# %% [markdown]
# # The free problem
#
# On (0, pi) with p = r = 1 and q = 0 every object has a closed form,
# which makes it the first thing to check any numerical construction
# against.  This script computes spectra and the Dirichlet-to-Neumann
# map and sets them next to the trigonometric answers.

# %%
import math

import numpy as np

from sl_krein import DIRICHLET, NEUMANN, PERIODIC, preset
from sl_krein.bdm import bdm_matrix
from sl_krein.spectra import eigenvalues

free_pi, free_unit = preset("free-pi"), preset("free-unit")

# %% [markdown]
# Dirichlet eigenvalues on (0, pi) are n^2.  The window edges must avoid
# eigenvalues, so (0.5, 100.5) is used instead of (0.5, 100).

# %%
spec = eigenvalues(free_pi, DIRICHLET, (0.5, 100.5))
print("Dirichlet on (0, pi):", np.round(spec.values, 10))
print("max error:", np.abs(spec.values - np.arange(1, 11) ** 2).max())

# %% [markdown]
# Periodic conditions on (0, 1) have eigenvalues (2 pi k)^2, each doubly
# degenerate except k = 0.  The solver reports the multiplicity.

# %%
for lam, mult in eigenvalues(free_unit, PERIODIC, (-0.5, 200)).eigenvalues:
    print(f"{lam:12.8f}  (2 pi)^-2 * lambda = {lam / (2 * math.pi) ** 2:.6f}  mult {mult}")

# %% [markdown]
# The Dirichlet-to-Neumann map at z = -1 is
# [[-coth 1, csch 1], [csch 1, -coth 1]], and its determinant equals -z
# everywhere off the spectrum.

# %%
M = bdm_matrix(free_unit, DIRICHLET, NEUMANN, -1)
print(M.real)
for z in (-1, 2 + 3j, 50.5, -300):
    d = np.linalg.det(bdm_matrix(free_unit, DIRICHLET, NEUMANN, z))
    print(f"z = {z!s:>8}: det = {d:.10f}")
