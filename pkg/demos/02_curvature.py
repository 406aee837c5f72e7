# %% [markdown]
# # Curvature of toric metrics
#
# A torus-invariant metric of involutive type is the matrix field ``H = G^{-1}``
# on the polytope.  The Guillemin potential gives a Kahler background; on the
# CP2 triangle it is Fubini-Study, so the Chern-Ricci form equals the identity
# and the Chern scalar curvature is 2.

# %%
import numpy as np

from toricsolitons import (SolitonVector, chern_ricci, chern_scalar, field_from_potential, guillemin_field,
                           interior_grid, load_polytope, modified_scalar, modified_scalar_divform,
                           soliton_residual)
from toricsolitons.curvature import samples_to_csv, sweep

P = load_polytope("CP2")
H = field_from_potential(guillemin_field(P))
Z = interior_grid(P, 20, 0.05)
print("sup |s^c - 2| =", np.abs(chern_scalar(H, Z) - 2).max())
print("rho at the centre:\n", chern_ricci(H, np.zeros((1, 2)))[0])
print("sup |S| =", np.abs(soliton_residual(H, None, Z)).max())

# %% [markdown]
# The modified scalar curvature has two expressions: the expanded one and the
# divergence form with the weight ``e^{-2f}``.  They agree for any field.

# %%
a = SolitonVector((0.4, -0.2, 0.1))
print(np.abs(modified_scalar(H, a, Z) - modified_scalar_divform(H, a, Z)).max())

# %% [markdown]
# Grid sweeps serialize to CSV for plotting elsewhere.

# %%
text = samples_to_csv(sweep(H, None, Z[:5]))
print(text.splitlines()[0])
