# %% [markdown]
# # A strictly almost-Kahler deformation
#
# Starting from the Fubini-Study metric on CP2, add a compactly supported
# symmetric perturbation ``D`` that satisfies a divergence condition.  The
# family ``H + tD`` keeps the modified scalar curvature but is no longer Kahler.

# %%
import numpy as np

from toricsolitons import (build_deformation, chern_scalar, default_spec, field_from_potential, guillemin_field,
                           interior_grid, kahler_defect, load_polytope, verify_family)

P = load_polytope("CP2")
H = field_from_potential(guillemin_field(P))
fam = build_deformation(H, None, default_spec(P), P)
print("admissible t:", fam.t_minus, fam.t_plus)

# %%
rep = verify_family(fam)
print("divergence residual", rep["divergence_residual"])
for s in rep["samples"]:
    print(f"t = {s['t']:+.3f}  drift {s['s_c_xi_drift']:.1e}  margin {s['positivity_margin']:.3f}  "
          f"Kahler defect {s['kahler_defect_center']:.3f}")

# %% [markdown]
# The deformed metric is still first-Chern-Einstein: ``s^c = 2`` everywhere.

# %%
Ht = fam.at(0.5 * fam.t_plus)
Z = interior_grid(P, 20, 0.05)
print(np.abs(chern_scalar(Ht, Z) - 2).max())
print(np.abs(kahler_defect(Ht, fam.center)).max())
