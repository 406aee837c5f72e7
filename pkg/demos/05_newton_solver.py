# %% [markdown]
# # Solving for a soliton potential
#
# In one dimension the equation integrates in closed form.  In higher
# dimension ``solve_newton`` corrects the Guillemin potential by a polynomial
# so that the modified scalar curvature vanishes at collocation points.

# %%
import numpy as np

from toricsolitons import SolveConfig, chern_scalar, interior_grid, load_polytope, solve_1d, solve_newton, solve_soliton_vf
from toricsolitons.solve import polytope_bump

res = solve_1d(load_polytope("interval"))
print(res.converged, res.defects)
print(solve_1d(load_polytope("interval"), (0.5, 0.0)).defects)  # no soliton with a != 0

# %% [markdown]
# CP2 from a perturbed start: Newton returns to Fubini-Study.

# %%
P = load_polytope("CP2")
bump = polytope_bump(P)
res = solve_newton(P, None, SolveConfig(), initial=lambda z: 0.05 * bump(z))
print("history", ["%.1e" % h for h in res.history])
print("sup |s^c - 2|", np.abs(chern_scalar(res.field, interior_grid(P, 20, 0.05)) - 2).max())

# %% [markdown]
# Bl1CP2 with its soliton vector field.  The Guillemin potential is not a
# soliton there; the residual drops by about four orders of magnitude at the
# default polynomial degree.

# %%
P = load_polytope("Bl1CP2")
a, _ = solve_soliton_vf(P)
res = solve_newton(P, a, SolveConfig())
print("reduction %.1e, final %.1e, boundary ok %s" % (res.reduction, res.history[-1], res.boundary.passed))
