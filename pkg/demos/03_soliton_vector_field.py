# %% [markdown]
# # Futaki invariant and the soliton vector field
#
# A soliton can only exist when the Futaki invariant vanishes on affine
# functions.  For symmetric polytopes this happens at ``a = 0``; the blow-up
# of CP2 at a point needs a nonzero vector field along the diagonal.

# %%
import json

from toricsolitons import futaki_vector, load_polytope, normalization_residual, solve_soliton_vf

for name in ["CP2", "CP1xCP1", "Bl1CP2", "Bl2CP2", "Bl3CP2"]:
    P = load_polytope(name)
    a, rep = solve_soliton_vf(P)
    print(f"{name:8s} a = {[round(x, 12) for x in a.a]}  iterations = {rep.iterations}")

# %% [markdown]
# At ``a = 0`` Bl1CP2 has a nonzero invariant; the solved vector field kills
# it.  The constant term comes out zero, so the normalization
# ``int f e^{-2f} = 0`` holds as well.

# %%
P = load_polytope("Bl1CP2")
print("F at a = 0:", futaki_vector(P, None))
a, rep = solve_soliton_vf(P)
print(json.dumps(rep.to_dict(), indent=1)[:400])
print("normalization residual:", normalization_residual(P, a))
