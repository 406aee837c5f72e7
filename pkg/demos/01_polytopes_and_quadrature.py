# %% [markdown]
# # Polytopes and quadrature
#
# The catalog ships the five smooth reflexive polygons plus the interval, the
# 3-simplex and the cube.  Each is checked at load time.

# %%
import numpy as np

from toricsolitons.polytope import catalog_names, is_delzant, is_reflexive, load_polytope, quadrature, vertices

for name in catalog_names():
    P = load_polytope(name)
    print(f"{name:10s} n={P.dim} facets={len(P.facets)} delzant={is_delzant(P)[0]} reflexive={is_reflexive(P)}")

# %% [markdown]
# Vertices carry the facets that meet there.  For the blow-up of CP2 at a point:

# %%
for v in vertices(load_polytope("Bl1CP2")):
    print(v.point, v.active)

# %% [markdown]
# The boundary measure divides Euclidean length by the length of the primitive
# normal.  On the CP2 triangle every edge then has measure 3, and for a
# reflexive polytope the boundary total is n times the volume.

# %%
Q = quadrature(load_polytope("CP2"), 8)
print("area", Q.weights.sum(), "boundary", Q.all_boundary_weights.sum())
print("per facet", [w.sum() for w in Q.boundary_weights])

# %%
# an exponential weight, as it appears in the Futaki invariant
print(Q.integrate(lambda z: np.exp(-2 * (0.3 * z[:, 0] - 0.1 * z[:, 1]))))
