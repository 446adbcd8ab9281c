"""
Closed-form determinants
========================

Group the Patterson centres by their projection on an axis, then by the next
coordinate. The lattice matrix over the principal basic set has a product
determinant over differences of phase factors within each level, and the
KH determinant factorizes as the product of weights times its squared modulus.
"""

# %%
import numpy as np

from algphase import (
    kh_det_closed_form,
    numeric_det,
    principal_vandermonde,
    random_patterson_map,
    shape_profile,
    vandermonde_det_closed_form,
)

p = random_patterson_map(seed=3, nbar=7, dimension=2, mode="neutron", reuse=0.8)
sh = shape_profile(p)
print("column heights", sh.heights, "row widths", sh.widths)
print("principal set", sh.principal_reflections())

# %%
closed = vandermonde_det_closed_form(p, sh)
numeric = numeric_det(principal_vandermonde(p, sh))
print(f"det V  closed {closed:.6g}  numeric {numeric:.6g}")

# %%
# The KH determinant carries the sign of the product of the weights.
print(f"det KH {kh_det_closed_form(p):.6g}  sign of prod(nu) {np.sign(np.prod(p.weights)):+.0f}")

# %%
# Three dimensions: slices along the axis need not be nested.
q = random_patterson_map(seed=5, nbar=6, dimension=3)
sh3 = shape_profile(q, "c")
print(vandermonde_det_closed_form(q, sh3), numeric_det(principal_vandermonde(q, sh3)))
