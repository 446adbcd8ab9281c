"""
Extending the pattern
=====================

Every reflection's lattice vector is a combination of the basic-set vectors.
The intensities over the complete set C (basic-set differences) and the
complementary set F (zeros minus basic set) determine all others.
"""

# %%
import numpy as np

from algphase import completeness_sets, extend_pattern, patterson_window, principal_basic_set_from_geometry
from algphase import random_patterson_map

p = random_patterson_map(seed=2, nbar=6, dimension=2, mode="xray")
b = principal_basic_set_from_geometry(p)
cf = completeness_sets(b)
print(len(cf.C), "reflections in C,", len(cf.F), "in F")

# %%
full = patterson_window(p, (8, 8))
start = full.restricted(cf.union())
out = extend_pattern(start, b, (8, 8), rel_tol=1e-16)
err = max(abs(out[h] - full[h]) for h in full) / np.abs(p.weights).sum()
print(f"{len(out)} reflections, max relative error {err:.2e}")
