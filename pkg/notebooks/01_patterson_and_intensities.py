"""
Structures, Patterson maps and intensities
==========================================

A point-atom crystal is a list of charges and fractional positions. Its
Patterson map holds one centre per ordered pair of distinct atoms, at the
difference vector, weighted by the product of the charges. The subtracted
intensity at a reflection is the Fourier transform of that map.
"""

# %%
import numpy as np

from algphase import CrystalStructure, compute_patterson, observed_intensity, subtracted_intensity

s = CrystalStructure([1.0, 2.0, 1.5], [(0.1, 0.2), (0.45, 0.8), (0.7, 0.35)])
p = compute_patterson(s)
print(p.nbar, "centres")
for w, d in zip(p.weights, p.deltas):
    print(f"  weight {w:5.2f} at {np.round(d, 3)}")

# %%
# Observed and subtracted intensities differ by the sum of squared charges.
h = (1, 2)
print(observed_intensity(s, h) - s.sum_zsq, subtracted_intensity(p, h))

# %%
# Translating the crystal leaves every intensity unchanged; so does inversion.
moved = s.translated([0.3, 0.1])
print(subtracted_intensity(compute_patterson(moved), h), subtracted_intensity(compute_patterson(s.inverted()), h))
