"""
Finding a basic set from intensities
====================================

Scan rows along an axis, accepting reflections while their lattice vectors
stay independent. In neutron mode weights may be negative, so the test runs on
the square of the KH matrix over the difference-closed subset S1.
"""

# %%
from algphase import compute_S1, patterson_window, principal_basic_set_from_geometry, random_patterson_map
from algphase import search_basic_set

p = random_patterson_map(seed=11, nbar=6, dimension=2, mode="neutron")
i = patterson_window(p, (12, 8))
print("S1 holds", compute_S1(i).n1, "reflections")

# %%
b = search_basic_set(i, "neutron")
print("basic set", b.reflections)
print("KH zeros ", b.zeros)

# %%
# With the map known, the same set follows from the node grouping alone.
print(set(principal_basic_set_from_geometry(p).reflections) == set(b.reflections))

# %%
# A window too small for the scan raises instead of guessing.
try:
    search_basic_set(patterson_window(p, (1, 1)), "neutron")
except Exception as e:
    print(type(e).__name__, e)
