"""
The full round trip
===================

``run_structure`` chains synthesis, basic-set search, checks, extension,
Patterson recovery and deconvolution, and reports an exit code: 0 on success,
2 when the window is too small, 1 for any other failure. The same run is
available as ``algphase pipeline structure.txt``.
"""

# %%
from algphase import RunConfig, generate_random_structure, run_structure

s = generate_random_structure(seed=4, n_atoms=4, mode="neutron")
res = run_structure(RunConfig(), s)
print(res.exit_code, res.message)
for note in res.diagnostics:
    print("note:", note)

# %%
small = run_structure(RunConfig(window=(3, 2)), s)
print(small.exit_code, small.message)
