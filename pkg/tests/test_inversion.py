import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algphase.basis import principal_basic_set_from_geometry
from algphase.crystal import CrystalStructure, IntensitySet, PattersonMap, compute_patterson, patterson_window
from algphase.errors import InconsistentDataError
from algphase.generate import generate_random_structure, random_patterson_map
from algphase.inversion import (
    ResolventPolynomial,
    deconvolve_to_atoms,
    patterson_distance,
    recover_patterson,
    resolvent_from_zero,
    roots_on_unit_circle,
    structure_distance,
)
from algphase.lattice import shape_profile


def data_for(p, margin=4):
    b = principal_basic_set_from_geometry(p)
    ext = int(np.abs(np.array(b.reflections + b.zeros)).max())
    return b, patterson_window(p, (ext + margin,) * p.dimension)


def test_roots_z2_plus_1():
    r = roots_on_unit_circle(ResolventPolynomial(np.array([1.0, 0.0, 1.0])))
    np.testing.assert_allclose(r, [1j, -1j], atol=1e-12)


def test_roots_z_plus_1():
    np.testing.assert_allclose(roots_on_unit_circle(ResolventPolynomial(np.array([1.0, 1.0]))), [-1], atol=1e-14)


def test_roots_off_circle():
    with pytest.raises(InconsistentDataError):
        roots_on_unit_circle(ResolventPolynomial(np.array([-2.0, 1.0])))
    with pytest.raises(ValueError):
        roots_on_unit_circle(ResolventPolynomial(np.array([1.0])))


@given(st.integers(0, 2**32), st.integers(1, 8), st.sampled_from(["xray", "neutron"]))
def test_resolvent_roots_are_projections(seed, nbar, mode):
    p = random_patterson_map(seed, nbar, 2, mode)
    b, i = data_for(p)
    roots = roots_on_unit_circle(resolvent_from_zero(b, i))
    xs = np.unique(np.round(shape_profile(p).coords[:, 0], 9))
    expected = np.exp(-2j * np.pi * xs)
    expected = expected[np.argsort(np.mod(np.angle(expected), 2 * np.pi))]
    assert len(roots) == len(xs)
    np.testing.assert_allclose(roots, expected, atol=1e-6)


def test_recover_pair(pair_map):
    b, i = data_for(pair_map)
    rec = recover_patterson(i, b)
    assert patterson_distance(rec.patterson, pair_map) < 1e-10
    assert rec.nbar == 2


def test_recover_single_centre():
    p = PattersonMap(2, [1.7], [(0.5, 0.5)])
    b, i = data_for(p)
    rec = recover_patterson(i, b)
    assert patterson_distance(rec.patterson, p) < 1e-10


@given(st.integers(0, 2**32), st.integers(1, 8), st.sampled_from(["xray", "neutron"]))
def test_recover_random_2d(seed, nbar, mode):
    p = random_patterson_map(seed, nbar, 2, mode)
    b, i = data_for(p)
    rec = recover_patterson(i, b)
    assert patterson_distance(rec.patterson, p) < 1e-6
    assert rec.fit_residual < 1e-6


@given(st.integers(0, 2**32), st.integers(1, 6))
def test_recover_random_3d(seed, nbar):
    p = random_patterson_map(seed, nbar, 3, "neutron")
    b, i = data_for(p, 3)
    assert patterson_distance(recover_patterson(i, b).patterson, p) < 1e-6


def test_recover_rejects_bad_data(pair_map):
    b, i = data_for(pair_map)
    entries = dict(i.items())
    entries[(1, 0)] = 1.0
    bad = IntensitySet(2, entries)
    with pytest.raises(InconsistentDataError):
        recover_patterson(bad, b)


def test_patterson_distance_sizes(pair_map):
    assert patterson_distance(pair_map, PattersonMap(2, [1.0], [(0.5, 0.0)])) == np.inf
    assert patterson_distance(pair_map, pair_map) == 0.0


def test_deconvolve_two_atoms():
    s = CrystalStructure([1.0, 2.0], [(0.1, 0.2), (0.45, 0.8)])
    sols = deconvolve_to_atoms(compute_patterson(s), 2, [1.0, 2.0])
    assert len(sols) == 2
    assert all(structure_distance(s, x) < 1e-12 for x in sols)


def test_deconvolve_one_atom():
    sols = deconvolve_to_atoms(PattersonMap(2, [], np.zeros((0, 2))), 1, [2.0])
    assert len(sols) == 1
    np.testing.assert_array_equal(sols[0].positions, [[0.0, 0.0]])


def test_deconvolve_limits(pair_map):
    with pytest.raises(ValueError):
        deconvolve_to_atoms(pair_map, 7, [1.0] * 7)
    with pytest.raises(ValueError):
        deconvolve_to_atoms(pair_map, 2, [1.0])


def test_deconvolve_no_match(pair_map, caplog):
    assert deconvolve_to_atoms(pair_map, 3, [1.0, 1.0, 1.0]) == []
    assert "reproduces" in caplog.text


@given(st.integers(0, 2**32), st.integers(2, 4), st.sampled_from(["xray", "neutron"]))
def test_deconvolve_random(seed, n, mode):
    s = generate_random_structure(seed, n, 2, mode=mode)
    sols = deconvolve_to_atoms(compute_patterson(s), n, s.charges)
    assert min(structure_distance(s, x) for x in sols) < 1e-9
    for x in sols:
        assert patterson_distance(compute_patterson(x), compute_patterson(s)) < 1e-6


@given(st.integers(0, 2**32), st.integers(1, 5))
def test_structure_distance_invariances(seed, n):
    s = generate_random_structure(seed, n, 2)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, 2)
    perm = rng.permutation(n)
    moved = CrystalStructure(s.charges[perm], np.mod(-s.positions[perm] + t, 1.0))
    assert structure_distance(s, moved) < 1e-12
    assert structure_distance(s, generate_random_structure(seed, n + 1, 2)) == np.inf
