import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algphase.crystal import (
    CrystalStructure,
    IntensitySet,
    PattersonMap,
    box,
    canonical,
    compute_patterson,
    observed_intensity,
    patterson_window,
    subtracted_intensities,
    subtracted_intensity,
    synth_window,
)
from algphase.errors import InconsistentDataError, MissingReflectionError
from algphase.generate import generate_random_structure

from conftest import direct_intensity


def test_observed_single_atom():
    s = CrystalStructure([2.5], [(0.3, 0.7)])
    assert observed_intensity(s, (3, -2)) == pytest.approx(6.25)


def test_observed_interference():
    s = CrystalStructure([1.0, 1.0], [(0.0, 0.0), (0.5, 0.0)])
    assert observed_intensity(s, (1, 0)) == pytest.approx(0.0, abs=1e-15)
    assert observed_intensity(s, (2, 0)) == pytest.approx(4.0)


def test_patterson_single_atom_is_empty():
    p = compute_patterson(CrystalStructure([3.0], [(0.1, 0.2)]))
    assert p.nbar == 0
    assert subtracted_intensity(p, (1, 1)) == 0.0


def test_patterson_pair(pair_structure):
    p = compute_patterson(pair_structure)
    assert p.nbar == 2
    np.testing.assert_allclose(p.deltas, [[0.25, 0.0], [0.75, 0.0]])
    np.testing.assert_allclose(p.weights, [2.0, 2.0])


def test_patterson_cancellation():
    z = [1, -1, 1, 1]
    x = [0.0, 0.25, 0.5, 0.75]
    p = compute_patterson(CrystalStructure(z, [(a, 0) for a in x]))
    # independent sum over the 12 ordered pairs
    sums = {}
    for j in range(4):
        for k in range(4):
            if j != k:
                key = round((x[j] - x[k]) % 1.0, 6)
                sums[key] = sums.get(key, 0) + z[j] * z[k]
    assert sums[0.25] == 0
    assert p.find((0.25, 0.0)) is None
    assert p.nbar == sum(1 for v in sums.values() if v != 0)


def test_subtracted_examples(pair_map):
    assert subtracted_intensity(pair_map, (1, 0)) == pytest.approx(0.0, abs=1e-14)
    assert subtracted_intensity(pair_map, (2, 0)) == pytest.approx(-4.0)


def test_imaginary_residue_is_rejected():
    p = PattersonMap(2, [1.0], [(0.25, 0.0)], check=False)
    with pytest.raises(InconsistentDataError):
        subtracted_intensities(p, [(1, 0)])


def test_map_validation():
    with pytest.raises(ValueError):
        PattersonMap(2, [1.0], [(0.25, 0.0)])
    with pytest.raises(ValueError):
        PattersonMap(2, [1.0, 2.0], [(0.25, 0.0), (0.75, 0.0)])


def test_structure_validation():
    with pytest.raises(ValueError):
        CrystalStructure([1.0, 0.0], [(0, 0), (0.5, 0)])
    with pytest.raises(ValueError):
        CrystalStructure([1.0, 1.0], [(0.2, 0.3), (0.2, 0.3)])
    with pytest.raises(ValueError):
        CrystalStructure([1.0], [(0.1,)])


def test_window_single_atom_all_zero():
    i = synth_window(CrystalStructure([1.7], [(0.4, 0.1)]), (2, 2))
    assert all(abs(v) < 1e-12 for v in i.values())
    assert i.sum_zsq == pytest.approx(1.7**2)


def test_window_routes_agree(pair_structure):
    i = synth_window(pair_structure, (2, 1))
    p = compute_patterson(pair_structure)
    for h in box((2, 1)):
        assert i[h] == pytest.approx(subtracted_intensity(p, h), abs=1e-12)
    assert i[(1, 0)] == pytest.approx(0.0, abs=1e-12)


def test_intensity_set_friedel_storage():
    i = IntensitySet(2, {(1, 2): 3.0, (-1, -2): 3.0, (0, 1): -1.0})
    assert len(i) == 2
    assert i[(-1, -2)] == i[(1, 2)]
    assert (-1, -2) in i
    assert set(i.reflections()) == {(1, 2), (-1, -2), (0, 1), (0, -1)}
    with pytest.raises(MissingReflectionError):
        i[(5, 5)]
    with pytest.raises(ValueError):
        IntensitySet(2, {(1, 0): 1.0, (-1, 0): 2.0})


def test_canonical_is_larger_member():
    assert canonical((-1, 3)) == (1, -3)
    assert canonical((0, -2)) == (0, 2)
    assert canonical((2, -5)) == (2, -5)


@given(st.integers(0, 2**32), st.integers(1, 5), st.sampled_from([2, 3]))
def test_routes_agree_property(seed, n, d):
    s = generate_random_structure(seed, n, d, 0.05, (0.5, 3.0), "neutron")
    p = compute_patterson(s)
    rng = np.random.default_rng(seed)
    for h in rng.integers(-6, 7, size=(5, d)):
        direct = observed_intensity(s, h) - s.sum_zsq
        assert subtracted_intensity(p, h) == pytest.approx(direct, rel=1e-10, abs=1e-10 * s.sum_zsq)
        assert subtracted_intensity(p, h) == pytest.approx(
            direct_intensity(p.weights, p.deltas, h), abs=1e-10 * s.sum_zsq
        )


@given(st.integers(0, 2**32), st.integers(2, 5))
def test_translation_invariance(seed, n):
    s = generate_random_structure(seed, n, 2, 0.05, (0.5, 3.0), "neutron")
    shift = np.random.default_rng(seed).uniform(0, 1, 2)
    a = synth_window(s, (3, 3))
    b = synth_window(s.translated(shift), (3, 3))
    for h in a:
        assert a[h] == pytest.approx(b[h], abs=1e-10 * s.sum_zsq)
    pa, pb = compute_patterson(s), compute_patterson(s.translated(shift))
    np.testing.assert_allclose(pa.weights, pb.weights, rtol=1e-10)


@given(st.integers(0, 2**32), st.integers(1, 6))
def test_nbar_bound_and_positive_no_drop(seed, n):
    s = generate_random_structure(seed, n, 2, 0.05, (0.5, 3.0), "xray")
    p = compute_patterson(s)
    assert p.nbar == n * (n - 1)
    assert np.all(p.weights > 0)


@given(st.integers(0, 2**32))
def test_friedel_exact(seed):
    s = generate_random_structure(seed, 3, 2, 0.05, (0.5, 3.0), "neutron")
    i = patterson_window(compute_patterson(s), (2, 2))
    for h in i.reflections():
        assert i[h] == i[tuple(-x for x in h)]
