import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algphase.basis import BasicSet, principal_basic_set_from_geometry
from algphase.crystal import CrystalStructure, PattersonMap, canonical, patterson_window, synth_window
from algphase.errors import ReconstructionStall, SingularBasisError
from algphase.generate import random_patterson_map
from algphase.lattice import build_V, kh_matrix
from algphase.reconstruction import (
    Expander,
    check_consistency,
    chebyshev_order,
    completeness_sets,
    expansion_coefficients,
    extend_pattern,
    hull_rows,
)

maps = st.builds(
    random_patterson_map, st.integers(0, 2**32), st.integers(1, 8), st.just(2), st.sampled_from(["xray", "neutron"])
)


def geometry(p, margin=6):
    b = principal_basic_set_from_geometry(p)
    ext = np.abs(np.array(b.reflections + b.zeros)).max()
    return b, patterson_window(p, (int(ext) + margin,) * 2)


def test_unit_rows():
    p = random_patterson_map(2, 5, 2, "neutron")
    b, i = geometry(p)
    ex = Expander(b, i)
    for j, k in enumerate(b.reflections):
        np.testing.assert_allclose(ex.row(k).coefficients, np.eye(len(b))[j], atol=1e-10)


def test_single_centre_row():
    p = PattersonMap(2, [2.0], [(0.5, 0.0)])
    b = BasicSet(((0, 0),), zeros=((1, 0), (0, 1)))
    i = patterson_window(p, (2, 2))
    assert expansion_coefficients(b, i, (1, 0)).coefficients[0] == pytest.approx(-1.0)
    assert expansion_coefficients(b, i, (0, 1)).coefficients[0] == pytest.approx(1.0)


@given(maps, st.integers(-5, 5), st.integers(-5, 5))
def test_rows_match_lattice_solve(p, h, k):
    b, i = geometry(p)
    got = Expander(b, i).row((h, k)).coefficients
    v = build_V(p, b.reflections)
    expected = np.linalg.solve(v, build_V(p, [(h, k)])[:, 0])
    assert np.max(np.abs(expected.imag)) < 1e-6 * max(1.0, np.max(np.abs(expected)))
    np.testing.assert_allclose(got, expected.real, atol=1e-6 * max(1.0, np.max(np.abs(expected))))


@given(maps, st.integers(-4, 4), st.integers(-4, 4))
def test_friedel_predictions_agree(p, h, k):
    b, i = geometry(p, 8)
    ex = Expander(b, i, rows=hull_rows(b, 1))
    scale = np.abs(p.weights).sum()
    assert abs(ex.predict((h, k)) - ex.predict((-h, -k))) < 1e-8 * scale
    assert abs(ex.predict((h, k)) - i[(h, k)]) < 1e-8 * scale


@given(maps, st.integers(-4, 4), st.integers(-4, 4))
def test_solve_residual(p, h, k):
    b, i = geometry(p)
    ex = Expander(b, i)
    a = ex.row((h, k)).coefficients
    rhs = [i[canonical(np.subtract(s, (h, k)))] for s in b.reflections]
    assert np.max(np.abs(kh_matrix(i, b.reflections).matrix @ a - rhs)) < 1e-9 * np.abs(p.weights).sum()


def test_singular_basis():
    p = PattersonMap(2, [1.0, 1.0], [(0.25, 0.0), (0.75, 0.0)])
    with pytest.raises(SingularBasisError):
        Expander(BasicSet(((0, 0), (1, 0), (2, 0))), patterson_window(p, (4, 4)))


def test_completeness_pair():
    b = BasicSet(((0, 0), (1, 0)), zeros=((2, 0), (0, 1)))
    cf = completeness_sets(b)
    assert cf.C == {(0, 0), (1, 0), (-1, 0)}
    assert cf.F == {(2, 0), (-2, 0), (0, 1), (0, -1), (-1, 1), (1, -1)}
    assert not cf.C & cf.F


def test_chebyshev_order():
    got = chebyshev_order([(1, 1), (0, 0), (-1, 0), (2, 0), (0, 1)])
    assert got == [(0, 0), (-1, 0), (0, 1), (1, 1), (2, 0)]


def test_extend_within_complete_set(pair_map):
    b = principal_basic_set_from_geometry(pair_map)
    i = patterson_window(pair_map, (4, 4))
    i0 = i.restricted(completeness_sets(b).union())
    out = extend_pattern(i0, b, (2, 0))
    for h in [(0, 0), (1, 0), (2, 0)]:
        assert out[h] == i0[h]


def test_two_atom_extension():
    s = CrystalStructure([1.0, 2.0], [(0.1, 0.2), (0.45, 0.8)])
    full = synth_window(s, (4, 4))
    b = principal_basic_set_from_geometry(PattersonMap(2, *_pattern_args(s)))
    out = extend_pattern(full.restricted(completeness_sets(b).union()), b, (4, 4))
    for h in full:
        assert out[h] == pytest.approx(full[h], abs=1e-10)


def _pattern_args(s):
    from algphase.crystal import compute_patterson

    p = compute_patterson(s)
    return p.weights, p.deltas


@given(st.integers(0, 2**32), st.integers(1, 8), st.sampled_from(["xray", "neutron"]))
def test_extension_from_complete_set(seed, nbar, mode):
    p = random_patterson_map(seed, nbar, 2, mode)
    b = principal_basic_set_from_geometry(p)
    w = (max(6, nbar + 1),) * 2
    full = patterson_window(p, w)
    i0 = full.restricted(completeness_sets(b).union())
    out = extend_pattern(i0, b, w, rel_tol=1e-12)
    err = max(abs(out[h] - full[h]) for h in full)
    assert err <= 1e-6 * np.abs(p.weights).sum()


def test_stall_reports_gaps(pair_map):
    b = BasicSet(((0, 0), (1, 0)))
    i0 = patterson_window(pair_map, (1, 0))
    with pytest.raises(ReconstructionStall) as err:
        extend_pattern(i0, b, (1, 1))
    assert err.value.gaps
    assert set(i0) <= set(err.value.partial)


@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(0, 2**32))
def test_consistency(seed, nbar, pick):
    p = random_patterson_map(seed, nbar, 2, "neutron")
    b = principal_basic_set_from_geometry(p)
    i = patterson_window(p, (20, 20))
    ex = Expander(b, i, rows=hull_rows(b, 1))
    rng = np.random.default_rng(pick)
    pairs = [(tuple(rng.integers(-4, 5, 2)), tuple(rng.integers(-4, 5, 2))) for _ in range(5)]
    assert check_consistency(b, ex, pairs).ok(1e-8)


def test_consistency_detects_bad_rows(pair_map):
    b = principal_basic_set_from_geometry(pair_map)
    ex = Expander(b, patterson_window(pair_map, (6, 6)))
    rows = {}
    for h in [(0, 0), (1, 0), (-1, 0), (2, 0), (3, 0), (1, 0)]:
        rows[h] = ex.row(h)
    good = check_consistency(b, rows, [((3, 0), (1, 0))])
    assert good.ok()
    r = rows[(2, 0)]
    rows[(2, 0)] = type(r)(r.h, r.coefficients + 0.1, r.shift)
    assert not check_consistency(b, rows, [((3, 0), (1, 0))]).ok()
