"""Expansion coefficients and recursive extension of the diffraction pattern.

Every lattice vector is a combination of the basic-set vectors,
``|h> = sum_j A_{h,j} |k_j>``. The coefficients solve the KH system
``sum_j A_{h,j} I_{k_l - k_j} = I_{k_l - h}`` and then
``I_h = sum_j A_{h,j} I_{k_j}``. Because the KH matrix over a set is unchanged
when every reflection is shifted by the same vector, the same factorization
also gives ``I_h = sum_j A_{h-m,j} I_{k_j+m}`` for any shift ``m``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .basis import BasicSet, spectral_ratio
from .crystal import IntensitySet, box, canonical
from .errors import MissingReflectionError, ReconstructionStall, SingularBasisError
from .lattice import RANK_TOL, kh_matrix


@dataclass(frozen=True)
class ExpansionRow:
    """Coefficients of ``|h - shift>`` on the basic-set vectors."""

    h: tuple
    coefficients: np.ndarray
    shift: tuple | None = None


@dataclass(frozen=True)
class CompletenessSets:
    """Complete set ``C`` (basic-set differences) and complementary set ``F``."""

    C: frozenset
    F: frozenset

    def union(self) -> list[tuple]:
        return sorted(self.C | self.F)


def _key(h) -> tuple:
    return tuple(int(x) for x in h)


def _sub(a, b) -> tuple:
    return tuple(int(x) - int(y) for x, y in zip(a, b))


def _add(a, b) -> tuple:
    return tuple(int(x) + int(y) for x, y in zip(a, b))


class Expander:
    """Solver for expansion rows over a fixed basic set.

    By default the square KH matrix over the basic set is factored once.
    With ``rows`` the coefficients instead solve the overdetermined system
    ``sum_j A_{h,j} I_{s - k_j} = I_{s - h}`` over the reflections ``s`` in
    ``rows`` by least squares. This loses one factor of the lattice-matrix
    condition number instead of two, which matters when the data carry
    rounding errors. ``intensities`` may be any mapping from canonical
    reflections to subtracted intensities and may grow between calls.
    """

    def __init__(
        self,
        b: BasicSet | Sequence,
        intensities: Mapping,
        rel_tol: float = RANK_TOL,
        rows: Sequence | None = None,
    ):
        refs = b.reflections if isinstance(b, BasicSet) else tuple(_key(h) for h in b)
        self.basis = tuple(refs)
        self.intensities = intensities
        self.kh = kh_matrix(intensities, self.basis).matrix
        self.rows = self.basis if rows is None else tuple(_key(s) for s in rows)
        if rows is None:
            system = self.kh
        else:
            system = np.array([[self._lookup(_sub(s, k)) for k in self.basis] for s in self.rows])
        ratio = spectral_ratio(system)
        if ratio < rel_tol:
            raise SingularBasisError(
                f"expansion system over the {len(refs)}-element set is singular "
                f"(spectral ratio {ratio:.3g})"
            )
        if rows is None:
            self.lu = scipy.linalg.lu_factor(system)
        else:
            self.qr = np.linalg.qr(system)

    def _lookup(self, h) -> float:
        key = canonical(h)
        if key not in self.intensities:
            raise MissingReflectionError(key, "expansion")
        return float(self.intensities[key])

    def _available(self, h) -> bool:
        return canonical(h) in self.intensities

    def needs(self, h, shift=None) -> list[tuple]:
        """Reflections whose intensities the row for ``h`` (with ``shift``) uses."""
        m = tuple([0] * len(h)) if shift is None else _key(shift)
        target = _sub(h, m)
        out = [_sub(s, target) for s in self.rows]
        out += [_add(k, m) for k in self.basis]
        return out

    def ready(self, h, shift=None) -> bool:
        return all(self._available(r) for r in self.needs(h, shift))

    def row(self, h, shift=None) -> ExpansionRow:
        """Solve for ``A_{h-shift}``; ``shift`` defaults to the origin."""
        h = _key(h)
        m = tuple([0] * len(h)) if shift is None else _key(shift)
        target = _sub(h, m)
        rhs = np.array([self._lookup(_sub(s, target)) for s in self.rows])
        if hasattr(self, "lu"):
            coef = scipy.linalg.lu_solve(self.lu, rhs)
        else:
            q, r = self.qr
            coef = scipy.linalg.solve_triangular(r, q.T @ rhs)
        return ExpansionRow(target, coef, m)

    def predict(self, h, shift=None) -> float:
        """``I_h`` from the row of ``h - shift`` and the intensities at ``k_j + shift``."""
        row = self.row(h, shift)
        vals = np.array([self._lookup(_add(k, row.shift)) for k in self.basis])
        return float(row.coefficients @ vals)


def hull_rows(b: BasicSet, margin: int = 1) -> list[tuple]:
    """Bounding box of the basic set grown by ``margin``: rows for least squares."""
    arr = np.array(b.reflections)
    lo, hi = arr.min(axis=0) - margin, arr.max(axis=0) + margin
    return [tuple(int(x) for x in h) for h in itertools.product(*[range(a, c + 1) for a, c in zip(lo, hi)])]


def expansion_coefficients(b: BasicSet, i: IntensitySet, h, rel_tol: float = RANK_TOL) -> ExpansionRow:
    """Row ``A_{h, 1..N}`` of coefficients of ``|h>`` on the basic set."""
    return Expander(b, i, rel_tol).row(h)


def completeness_sets(b: BasicSet) -> CompletenessSets:
    """``C`` = pairwise differences of the basic set, ``F`` = zero-minus-basis
    differences (and their Friedel mates) not already in ``C``."""
    refs = list(b.reflections)
    c = {_sub(x, y) for x in refs for y in refs}
    f = set()
    for z in b.zeros:
        for k in refs:
            d = _sub(z, k)
            f.add(d)
            f.add(tuple(-x for x in d))
    return CompletenessSets(frozenset(c), frozenset(f - c))


def chebyshev_order(refs: Iterable) -> list[tuple]:
    """Expanding Chebyshev shells from the origin, lexicographic within a shell."""
    return sorted({_key(h) for h in refs}, key=lambda h: (max(abs(x) for x in h), h))


def _shifts(h: tuple, center: np.ndarray, zeros: Sequence[tuple]) -> list[tuple]:
    """Shifts to try for ``h``: origin, recurrences from each KH zero, then
    shifts that centre ``h - m`` on the basic set."""
    zero = tuple([0] * len(h))
    out = [zero]
    for z in zeros:
        m = _sub(h, z)
        if m not in out:
            out.append(m)
    base = np.rint(np.asarray(h) / 2.0 - center).astype(int)
    for d in itertools.product((0, -1, 1), repeat=len(h)):
        m = tuple(int(x) for x in base + np.array(d))
        if m not in out:
            out.append(m)
    return out


def extend_pattern(
    i0: Mapping,
    b: BasicSet,
    window: Sequence[int],
    rel_tol: float = RANK_TOL,
) -> IntensitySet:
    """Fill every reflection of the box ``window`` starting from ``i0``.

    Unknown reflections are visited shell by shell. A reflection is computed
    as soon as one shift makes all needed intensities available; passes
    repeat until the window is full or nothing changes. The origin shift is
    tried first, then the recurrences ``I_{z+t} = sum_j A_{z,j} I_{k_j+t}``
    of the KH zeros ``z``, then shifts that centre ``h - m`` on the basic set. Raises
    :class:`ReconstructionStall` with the partial result when stuck.
    """
    dim = len(window)
    known: dict[tuple, float] = {canonical(h): float(v) for h, v in i0.items()}
    sum_zsq = getattr(i0, "sum_zsq", None)
    exp = Expander(b, known, rel_tol)
    center = np.mean(np.array(b.reflections, dtype=float), axis=0)
    todo = [h for h in chebyshev_order(canonical(h) for h in box(window)) if h not in known]
    while todo:
        left = []
        for h in todo:
            for target in (h, tuple(-x for x in h)):
                m = next((m for m in _shifts(target, center, b.zeros) if exp.ready(target, m)), None)
                if m is not None:
                    known[h] = exp.predict(target, m)
                    break
            else:
                left.append(h)
        if len(left) == len(todo):
            partial = IntensitySet(dim, known, sum_zsq)
            raise ReconstructionStall(partial, left)
        todo = left
    return IntensitySet(dim, known, sum_zsq)


@dataclass(frozen=True)
class ConsistencyReport:
    max_violation: float
    violations: tuple

    def ok(self, tol: float = 1e-8) -> bool:
        return self.max_violation < tol


def check_consistency(b: BasicSet, rows, pairs: Iterable) -> ConsistencyReport:
    """Check ``A_{h-h'} = sum_{j,j'} A_{h,j} A_{h',j'} A_{k_j-k_j'}``.

    ``rows`` is an :class:`Expander` or a mapping from reflections to
    :class:`ExpansionRow`. Coefficients are real for real intensities, so
    conjugation is omitted.
    """
    get = rows.row if isinstance(rows, Expander) else (lambda h: rows[_key(h)])
    refs = b.reflections
    n = len(refs)
    t = np.empty((n, n, n))
    for a, kj in enumerate(refs):
        for c, kk in enumerate(refs):
            t[a, c] = get(_sub(kj, kk)).coefficients
    out = []
    for h, hp in pairs:
        lhs = get(_sub(h, hp)).coefficients
        rhs = np.einsum("j,k,jkl->l", get(h).coefficients, get(hp).coefficients, t)
        out.append(float(np.max(np.abs(lhs - rhs))))
    return ConsistencyReport(max(out) if out else 0.0, tuple(out))
