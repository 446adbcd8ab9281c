"""Point-atom crystals, their Patterson maps, and intensity synthesis.

Conventions
-----------
Positions are fractional coordinates in ``[0, 1)``. A reflection is a tuple
of integers. The *subtracted* intensity of a reflection ``h`` is the
observed intensity minus the sum of squared charges, which equals the
Fourier transform of the off-origin Patterson density::

    I_h = |sum_j Z_j exp(2 pi i h.r_j)|^2 - sum_j Z_j^2
        = sum_c nu_c exp(2 pi i h.delta_c)

Subtracted intensities are real and Friedel symmetric, so an
:class:`IntensitySet` stores one canonical representative per pair
``{h, -h}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InconsistentDataError, MissingReflectionError

#: Two coordinates closer than this on the unit circle are the same point.
MERGE_TOL = 1e-9
#: Patterson weights with ``|nu| <= WEIGHT_DROP * max|nu|`` count as cancelled.
WEIGHT_DROP = 1e-9

Reflection = tuple


def canonical(h: Sequence[int]) -> tuple:
    """Friedel representative of ``h``: the lexicographically larger of ``h``, ``-h``."""
    h = tuple(int(x) for x in h)
    neg = tuple(-x for x in h)
    return h if h >= neg else neg


def circle_distance(a, b):
    """Elementwise distance on the unit circle between fractional coordinates."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def wrap(x, tol: float = MERGE_TOL):
    """Reduce coordinates into ``[0, 1)``; values within ``tol`` of 1 snap to 0."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    return np.where(x > 1.0 - tol, 0.0, x)


def box(half_widths: Sequence[int]) -> list[tuple]:
    """All reflections of the box ``prod_d [-H_d, H_d]`` in lexicographic order."""
    ranges = [range(-int(hw), int(hw) + 1) for hw in half_widths]
    return [tuple(h) for h in itertools.product(*ranges)]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CrystalStructure:
    """Point atoms in the unit cell.

    ``charges`` are real and nonzero (atomic numbers for X-rays, scattering
    lengths for neutrons, possibly negative). ``positions`` has shape
    ``(N, D)``.
    """

    charges: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        charges = _frozen(self.charges).reshape(-1)
        positions = np.array(self.positions, dtype=float)
        if positions.ndim == 1:
            positions = positions.reshape(len(charges), -1)
        if positions.shape[0] != charges.shape[0]:
            raise ValueError("need one position per charge")
        if positions.shape[1] not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {positions.shape[1]}")
        if not np.all(np.isfinite(charges)) or np.any(charges == 0):
            raise ValueError("charges must be finite and nonzero")
        if np.any(positions < 0) or np.any(positions >= 1):
            raise ValueError("fractional coordinates must lie in [0, 1)")
        for j, k in itertools.combinations(range(len(charges)), 2):
            if np.all(circle_distance(positions[j], positions[k]) <= MERGE_TOL):
                raise ValueError(f"atoms {j} and {k} coincide")
        positions.setflags(write=False)
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "positions", positions)

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def n_atoms(self) -> int:
        return len(self.charges)

    @property
    def sum_zsq(self) -> float:
        return float(np.sum(self.charges**2))

    def translated(self, shift) -> "CrystalStructure":
        return CrystalStructure(self.charges, wrap(self.positions + np.asarray(shift)))

    def inverted(self) -> "CrystalStructure":
        """The enantiomorph ``r -> -r``."""
        return CrystalStructure(self.charges, wrap(-self.positions))


@dataclass(frozen=True)
class PattersonMap:
    """Off-origin Patterson density: centres ``deltas`` with weights ``weights``.

    Centres are kept sorted lexicographically. The map must be
    centrosymmetric: every ``(nu, delta)`` has a partner ``(nu, -delta mod 1)``.
    """

    dimension: int
    weights: np.ndarray
    deltas: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).reshape(-1)
        deltas = np.array(self.deltas, dtype=float).reshape(len(weights), self.dimension)
        deltas = wrap(deltas)
        order = np.lexsort(deltas.T[::-1]) if len(weights) else np.arange(0)
        weights, deltas = weights[order], deltas[order]
        weights.setflags(write=False)
        deltas.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "deltas", deltas)
        if self.check:
            self._validate()

    def _validate(self):
        if np.any(self.weights == 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("Patterson weights must be finite and nonzero")
        n = self.nbar
        for a in range(n):
            close = np.all(circle_distance(self.deltas, self.deltas[a]) <= MERGE_TOL, axis=1)
            if close.sum() > 1:
                raise ValueError(f"Patterson centre {self.deltas[a]} is duplicated")
            mirror = self.find(wrap(-self.deltas[a]))
            if mirror is None:
                raise ValueError(f"centre {self.deltas[a]} has no centrosymmetric partner")
            scale = max(abs(self.weights[a]), abs(self.weights[mirror]))
            if abs(self.weights[a] - self.weights[mirror]) > 1e-9 * scale:
                raise ValueError(f"centre {self.deltas[a]} and its mirror differ in weight")

    @property
    def nbar(self) -> int:
        return len(self.weights)

    def find(self, delta, tol: float = MERGE_TOL):
        """Index of the centre at ``delta`` (within ``tol`` per coordinate) or None."""
        if self.nbar == 0:
            return None
        hit = np.flatnonzero(np.all(circle_distance(self.deltas, delta) <= tol, axis=1))
        return int(hit[0]) if len(hit) else None

    def ordered(self, order: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Weights and deltas rearranged into ``order`` (the map itself stays sorted)."""
        order = np.asarray(order, dtype=int)
        return self.weights[order], self.deltas[order]

    @classmethod
    def empty(cls, dimension: int) -> "PattersonMap":
        return cls(dimension, np.zeros(0), np.zeros((0, dimension)))


class IntensitySet(Mapping):
    """Subtracted intensities keyed by reflection, stored once per Friedel pair.

    Lookups accept either member of a pair. Iteration yields the canonical
    representatives in sorted order; :meth:`reflections` yields both members.
    """

    def __init__(self, dimension: int, entries: Mapping | Iterable = (), sum_zsq=None):
        self.dimension = int(dimension)
        self.sum_zsq = None if sum_zsq is None else float(sum_zsq)
        store: dict[tuple, float] = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for h, value in items:
            if len(h) != self.dimension:
                raise ValueError(f"reflection {h} does not have dimension {self.dimension}")
            key = canonical(h)
            value = float(value)
            if key in store and store[key] != value:
                prev = store[key]
                if abs(prev - value) > 1e-12 * max(abs(prev), abs(value), 1.0):
                    raise ValueError(f"Friedel mates of {key} disagree: {prev} vs {value}")
                continue
            store[key] = value
        self._data = MappingProxyType(dict(sorted(store.items())))

    def __getitem__(self, h) -> float:
        key = canonical(h)
        try:
            return self._data[key]
        except KeyError:
            raise MissingReflectionError(h) from None

    def __contains__(self, h) -> bool:
        return canonical(h) in self._data

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other):
        if not isinstance(other, IntensitySet):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.sum_zsq == other.sum_zsq
            and dict(self._data) == dict(other._data)
        )

    def __repr__(self):
        return f"IntensitySet(dimension={self.dimension}, n={len(self)})"

    def reflections(self) -> list[tuple]:
        """Every stored reflection together with its Friedel mate, sorted."""
        out = set(self._data)
        out.update(tuple(-x for x in h) for h in self._data)
        return sorted(out)

    def observed(self, h) -> float:
        """Unsubtracted intensity ``I_h + sum Z^2`` (needs ``sum_zsq``)."""
        if self.sum_zsq is None:
            raise ValueError("sum of squared charges unknown for this set")
        return self[h] + self.sum_zsq

    def restricted(self, refs: Iterable) -> "IntensitySet":
        """Subset holding only ``refs`` (missing ones raise)."""
        return IntensitySet(self.dimension, {h: self[h] for h in refs}, self.sum_zsq)

    def merged(self, other: Mapping) -> "IntensitySet":
        """Union with ``other``; values already present here win."""
        entries = dict(other.items())
        entries.update(self._data)
        return IntensitySet(self.dimension, entries, self.sum_zsq)


def _check_dim(d: int, h) -> np.ndarray:
    h = np.asarray(h)
    if h.shape[-1] != d:
        raise ValueError(f"reflection of dimension {h.shape[-1]} given for a {d}D object")
    return h


def structure_factors(s: CrystalStructure, refs) -> np.ndarray:
    """``F_h = sum_j Z_j exp(2 pi i h.r_j)`` for every row of ``refs``."""
    refs = _check_dim(s.dimension, np.atleast_2d(np.asarray(refs, dtype=float)))
    return np.exp(2j * np.pi * refs @ s.positions.T) @ s.charges


def observed_intensity(s: CrystalStructure, h) -> float:
    """``|F_h|^2`` of the point-atom structure."""
    _check_dim(s.dimension, h)
    return float(abs(structure_factors(s, [h])[0]) ** 2)


def compute_patterson(s: CrystalStructure, tol: float = MERGE_TOL) -> PattersonMap:
    """Patterson map from all ordered atom pairs ``j != k``.

    Differences ``(r_j - r_k) mod 1`` closer than ``tol`` per coordinate are
    merged and their charge products summed. Cancelled weights are dropped.
    """
    deltas: list[np.ndarray] = []
    weights: list[float] = []
    for j, k in itertools.permutations(range(s.n_atoms), 2):
        delta = wrap(s.positions[j] - s.positions[k], tol)
        for idx, d in enumerate(deltas):
            if np.all(circle_distance(d, delta) <= tol):
                weights[idx] += s.charges[j] * s.charges[k]
                break
        else:
            deltas.append(delta)
            weights.append(s.charges[j] * s.charges[k])
    if not weights:
        return PattersonMap.empty(s.dimension)
    weights_a = np.array(weights)
    keep = np.abs(weights_a) > WEIGHT_DROP * np.max(np.abs(weights_a))
    return PattersonMap(s.dimension, weights_a[keep], np.array(deltas)[keep])


def subtracted_intensities(p: PattersonMap, refs, imag_tol: float = 1e-9) -> np.ndarray:
    """Vectorised :func:`subtracted_intensity` over the rows of ``refs``."""
    refs = _check_dim(p.dimension, np.atleast_2d(np.asarray(refs, dtype=float)))
    if p.nbar == 0:
        return np.zeros(len(refs))
    vals = np.exp(2j * np.pi * refs @ p.deltas.T) @ p.weights
    scale = max(float(np.sum(np.abs(p.weights))), 1e-300)
    worst = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
    if worst > imag_tol * scale:
        raise InconsistentDataError(
            f"imaginary residue {worst:.3g} in Patterson synthesis; map is not centrosymmetric"
        )
    return vals.real


def subtracted_intensity(p: PattersonMap, h) -> float:
    """``sum_c nu_c exp(2 pi i h.delta_c)``; real for a centrosymmetric map."""
    _check_dim(p.dimension, h)
    return float(subtracted_intensities(p, [h])[0])


def synth_window(s: CrystalStructure, half_widths: Sequence[int]) -> IntensitySet:
    """Subtracted intensities of a structure over a box of reflections."""
    if len(half_widths) != s.dimension:
        raise ValueError("one half width per dimension required")
    refs = [canonical(h) for h in box(half_widths)]
    refs = sorted(set(refs))
    obs = np.abs(structure_factors(s, refs)) ** 2
    return IntensitySet(s.dimension, zip(refs, obs - s.sum_zsq), sum_zsq=s.sum_zsq)


def patterson_window(p: PattersonMap, half_widths: Sequence[int]) -> IntensitySet:
    """Subtracted intensities of a Patterson map over a box of reflections."""
    return synth_reflections(p, box(half_widths))


def synth_reflections(p: PattersonMap, refs: Iterable) -> IntensitySet:
    """Subtracted intensities of a Patterson map at arbitrary reflections."""
    refs = sorted({canonical(h) for h in refs})
    if not refs:
        return IntensitySet(p.dimension)
    return IntensitySet(p.dimension, zip(refs, subtracted_intensities(p, refs)))
