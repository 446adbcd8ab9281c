"""Basic sets of reflections.

A basic set is a simply connected set of N-bar reflections whose lattice
vectors are linearly independent. It is found either geometrically from a
known Patterson map or from intensities alone by a row scan along the chosen
axis: reflections are appended while the Gram matrix of the accumulated set
stays nonsingular, and each singular step records a KH zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .crystal import IntensitySet, PattersonMap
from .errors import MissingReflectionError, WindowExhaustedError
from .lattice import (
    RANK_TOL,
    JMatrix,
    KHMatrix,
    axis_permutation,
    kh_matrix,
    shape_profile,
)

log = logging.getLogger(__name__)

CLIQUE_LIMIT = 4096


# -- observed set and S1 -----------------------------------------------------


@dataclass(frozen=True)
class ObservedSet:
    """Observed reflections and the difference-closed subset S1."""

    s_obs: frozenset
    s1: tuple

    @property
    def n1(self) -> int:
        return len(self.s1)

    def __contains__(self, h) -> bool:
        return tuple(int(x) for x in h) in set(self.s1)


def _as_reflections(s_obs) -> set[tuple]:
    if isinstance(s_obs, IntensitySet):
        return set(s_obs.reflections())
    return {tuple(int(x) for x in h) for h in s_obs}


def _box_half_widths(refs: set[tuple]) -> tuple | None:
    arr = np.array(sorted(refs))
    half = tuple(int(x) for x in np.max(np.abs(arr), axis=0))
    n = int(np.prod([2 * h + 1 for h in half]))
    if n == len(refs) and all(np.all(np.abs(r) <= half) for r in arr):
        return half
    return None


def _s1_rank(clique: Sequence[tuple]) -> tuple:
    arr = np.array(sorted(clique))
    has_zero = any(not any(h) for h in clique)
    cheb = int(np.max(np.abs(arr)))
    # prefer sets leaning to positive indices, then lexicographically largest
    return (not has_zero, cheb, -int(arr.sum()), tuple(-x for x in arr.ravel()))


def compute_S1(s_obs) -> ObservedSet:
    """Largest subset of ``s_obs`` whose pairwise differences are all observed.

    Box windows ``prod [-H, H]`` give ``prod [-floor(H/2), ceil(H/2)]``.
    Other shapes go through an exact maximum-clique search, so they are
    limited to ``CLIQUE_LIMIT`` reflections. Ties prefer sets containing 0,
    then the smallest maximum Chebyshev norm.
    """
    refs = _as_reflections(s_obs)
    if not refs:
        raise ValueError("empty observed set")
    if any(tuple(-x for x in h) not in refs for h in refs):
        raise ValueError("observed set must be Friedel-closed")
    half = _box_half_widths(refs)
    if half is not None:
        lo = [-(h // 2) for h in half]
        hi = [(h + 1) // 2 for h in half]
        grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
        s1 = sorted(tuple(int(x) for x in row) for row in np.stack([g.ravel() for g in grids], 1))
        return ObservedSet(frozenset(refs), tuple(s1))
    if len(refs) > CLIQUE_LIMIT:
        raise ValueError(
            f"{len(refs)} reflections in a non-box window; exact S1 search is limited to {CLIQUE_LIMIT}"
        )
    import networkx as nx

    nodes = sorted(refs)
    g = nx.Graph()
    g.add_nodes_from(nodes)
    for a, h in enumerate(nodes):
        for k in nodes[a + 1:]:
            if tuple(x - y for x, y in zip(h, k)) in refs:
                g.add_edge(h, k)
    best, best_key = None, None
    size = 0
    for clique in nx.find_cliques(g):
        if len(clique) < size:
            continue
        key = _s1_rank(clique)
        if len(clique) > size or key < best_key:
            best, best_key, size = clique, key, len(clique)
    return ObservedSet(frozenset(refs), tuple(sorted(best)))


def j_matrix(i: IntensitySet, s1: ObservedSet | Sequence) -> JMatrix:
    """Quadratic intensity matrix over S1, built once and restricted later."""
    refs = s1.s1 if isinstance(s1, ObservedSet) else tuple(tuple(int(x) for x in h) for h in s1)
    g = kh_matrix(i, refs).matrix
    j = g @ g
    return JMatrix(tuple(refs), 0.5 * (j + j.T), g)


# -- Gram oracles ------------------------------------------------------------


def spectral_ratio(matrix: np.ndarray) -> float:
    sv = np.linalg.svd(matrix, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


class IntensityGram:
    """Dependence test by the spectral ratio of the intensity KH matrix."""

    kind = "intensity"

    def __init__(self, source):
        self.source = source

    def gram(self, refs) -> KHMatrix:
        return kh_matrix(self.source, refs)

    def score(self, accepted: Sequence[tuple], candidate: tuple) -> float:
        return spectral_ratio(self.gram(list(accepted) + [candidate]).matrix)


class JGram:
    """Dependence test on the J matrix through its factor.

    J restricted to ``B`` is ``G_B^T G_B`` with ``G`` the KH matrix over S1,
    so a candidate is dependent when its column of ``G`` lies in the span of
    the accepted columns. The score is the relative residual of that
    projection; it separates dependent from independent candidates far better
    than the spectral ratio of J itself, which squares the conditioning.
    """

    kind = "j-quadratic"

    def __init__(self, j: JMatrix):
        self.j = j

    def gram(self, refs) -> KHMatrix:
        return self.j.restrict(refs)

    def score(self, accepted: Sequence[tuple], candidate: tuple) -> float:
        c = self.j.factor_columns([candidate])[:, 0]
        norm = np.linalg.norm(c)
        if norm == 0:
            return 0.0
        if not accepted:
            return 1.0
        q, _ = np.linalg.qr(self.j.factor_columns(accepted))
        r = c - q @ (q.T @ c)
        r -= q @ (q.T @ r)
        return float(np.linalg.norm(r) / norm)


class _CallableGram:
    kind = "custom"

    def __init__(self, fn):
        self.fn = fn

    def gram(self, refs) -> KHMatrix:
        return self.fn(refs)

    def score(self, accepted, candidate) -> float:
        return spectral_ratio(np.asarray(self.gram(list(accepted) + [candidate]).matrix))


def make_oracle(source, mode: str = "xray"):
    """Gram oracle for ``source``: intensities, a J matrix, an oracle or a callable."""
    if hasattr(source, "score") and hasattr(source, "gram"):
        return source
    if isinstance(source, JMatrix):
        return JGram(source)
    if isinstance(source, IntensitySet):
        if mode == "neutron":
            return JGram(j_matrix(source, compute_S1(source)))
        return IntensityGram(source)
    if callable(source):
        return _CallableGram(source)
    raise TypeError(f"cannot build a Gram oracle from {type(source).__name__}")


# -- row scan ----------------------------------------------------------------


@dataclass(frozen=True)
class BasicSet:
    """Accepted reflections in scan order plus the KH zeros met on the way."""

    reflections: tuple
    axis: str = "a"
    zeros: tuple = ()
    mode: str = "xray"
    scores: tuple = field(default=(), compare=False)

    @property
    def cardinality(self) -> int:
        return len(self.reflections)

    @property
    def dimension(self) -> int:
        return len(self.reflections[0])

    def __len__(self) -> int:
        return len(self.reflections)

    def __iter__(self):
        return iter(self.reflections)

    def index(self, h) -> int:
        return self.reflections.index(tuple(int(x) for x in h))


def row_scan(dimension: int) -> Iterator[tuple]:
    """Candidates of the row scan in axis-first coordinates.

    The generator receives ``True`` via ``send`` when the last candidate was
    dependent. Rows run along the first coordinate; a zero at the start of a
    row closes the plane, and a zero at the start of a plane ends the scan.
    """
    if dimension not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    planes = range(10**9) if dimension == 3 else [None]
    for l in planes:
        k = 0
        while True:
            h = 0
            while True:
                cand = (h, k) if l is None else (h, k, l)
                dependent = yield cand
                if dependent:
                    break
                h += 1
            if h == 0:
                break
            k += 1
        if k == 0 or l is None:
            return


def search_basic_set(
    gram,
    mode: str = "xray",
    rel_tol: float = RANK_TOL,
    dimension: int | None = None,
    axis: str = "a",
    skip: Callable[[tuple], bool] | None = None,
    strategy: Callable[[int], Iterator[tuple]] = row_scan,
    max_size: int = 10**6,
) -> BasicSet:
    """Row-scan search for a basic set.

    ``gram`` is an intensity set, a :class:`JMatrix`, a Gram oracle or a
    callable mapping a reflection list to a :class:`KHMatrix`. A candidate is
    rejected as a KH zero when its score falls below ``rel_tol``. ``skip``
    excludes reflections from the scan without recording them.
    """
    if mode not in ("xray", "neutron"):
        raise ValueError(f"unknown mode {mode!r}")
    oracle = make_oracle(gram, mode)
    if dimension is None:
        src = getattr(oracle, "source", None) or getattr(oracle, "j", None)
        if isinstance(src, IntensitySet):
            dimension = src.dimension
        elif isinstance(src, JMatrix):
            dimension = len(src.reflections[0])
        else:
            raise ValueError("dimension is required for this Gram source")
    perm = axis_permutation(axis, dimension)

    def original(c):
        out = [0] * dimension
        for i, ax in enumerate(perm):
            out[ax] = int(c[i])
        return tuple(out)

    accepted: list[tuple] = []
    zeros: list[tuple] = []
    scores: list[float] = []
    scan = strategy(dimension)
    feedback = None
    while True:
        try:
            cand = scan.send(feedback)
        except StopIteration:
            break
        h = original(cand)
        if skip is not None and skip(h):
            feedback = True
            continue
        try:
            s = oracle.score(accepted, h)
        except (MissingReflectionError, KeyError):
            raise WindowExhaustedError(h, accepted, zeros) from None
        feedback = s < rel_tol
        scores.append(s)
        if feedback:
            zeros.append(h)
        else:
            accepted.append(h)
            if len(accepted) > max_size:
                raise RuntimeError("basic-set scan exceeded its size limit")
    axis_name = axis if isinstance(axis, str) else "abc"[axis]
    return BasicSet(tuple(accepted), axis_name, tuple(zeros), mode, tuple(scores))


def validate_basic_set(b: BasicSet, i: IntensitySet, rel_tol: float = RANK_TOL) -> float:
    """Spectral ratio of the intensity KH matrix over ``b``; logs when singular."""
    ratio = spectral_ratio(kh_matrix(i, b.reflections).matrix)
    if ratio < rel_tol:
        log.warning(
            "intensity KH matrix over the %d-element basic set is singular at tolerance "
            "(spectral ratio %.3g < %.3g)", len(b), ratio, rel_tol,
        )
    return ratio


def principal_basic_set_from_geometry(p: PattersonMap, axis: str = "a") -> BasicSet:
    """Principal basic set read off the node grouping of ``p``.

    Zeros are those the row scan meets when dependence is decided by
    membership in the principal set.
    """
    shape = shape_profile(p, axis)
    refs = shape.principal_reflections()
    members = set(refs)
    b = search_basic_set(_MembershipOracle(members), dimension=p.dimension, axis=axis)
    ordered = tuple(b.reflections)
    if set(ordered) != members:
        raise AssertionError("row scan disagrees with the principal set")
    return BasicSet(ordered, b.axis, b.zeros, "geometry")


class _MembershipOracle:
    def __init__(self, members: set):
        self.members = members

    def gram(self, refs):
        raise NotImplementedError

    def score(self, accepted, candidate) -> float:
        return 1.0 if candidate in self.members else 0.0
