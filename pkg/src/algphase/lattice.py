"""Structured matrices of the vector lattice and their determinants.

The lattice vector of reflection ``k`` has components ``exp(-2 pi i k.delta_c)``
on the Patterson centres, so a list of reflections defines the matrix
``V[c, l] = exp(-2 pi i k_l.delta_c)``. Karle-Hauptman (KH) matrices of
intensities factor as ``V^H diag(nu) V``.

Node grouping (:class:`ShapeProfile`) follows the principal-axis analysis:
centres are grouped by their projection on the chosen axis, then by the next
coordinate, and so on. The closed-form determinant of ``V`` over the
principal basic set is a product of node differences whose exponents are set
by that grouping.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .crystal import MERGE_TOL, PattersonMap, canonical
from .errors import MissingReflectionError

AXES = {"a": 0, "b": 1, "c": 2}
RANK_TOL = 1e-8
BEZOUT_LIMIT = 10**7


def axis_permutation(axis: str | int, dimension: int) -> tuple[int, ...]:
    """Coordinate order that puts ``axis`` first, the rest following cyclically."""
    i = AXES[axis] if isinstance(axis, str) else int(axis)
    if not 0 <= i < dimension:
        raise ValueError(f"axis {axis!r} not available in {dimension}D")
    return tuple((i + k) % dimension for k in range(dimension))


def build_V(p: PattersonMap, refs: Sequence) -> np.ndarray:
    """Lattice matrix ``V[c, l] = exp(-2 pi i k_l . delta_c)``; rows follow ``p``."""
    refs = np.atleast_2d(np.asarray(refs, dtype=float))
    if refs.size == 0:
        raise ValueError("need at least one reflection")
    if refs.shape[1] != p.dimension:
        raise ValueError("reflection dimension does not match the map")
    return np.exp(-2j * np.pi * p.deltas @ refs.T)


@dataclass(frozen=True)
class KHMatrix:
    """Gram-type matrix over a reflection list.

    ``kind`` is ``"intensity"`` for ``D[a, b] = I_{h_a - h_b}`` or
    ``"j-quadratic"`` for the quadratic-intensity matrix J.
    """

    matrix: np.ndarray
    reflections: tuple
    kind: str = "intensity"

    @property
    def size(self) -> int:
        return len(self.reflections)


@dataclass(frozen=True)
class JMatrix:
    """Quadratic intensity matrix over the ordered set S1.

    ``J[l, m] = sum_r I_{h_l - h_r} I_{h_r - h_m}``. ``factor`` is the
    intensity KH matrix over S1, so ``J = factor @ factor`` and the restriction
    of J to a subset ``B`` equals ``factor[:, B].T @ factor[:, B]``.
    """

    reflections: tuple
    matrix: np.ndarray
    factor: np.ndarray
    index: Mapping = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {h: i for i, h in enumerate(self.reflections)})

    def positions(self, refs: Iterable) -> list[int]:
        out = []
        for h in refs:
            h = tuple(int(x) for x in h)
            if h not in self.index:
                raise MissingReflectionError(h, "not in S1")
            out.append(self.index[h])
        return out

    def restrict(self, refs: Sequence) -> KHMatrix:
        idx = self.positions(refs)
        return KHMatrix(self.matrix[np.ix_(idx, idx)], tuple(map(tuple, refs)), "j-quadratic")

    def factor_columns(self, refs: Sequence) -> np.ndarray:
        return self.factor[:, self.positions(refs)]


def kh_matrix(source, refs: Sequence) -> KHMatrix:
    """KH matrix ``D[a, b] = I_{h_a - h_b}`` from intensities, or J restricted to ``refs``."""
    refs = [tuple(int(x) for x in h) for h in refs]
    if isinstance(source, JMatrix):
        return source.restrict(refs)
    m = len(refs)
    out = np.empty((m, m))
    cache: dict[tuple, float] = {}
    for a in range(m):
        for b in range(a, m):
            key = canonical(np.subtract(refs[a], refs[b]))
            if key not in cache:
                try:
                    cache[key] = source[key]
                except KeyError:
                    raise MissingReflectionError(key, "KH matrix difference") from None
            out[a, b] = out[b, a] = cache[key]
    return KHMatrix(out, tuple(refs), "intensity")


# -- node grouping -----------------------------------------------------------


def _cluster(values: np.ndarray, idx: np.ndarray, tol: float) -> list[np.ndarray]:
    order = idx[np.argsort(values[idx], kind="stable")]
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(values[i] - values[groups[-1][0]]) <= tol:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    if len(groups) > 1 and 1.0 - values[groups[-1][0]] + values[groups[0][0]] <= tol:
        groups[0].extend(groups.pop())
    return [np.array(g) for g in groups]


def _group(coords: np.ndarray, idx: np.ndarray, level: int, tol: float):
    """Nested grouping of rows ``idx``: returns (key, first coordinate, children)."""
    d = coords.shape[1]
    if level == d - 1:
        leaves = idx[np.argsort(coords[idx, level], kind="stable")]
        return [(1, float(coords[i, level]), int(i)) for i in leaves]
    nodes = []
    for members in _cluster(coords[:, level], idx, tol):
        children = _group(coords, members, level + 1, tol)
        nodes.append((len(children), float(coords[members[0], level]), children))
    nodes.sort(key=lambda n: (-n[0], n[1]))
    return nodes


def _flatten(nodes, prefix=()):
    for label, node in enumerate(nodes):
        if isinstance(node[2], int):
            yield prefix + (label,), node[2]
        else:
            yield from _flatten(node[2], prefix + (label,))


@dataclass(frozen=True)
class ShapeProfile:
    """Grouping of Patterson centres along a principal axis.

    Rows (centres) are listed in ``order``; ``labels[i]`` is the tuple of group
    indices ``(r, s)`` in 2D or ``(i, j, l)`` in 3D and ``coords[i]`` the
    centre's coordinates with the principal axis first.
    """

    dimension: int
    axis: str
    perm: tuple
    order: tuple
    labels: np.ndarray
    coords: np.ndarray

    @property
    def nbar(self) -> int:
        return len(self.order)

    @property
    def M(self) -> int:
        return int(self.labels[:, 0].max()) + 1 if self.nbar else 0

    @property
    def heights(self) -> tuple:
        """Column heights ``m_1 >= ... >= m_M`` (2D) / slice sizes ``P_i`` (3D)."""
        return tuple(int(np.sum(self.labels[:, 0] == r)) for r in range(self.M))

    @property
    def widths(self) -> tuple:
        """Row widths ``mu_s``: number of columns of height at least ``s`` (2D)."""
        if self.dimension != 2:
            raise AttributeError("row widths are defined for 2D profiles")
        m = self.heights
        return tuple(sum(1 for h in m if h > s) for s in range(m[0] if m else 0))

    @property
    def p(self) -> tuple:
        """Number of distinct second-coordinate groups per column (3D)."""
        return tuple(len(self.q[i]) for i in range(self.M))

    @property
    def q(self) -> tuple:
        """``q[i][j]``: centres sharing the first two projections (3D)."""
        if self.dimension != 3:
            raise AttributeError("q is defined for 3D profiles")
        out = []
        for i in range(self.M):
            sub = self.labels[self.labels[:, 0] == i]
            out.append(tuple(int(np.sum(sub[:, 1] == j)) for j in range(int(sub[:, 1].max()) + 1)))
        return tuple(out)

    @property
    def P(self) -> tuple:
        return self.heights

    def cells(self, group: int) -> frozenset:
        """Diagram of column ``group``: label tails of its centres."""
        rows = self.labels[self.labels[:, 0] == group]
        return frozenset(tuple(int(x) for x in r[1:]) for r in rows)

    def row_counts(self) -> dict:
        """For each cell, how many columns contain it."""
        counts: dict[tuple, int] = {}
        for g in range(self.M):
            for c in self.cells(g):
                counts[c] = counts.get(c, 0) + 1
        return counts

    def to_original(self, h: Sequence[int]) -> tuple:
        out = [0] * self.dimension
        for i, ax in enumerate(self.perm):
            out[ax] = int(h[i])
        return tuple(out)

    def to_axis(self, h: Sequence[int]) -> tuple:
        return tuple(int(h[ax]) for ax in self.perm)

    def principal_reflections(self) -> list[tuple]:
        """Principal basic set in lexicographic order of axis-first indices.

        This is the column order under which the closed-form determinant
        holds; reflections are returned in the original coordinates.
        """
        cols = sorted((h,) + c for c, n in self.row_counts().items() for h in range(n))
        return [self.to_original(c) for c in cols]


def shape_profile(p: PattersonMap, axis: str = "a", tol: float = MERGE_TOL) -> ShapeProfile:
    """Group the centres of ``p`` by their projections along ``axis``.

    Columns are ordered by decreasing number of subgroups with ties broken by
    ascending coordinate; the same rule applies at every nesting level.
    """
    if p.nbar == 0:
        raise ValueError("shape profile of an empty map")
    perm = axis_permutation(axis, p.dimension)
    coords = p.deltas[:, perm]
    nodes = _group(coords, np.arange(p.nbar), 0, tol)
    rows = list(_flatten(nodes))
    labels = np.array([lab for lab, _ in rows], dtype=int)
    order = tuple(i for _, i in rows)
    axis_name = axis if isinstance(axis, str) else "abc"[axis]
    return ShapeProfile(p.dimension, axis_name, perm, order, labels, coords[list(order)])


def principal_vandermonde(p: PattersonMap, shape: ShapeProfile) -> np.ndarray:
    """``V`` over the principal basic set, rows in profile order."""
    return build_V(p, shape.principal_reflections())[list(shape.order), :]


# -- closed forms ------------------------------------------------------------


def closed_form_factors(shape: ShapeProfile) -> list[tuple[int, int, int, int]]:
    """Factors ``(level, row_a, row_b, exponent)`` of the closed-form determinant.

    Each factor stands for ``(w_b - w_a) ** exponent`` with ``w`` the phase
    factor ``exp(-2 pi i coord)`` of the grouping coordinate ``level`` of the
    given representative rows. Between two groups the exponent is the number
    of cells their diagrams share; for nested diagrams this is the smaller
    group size.
    """
    factors: list[tuple[int, int, int, int]] = []

    def recurse(rows: np.ndarray, level: int):
        if level == shape.dimension:
            return
        labs = shape.labels[rows, level]
        groups = [rows[labs == g] for g in np.unique(labs)]
        cells = [frozenset(tuple(r) for r in shape.labels[g, level + 1:]) for g in groups]
        for a, b in itertools.combinations(range(len(groups)), 2):
            e = len(cells[a] & cells[b])
            if e:
                factors.append((level, int(groups[a][0]), int(groups[b][0]), e))
        for g in groups:
            recurse(g, level + 1)

    recurse(np.arange(shape.nbar), 0)
    return factors


def _pairing_sign(shape: ShapeProfile) -> int:
    cols = sorted((h,) + c for c, n in shape.row_counts().items() for h in range(n))
    col_index = {c: i for i, c in enumerate(cols)}
    seen: dict[tuple, int] = {}
    target = []
    for lab in shape.labels:
        cell = tuple(int(x) for x in lab[1:])
        rank = seen.get(cell, 0)
        seen[cell] = rank + 1
        target.append(col_index[(rank,) + cell])
    sign, visited = 1, [False] * len(target)
    for start in range(len(target)):
        if visited[start]:
            continue
        j, length = start, 0
        while not visited[j]:
            visited[j] = True
            j = target[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def homogeneity_degrees(shape: ShapeProfile) -> tuple[int, ...]:
    """Total exponent per grouping level of the closed-form product."""
    out = [0] * shape.dimension
    for level, _, _, e in closed_form_factors(shape):
        out[level] += e
    return tuple(out)


def _phase(shape: ShapeProfile, row: int, level: int) -> complex:
    return np.exp(-2j * np.pi * shape.coords[row, level])


def vandermonde_det_closed_form(p: PattersonMap, shape: ShapeProfile | None = None) -> complex:
    """Product formula for ``det V`` over the principal basic set.

    Rows are ordered as ``shape.order`` and columns as
    :meth:`ShapeProfile.principal_reflections`.
    """
    shape = shape_profile(p) if shape is None else shape
    val = complex(_pairing_sign(shape))
    for level, a, b, e in closed_form_factors(shape):
        val *= (_phase(shape, b, level) - _phase(shape, a, level)) ** e
    return val


def kh_det_closed_form(p: PattersonMap, axis: str = "a") -> float:
    """``det`` of the intensity KH matrix over the principal basic set.

    Equals ``prod(nu) * |det V|^2``; evaluated in log space.
    """
    if p.nbar == 0:
        raise ValueError("empty map")
    shape = shape_profile(p, axis)
    sign = float(np.prod(np.sign(p.weights)))
    log = float(np.sum(np.log(np.abs(p.weights))))
    for level, a, b, e in closed_form_factors(shape):
        log += 2 * e * math.log(abs(_phase(shape, b, level) - _phase(shape, a, level)))
    return sign * math.exp(log)


# -- numerics ----------------------------------------------------------------


def numeric_det(matrix, precision: str = "double") -> complex:
    """Determinant by partial-pivot LU; ``precision="extended"`` uses 34 digits."""
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    if precision == "extended":
        import mpmath

        with mpmath.workdps(34):
            m = mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in a])
            return complex(mpmath.det(m))
    if precision != "double":
        raise ValueError(f"unknown precision {precision!r}")
    if a.shape[0] == 0:
        return 1.0 + 0j
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    swaps = int(np.sum(piv != np.arange(len(piv))))
    return complex(np.prod(np.diag(lu)) * (-1) ** swaps)


def numerical_rank(matrix, rel_tol: float = RANK_TOL) -> int:
    """Singular values above ``rel_tol`` times the largest one."""
    sv = np.linalg.svd(np.asarray(matrix), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def bezout_expansion(v, weights, subset_size: int | None = None, chunk: int = 20000) -> float:
    """Cauchy-Binet sum ``sum_S prod(nu_S) |det V_S|^2`` over row subsets ``S``.

    ``V`` has one row per centre and ``subset_size`` columns; the result is
    ``det(V^H diag(nu) V)``. Minors are recomputed per subset.
    """
    v = np.asarray(v)
    weights = np.asarray(weights, dtype=float)
    n, m = v.shape
    if subset_size is not None and subset_size != m:
        raise ValueError(f"V has {m} columns but subset size {subset_size} was requested")
    if m > n:
        return 0.0
    if math.comb(n, m) > BEZOUT_LIMIT:
        raise ValueError(f"C({n},{m}) = {math.comb(n, m)} subsets exceeds {BEZOUT_LIMIT}")
    terms = []
    subsets = itertools.combinations(range(n), m)
    while True:
        batch = np.array(list(itertools.islice(subsets, chunk)), dtype=int)
        if batch.size == 0:
            break
        minors = v[batch]  # (k, m, m)
        dets = np.linalg.det(minors)
        terms.append(np.prod(weights[batch], axis=1) * np.abs(dets) ** 2)
    return float(np.sum(np.concatenate(terms)))
