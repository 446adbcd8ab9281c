"""From intensities and a basic set back to the Patterson map and the atoms.

Positions come from shifted KH matrices. With ``X0[s, j] = I_{s - k_j}`` and
``X_d[s, j] = I_{s - k_j + e_d}`` over a set of rows ``s``, the factorization
``X_d = V_R^H diag(nu) Phi_d V_B`` gives ``X0^+ X_d = V_B^{-1} Phi_d V_B``.
Its eigenvalues are ``exp(2 pi i delta_d)``, one per centre, and the shared
eigenvectors pair the coordinates across axes.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .basis import BasicSet
from .crystal import (
    MERGE_TOL,
    CrystalStructure,
    PattersonMap,
    canonical,
    circle_distance,
    compute_patterson,
    wrap,
)
from .errors import InconsistentDataError, MissingReflectionError
from .reconstruction import Expander, completeness_sets, hull_rows

log = logging.getLogger(__name__)

ROOT_TOL = 1e-3
PAIR_GAP = 1e-6
MIRROR_TOL = 1e-6
MAX_ATOMS = 6


# -- resolvent polynomial ----------------------------------------------------


@dataclass(frozen=True)
class ResolventPolynomial:
    """Monic polynomial ``sum_s alpha_s z^s`` (``alpha[-1] == 1``)."""

    coefficients: np.ndarray
    axis: str = "a"

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        return np.polyval(self.coefficients[::-1], z)


def _row0(b: BasicSet) -> tuple[list[tuple], tuple]:
    d = b.dimension
    ax = "abc".index(b.axis)
    unit = [0] * d
    unit[ax] = 1
    members = [h for h in b.reflections if all(x == 0 for i, x in enumerate(h) if i != ax)]
    zeros = [z for z in b.zeros if all(x == 0 for i, x in enumerate(z) if i != ax)]
    if not zeros:
        raise ValueError("basic set has no KH zero on its first row")
    return members, zeros[0]


def resolvent_from_zero(b: BasicSet, i) -> ResolventPolynomial:
    """Polynomial whose roots are the phase factors of the axis projections.

    The first-row zero ``(mu_1, 0)`` is a combination of the first-row
    members, ``|mu_1, 0> = sum_s beta_s |s, 0>``; the coefficients come from
    the KH system over the whole basic set, where the other members get zero
    weight.
    """
    members, z = _row0(b)
    row = Expander(b, i).row(z).coefficients
    ax = "abc".index(b.axis)
    beta = np.zeros(len(members))
    for idx, h in enumerate(b.reflections):
        if h in members:
            beta[h[ax]] = row[idx]
    coef = np.append(-beta, 1.0)
    return ResolventPolynomial(coef, b.axis)


def roots_on_unit_circle(poly: ResolventPolynomial, tol: float = ROOT_TOL) -> np.ndarray:
    """Roots by companion-matrix eigenvalues, projected to the unit circle and
    sorted by argument in ``[0, 2 pi)``."""
    if poly.degree < 1:
        raise ValueError("polynomial degree must be at least 1")
    roots = np.roots(np.asarray(poly.coefficients)[::-1])
    dev = np.max(np.abs(np.abs(roots) - 1.0))
    if dev > tol:
        raise InconsistentDataError(f"resolvent root off the unit circle by {dev:.3g}")
    roots = roots / np.abs(roots)
    return roots[np.argsort(np.mod(np.angle(roots), 2 * np.pi))]


# -- Patterson recovery ------------------------------------------------------


@dataclass(frozen=True)
class RecoveredPatterson:
    """Recovered map with diagnostics.

    ``residuals[c]`` is the largest deviation from the unit circle of the
    eigenvalues that gave centre ``c``; ``fit_residual`` is the largest misfit
    of the recovered map to the intensities over the complete set, relative
    to ``sum |nu|``.
    """

    patterson: PattersonMap
    residuals: np.ndarray
    fit_residual: float
    paired_jointly: bool = False

    @property
    def dimension(self) -> int:
        return self.patterson.dimension

    @property
    def weights(self) -> np.ndarray:
        return self.patterson.weights

    @property
    def deltas(self) -> np.ndarray:
        return self.patterson.deltas

    @property
    def nbar(self) -> int:
        return self.patterson.nbar


def _lookup(i, h) -> float:
    key = canonical(h)
    if key not in i:
        raise MissingReflectionError(key, "Patterson recovery")
    return float(i[key])


def _pencil_rows(i, b: BasicSet, rows) -> list[tuple]:
    if rows is not None:
        return [tuple(int(x) for x in s) for s in rows]
    d = b.dimension
    units = [tuple(int(a == k) for a in range(d)) for k in range(d)]
    out = []
    for s in hull_rows(b, 1):
        need = [np.subtract(s, k) for k in b.reflections]
        need += [np.add(n, e) for n in need for e in units]
        if all(canonical(n) in i for n in need):
            out.append(s)
    return out if len(out) >= len(b) else list(b.reflections)


def _greedy_pairing(ref: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Column permutation of ``other`` maximizing eigenvector overlap with ``ref``."""
    a = ref / np.linalg.norm(ref, axis=0)
    c = other / np.linalg.norm(other, axis=0)
    overlap = np.abs(a.conj().T @ c)
    perm = -np.ones(overlap.shape[0], dtype=int)
    for flat in np.argsort(-overlap, axis=None):
        r, k = np.unravel_index(flat, overlap.shape)
        if perm[r] < 0 and k not in perm:
            perm[r] = k
    return perm


def _min_gap(values: np.ndarray) -> float:
    if len(values) < 2:
        return np.inf
    diff = np.abs(values[:, None] - values[None, :])
    return float(np.min(diff[~np.eye(len(values), dtype=bool)]))


def _symmetrize(deltas: np.ndarray, weights: np.ndarray, tol: float):
    n, d = deltas.shape
    out_d, out_w = deltas.copy(), weights.copy()
    for a in range(n):
        dist = np.max(circle_distance(deltas, wrap(-deltas[a])), axis=1)
        b = int(np.argmin(dist))
        if dist[b] > tol:
            raise InconsistentDataError(
                f"recovered centre {deltas[a]} has no centrosymmetric partner within {tol:g}"
            )
        # average with the reflected partner on the circle
        shift = (-deltas[b] - deltas[a] + 0.5) % 1.0 - 0.5
        out_d[a] = deltas[a] + shift / 2
        out_w[a] = 0.5 * (weights[a] + weights[b])
    return wrap(out_d % 1.0), out_w


def recover_patterson(
    i,
    b: BasicSet,
    rows: Sequence | None = None,
    residual_tol: float = 1e-6,
    mirror_tol: float = MIRROR_TOL,
) -> RecoveredPatterson:
    """Centres and weights of the Patterson map from intensities and a basic set.

    ``rows`` defaults to the basic set's bounding box grown by one, restricted
    to rows whose intensities are available.
    """
    refs = list(b.reflections)
    n, d = len(refs), b.dimension
    rows = _pencil_rows(i, b, rows)
    units = [tuple(int(a == k) for a in range(d)) for k in range(d)]
    x0 = np.array([[_lookup(i, np.subtract(s, k)) for k in refs] for s in rows])
    xs = [
        np.array([[_lookup(i, np.add(np.subtract(s, k), e)) for k in refs] for s in rows])
        for e in units
    ]
    pencils = [np.linalg.lstsq(x0, x, rcond=None)[0] for x in xs]

    eig = [np.linalg.eig(p) for p in pencils]
    joint = any(_min_gap(ev) < PAIR_GAP for ev, _ in eig)
    if not joint:
        lam = [eig[0][0]]
        for ev, w in eig[1:]:
            lam.append(ev[_greedy_pairing(eig[0][1], w)])
        lam = np.array(lam).T
    else:
        weights_c = np.array([1.0, np.sqrt(2.0) - 0.5, np.pi - 2.9])[:d]
        _, w = np.linalg.eig(sum(c * p for c, p in zip(weights_c, pencils)))
        winv = np.linalg.inv(w)
        lam = np.array([np.diag(winv @ p @ w) for p in pencils]).T
    residuals = np.max(np.abs(np.abs(lam) - 1.0), axis=1)
    deltas = wrap(np.mod(np.angle(lam) / (2 * np.pi), 1.0))

    cs = sorted(completeness_sets(b).C)
    h = np.array(cs, dtype=float)
    target = np.array([_lookup(i, c) for c in cs])
    phase = np.exp(2j * np.pi * h @ deltas.T)
    a = np.vstack([phase.real, phase.imag])
    nu = np.linalg.lstsq(a, np.concatenate([target, np.zeros(len(cs))]), rcond=None)[0]

    deltas, nu = _symmetrize(deltas, nu, mirror_tol)
    p = PattersonMap(d, nu, deltas)
    scale = float(np.sum(np.abs(nu)))
    model = np.real(np.exp(2j * np.pi * h @ p.deltas.T) @ p.weights)
    fit = float(np.max(np.abs(model - target)) / scale)
    if fit > residual_tol:
        raise InconsistentDataError(f"recovered map misfits the complete set by {fit:.3g}")
    order = np.lexsort(wrap(deltas).T[::-1])
    return RecoveredPatterson(p, residuals[order], fit, joint)


# -- deconvolution -----------------------------------------------------------


def patterson_distance(a: PattersonMap, b: PattersonMap) -> float:
    """Largest position or relative weight mismatch between two maps (inf if unmatched)."""
    if a.nbar != b.nbar:
        return np.inf
    worst = 0.0
    used = np.zeros(b.nbar, dtype=bool)
    scale = max(np.max(np.abs(a.weights), initial=0.0), 1e-300)
    for c in range(a.nbar):
        dist = np.max(circle_distance(b.deltas, a.deltas[c]), axis=1) if b.nbar else np.zeros(0)
        dist = np.where(used, np.inf, dist)
        k = int(np.argmin(dist))
        used[k] = True
        worst = max(worst, dist[k], abs(a.weights[c] - b.weights[k]) / scale)
    return float(worst)


def _canonical_key(s: CrystalStructure, digits: int) -> tuple:
    best = None
    for j in range(s.n_atoms):
        pos = wrap(np.mod(s.positions - s.positions[j], 1.0), 10.0 ** -digits)
        rows = sorted(
            (round(float(z), digits),) + tuple(round(float(x), digits) % 1.0 for x in p)
            for z, p in zip(s.charges, pos)
        )
        key = tuple(rows)
        if best is None or key < best:
            best = key
    return best


def deconvolve_to_atoms(
    p, n_atoms: int, charges: Sequence[float], tol: float = 1e-6, merge_tol: float = MERGE_TOL
) -> list[CrystalStructure]:
    """All structures of ``n_atoms`` atoms with the given charges whose
    Patterson map matches ``p``, one per translation class.

    One atom sits at the origin; the others must sit on Patterson centres,
    and every pairwise difference of a candidate must itself be a centre.
    Enantiomorphs are returned as separate solutions.
    """
    if isinstance(p, RecoveredPatterson):
        p = p.patterson
    if n_atoms > MAX_ATOMS:
        raise ValueError(f"deconvolution is limited to {MAX_ATOMS} atoms")
    charges = [float(z) for z in charges]
    if len(charges) != n_atoms or n_atoms < 1:
        raise ValueError("need one charge per atom")
    d = p.dimension
    deltas = p.deltas

    def is_centre(x) -> bool:
        return p.nbar > 0 and bool(
            np.any(np.max(circle_distance(deltas, wrap(np.mod(x, 1.0))), axis=1) <= tol)
        )

    found: dict[tuple, CrystalStructure] = {}
    perms = sorted(set(itertools.permutations(charges)))
    digits = max(0, int(-np.log10(tol)) - 1)

    def emit(idx: list[int]):
        pos = np.vstack([np.zeros(d)] + [deltas[k] for k in idx])
        for zs in perms:
            try:
                s = CrystalStructure(np.array(zs), pos)
                q = compute_patterson(s, merge_tol)
            except ValueError:
                continue
            if patterson_distance(q, p) <= tol:
                key = _canonical_key(s, digits)
                found.setdefault(key, s)

    def extend(idx: list[int], start: int):
        if len(idx) == n_atoms - 1:
            emit(idx)
            return
        for k in range(start, p.nbar):
            if all(is_centre(deltas[k] - deltas[j]) for j in idx):
                extend(idx + [k], k + 1)

    extend([], 0)
    out = [found[k] for k in sorted(found)]
    if not out:
        log.warning(
            "no %d-atom structure with charges %s reproduces the %d-centre map within %g",
            n_atoms, charges, p.nbar, tol,
        )
    return out


def structure_distance(a: CrystalStructure, b: CrystalStructure) -> float:
    """Position error between two structures modulo translation, inversion and
    atom permutation (inf when charges cannot be matched)."""
    if a.n_atoms != b.n_atoms or a.dimension != b.dimension:
        return np.inf
    best = np.inf
    for cand in (b, b.inverted()):
        for j in range(cand.n_atoms):
            if abs(cand.charges[j] - a.charges[0]) > 1e-9 * max(1.0, abs(a.charges[0])):
                continue
            moved = np.mod(cand.positions - cand.positions[j] + a.positions[0], 1.0)
            used = np.zeros(a.n_atoms, dtype=bool)
            worst = 0.0
            for k in range(a.n_atoms):
                same = np.abs(cand.charges - a.charges[k]) <= 1e-9 * max(1.0, abs(a.charges[k]))
                dist = np.max(circle_distance(moved, a.positions[k]), axis=1)
                dist = np.where(same & ~used, dist, np.inf)
                m = int(np.argmin(dist))
                if not np.isfinite(dist[m]):
                    worst = np.inf
                    break
                used[m] = True
                worst = max(worst, float(dist[m]))
            best = min(best, worst)
    return best
