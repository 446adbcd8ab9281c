"""Deterministic random structures and Patterson maps for test corpora."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .crystal import CrystalStructure, PattersonMap, circle_distance, wrap

RETRY_CAP = 10_000


def generate_random_structure(
    seed: int,
    n_atoms: int,
    dimension: int = 2,
    min_separation: float = 0.05,
    charge_range: Sequence[float] = (0.5, 3.0),
    mode: str = "xray",
) -> CrystalStructure:
    """Random point-atom structure, reproducible from ``seed``.

    Every pair of atoms is at least ``min_separation`` apart on the circle in
    each coordinate. Charge magnitudes are uniform in ``charge_range``;
    neutron mode draws random signs.
    """
    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    if mode not in ("xray", "neutron"):
        raise ValueError(f"unknown mode {mode!r}")
    lo, hi = (float(x) for x in charge_range)
    if not 1e-3 <= lo <= hi:
        raise ValueError("charge range must satisfy 1e-3 <= low <= high")
    rng = np.random.default_rng(seed)
    pos = np.zeros((0, dimension))
    tries = 0
    while len(pos) < n_atoms:
        tries += 1
        if tries > RETRY_CAP:
            raise RuntimeError(
                f"could not place {n_atoms} atoms {min_separation} apart in {RETRY_CAP} tries"
            )
        cand = rng.uniform(0.0, 1.0, dimension)
        if len(pos) and np.any(np.min(circle_distance(pos, cand), axis=1) < min_separation):
            continue
        pos = np.vstack([pos, cand])
    z = rng.uniform(lo, hi, n_atoms)
    if mode == "neutron":
        z = z * rng.choice([-1.0, 1.0], n_atoms)
    return CrystalStructure(z, wrap(pos))


def random_patterson_map(
    seed: int,
    nbar: int,
    dimension: int = 2,
    mode: str = "xray",
    min_separation: float = 0.05,
    weight_range: Sequence[float] = (0.5, 3.0),
    reuse: float = 0.5,
) -> PattersonMap:
    """Random centrosymmetric map with ``nbar`` centres.

    Coordinates are drawn from small per-axis pools so that projections are
    shared and the node grouping has nontrivial shape. Distinct node values
    on each axis are at least ``min_separation`` apart. An odd ``nbar`` puts
    one centre on a half-lattice point, which is its own mirror.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (float(x) for x in weight_range)
    pools: list[list[float]] = [[] for _ in range(dimension)]

    def draw(axis: int) -> float:
        pool = pools[axis]
        if pool and rng.uniform() < reuse:
            return float(pool[rng.integers(len(pool))])
        for _ in range(RETRY_CAP):
            x = float(rng.uniform(0.0, 1.0))
            nodes = pool + [(-y) % 1.0 for y in pool] + [0.0, 0.5]
            mirror = (-x) % 1.0
            if min(abs(x - mirror), 1 - abs(x - mirror)) < min_separation:
                continue
            if all(min(abs(x - y), 1 - abs(x - y)) >= min_separation for y in nodes):
                pool.append(x)
                return x
        raise RuntimeError("could not draw a separated node")

    def weight() -> float:
        w = rng.uniform(lo, hi)
        return float(w * rng.choice([-1.0, 1.0])) if mode == "neutron" else float(w)

    deltas, weights = [], []
    if nbar % 2:
        deltas.append(rng.choice([0.0, 0.5], dimension))
        if not np.any(deltas[-1]):
            deltas[-1][0] = 0.5
        weights.append(weight())
    seen = {tuple(np.round(deltas[0], 12))} if deltas else set()
    tries = 0
    while len(deltas) < nbar:
        tries += 1
        if tries > RETRY_CAP:
            raise RuntimeError(f"could not place {nbar} centres")
        x = np.array([draw(a) for a in range(dimension)])
        m = wrap(np.mod(-x, 1.0))
        kx, km = tuple(np.round(x, 12)), tuple(np.round(m, 12))
        if kx in seen or km in seen or kx == km:
            continue
        seen.update([kx, km])
        w = weight()
        deltas += [x, m]
        weights += [w, w]
    return PattersonMap(dimension, np.array(weights), np.array(deltas))
