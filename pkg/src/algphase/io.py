"""Plain-text file formats.

Every real is written with 17 significant digits, which round-trips a double
exactly. Blank lines and ``#`` comments are ignored on input.

structure:  ``D N`` then ``Z x y [z]`` per atom
patterson:  ``D NBAR`` then ``NU x y [z]`` per centre
intensity:  ``D [SUMZSQ]`` then ``h k [l] I`` per Friedel pair, and an
            optional ``GAPS`` section listing unreachable reflections
basic set:  ``D AXIS MODE`` then one reflection per line, then ``ZEROS``
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .basis import BasicSet
from .crystal import CrystalStructure, IntensitySet, PattersonMap


class FormatError(ValueError):
    """Malformed input file."""

    def __init__(self, path, line: int, msg: str):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {msg}")


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def _read(path) -> list:
    return list(_lines(Path(path).read_text(encoding="utf-8")))


def _header(path, rows, kinds: Sequence[type], name: str, optional: int = 0):
    if not rows:
        raise FormatError(path, 1, f"empty {name} file")
    n, tok = rows[0]
    if not len(kinds) - optional <= len(tok) <= len(kinds):
        raise FormatError(path, n, f"{name} header needs {len(kinds) - optional} to {len(kinds)} fields")
    try:
        return [k(t) for k, t in zip(kinds, tok)]
    except ValueError as e:
        raise FormatError(path, n, f"bad {name} header: {e}") from None


def _floats(path, n, tok, count):
    if len(tok) != count:
        raise FormatError(path, n, f"expected {count} fields, found {len(tok)}")
    try:
        return [float(t) for t in tok]
    except ValueError as e:
        raise FormatError(path, n, str(e)) from None


def _ints(path, n, tok, count):
    if len(tok) != count:
        raise FormatError(path, n, f"expected {count} indices, found {len(tok)}")
    try:
        return tuple(int(t) for t in tok)
    except ValueError as e:
        raise FormatError(path, n, str(e)) from None


def _check_dim(path, d):
    if d not in (2, 3):
        raise FormatError(path, 1, f"dimension must be 2 or 3, got {d}")


# -- structure and Patterson -------------------------------------------------


def format_structure(s: CrystalStructure) -> str:
    out = [f"{s.dimension} {s.n_atoms}"]
    out += [" ".join(_fmt(v) for v in (z, *p)) for z, p in zip(s.charges, s.positions)]
    return "\n".join(out) + "\n"


def _weighted_points(path, name):
    rows = _read(path)
    d, count = _header(path, rows, (int, int), name)
    _check_dim(path, d)
    body = rows[1:]
    if len(body) != count:
        raise FormatError(path, rows[0][0], f"header announces {count} entries, found {len(body)}")
    vals = np.array([_floats(path, n, tok, d + 1) for n, tok in body]).reshape(count, d + 1)
    return d, vals[:, 0], vals[:, 1:]


def read_structure(path) -> CrystalStructure:
    d, z, pos = _weighted_points(path, "structure")
    try:
        return CrystalStructure(z, pos)
    except ValueError as e:
        raise FormatError(path, 1, str(e)) from None


def write_structure(path, s: CrystalStructure) -> None:
    Path(path).write_text(format_structure(s), encoding="utf-8")


def format_patterson(p: PattersonMap) -> str:
    out = [f"{p.dimension} {p.nbar}"]
    out += [" ".join(_fmt(v) for v in (w, *dl)) for w, dl in zip(p.weights, p.deltas)]
    return "\n".join(out) + "\n"


def read_patterson(path) -> PattersonMap:
    d, w, dl = _weighted_points(path, "Patterson")
    try:
        return PattersonMap(d, w, dl)
    except ValueError as e:
        raise FormatError(path, 1, str(e)) from None


def write_patterson(path, p: PattersonMap) -> None:
    Path(path).write_text(format_patterson(p), encoding="utf-8")


# -- intensities -------------------------------------------------------------


def format_intensities(i: IntensitySet, gaps: Iterable = ()) -> str:
    head = f"{i.dimension}" if i.sum_zsq is None else f"{i.dimension} {_fmt(i.sum_zsq)}"
    out = [head]
    out += [" ".join(str(x) for x in h) + " " + _fmt(v) for h, v in i.items()]
    gaps = list(gaps)
    if gaps:
        out.append("GAPS")
        out += [" ".join(str(x) for x in h) for h in gaps]
    return "\n".join(out) + "\n"


def read_intensities_with_gaps(path) -> tuple[IntensitySet, list[tuple]]:
    rows = _read(path)
    head = _header(path, rows, (int, float), "intensity", optional=1)
    d = head[0]
    _check_dim(path, d)
    entries, gaps, in_gaps = {}, [], False
    for n, tok in rows[1:]:
        if tok == ["GAPS"]:
            in_gaps = True
            continue
        if in_gaps:
            gaps.append(_ints(path, n, tok, d))
            continue
        if len(tok) != d + 1:
            raise FormatError(path, n, f"expected {d + 1} fields, found {len(tok)}")
        h = _ints(path, n, tok[:d], d)
        (v,) = _floats(path, n, tok[d:], 1)
        if h in entries:
            raise FormatError(path, n, f"reflection {h} listed twice")
        entries[h] = v
    try:
        i = IntensitySet(d, entries, head[1] if len(head) > 1 else None)
    except ValueError as e:
        raise FormatError(path, 1, str(e)) from None
    return i, gaps


def read_intensities(path) -> IntensitySet:
    return read_intensities_with_gaps(path)[0]


def write_intensities(path, i: IntensitySet, gaps: Iterable = ()) -> None:
    Path(path).write_text(format_intensities(i, gaps), encoding="utf-8")


# -- basic sets --------------------------------------------------------------


def format_basic_set(b: BasicSet) -> str:
    out = [f"{b.dimension} {b.axis} {b.mode}"]
    out += [" ".join(str(x) for x in h) for h in b.reflections]
    out.append("ZEROS")
    out += [" ".join(str(x) for x in h) for h in b.zeros]
    return "\n".join(out) + "\n"


def read_basic_set(path) -> BasicSet:
    rows = _read(path)
    d, axis, mode = _header(path, rows, (int, str, str), "basic-set")
    _check_dim(path, d)
    refs, zeros, target = [], [], None
    target = refs
    for n, tok in rows[1:]:
        if tok == ["ZEROS"]:
            target = zeros
            continue
        target.append(_ints(path, n, tok, d))
    if not refs:
        raise FormatError(path, 1, "basic set is empty")
    return BasicSet(tuple(refs), axis, tuple(zeros), mode)


def write_basic_set(path, b: BasicSet) -> None:
    Path(path).write_text(format_basic_set(b), encoding="utf-8")
