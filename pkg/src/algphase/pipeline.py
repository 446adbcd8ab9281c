"""End-to-end run: structure -> intensities -> basic set -> pattern -> atoms."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .basis import (
    BasicSet,
    IntensityGram,
    JGram,
    compute_S1,
    j_matrix,
    search_basic_set,
    validate_basic_set,
)
from .crystal import MERGE_TOL, CrystalStructure, IntensitySet, synth_window
from .errors import (
    AlgPhaseError,
    MissingReflectionError,
    ReconstructionStall,
    SingularBasisError,
    WindowExhaustedError,
)
from .inversion import MAX_ATOMS, deconvolve_to_atoms, recover_patterson, structure_distance
from .lattice import RANK_TOL, axis_permutation
from .reconstruction import Expander, completeness_sets, extend_pattern, hull_rows

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WINDOW = 2


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the pipeline and the command line."""

    mode: str = "neutron"
    axis: str = "a"
    rank_rel_tol: float = RANK_TOL
    merge_tol: float = MERGE_TOL
    residual_tol: float = 1e-6
    check_tol: float = 1e-5
    window: tuple | None = None
    seed: int = 0
    precision: str = "double"

    def __post_init__(self):
        if self.mode not in ("xray", "neutron"):
            raise ValueError(f"mode must be xray or neutron, got {self.mode!r}")
        if self.axis not in ("a", "b", "c"):
            raise ValueError(f"axis must be a, b or c, got {self.axis!r}")
        for name in ("rank_rel_tol", "merge_tol", "residual_tol", "check_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.window is not None and any(int(w) < 1 for w in self.window):
            raise ValueError("window half-widths must be positive")
        if self.precision not in ("double", "extended"):
            raise ValueError(f"precision must be double or extended, got {self.precision!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def default_window(n_atoms: int, dimension: int, axis: str = "a") -> tuple:
    """Box large enough for a basic set stretched along ``axis`` when all
    projections are distinct: the scan reaches ``N(N-1)`` along the axis and
    S1 is half the window."""
    nbar = max(1, n_atoms * (n_atoms - 1))
    win = [3] * dimension
    win[axis_permutation(axis, dimension)[0]] = 2 * nbar + 2
    return tuple(win)


@dataclass
class PipelineResult:
    exit_code: int
    message: str
    artifacts: dict = field(default_factory=dict)
    basic_set: BasicSet | None = None
    solutions: list = field(default_factory=list)
    error: float = np.inf
    diagnostics: list = field(default_factory=list)


def find_basic_set(i: IntensitySet, cfg: RunConfig) -> BasicSet:
    """Search along ``cfg.axis``; neutron mode uses the J matrix over S1."""
    if cfg.mode == "neutron":
        s1 = compute_S1(i)
        if not any(all(x == 0 for x in h) for h in s1.s1):
            raise WindowExhaustedError(tuple([0] * i.dimension))
        oracle = JGram(j_matrix(i, s1))
    else:
        oracle = IntensityGram(i)
    return search_basic_set(oracle, cfg.mode, cfg.rank_rel_tol, i.dimension, cfg.axis)


def _misfit(a, b, refs) -> float:
    scale = max((abs(b[h]) for h in refs), default=1.0) or 1.0
    return max((abs(a[h] - b[h]) for h in refs), default=0.0) / scale


def check_basic_set(i: IntensitySet, b: BasicSet, cfg: RunConfig) -> float:
    """Misfit of the data predicted from the basic set, relative to ``max |I_h|``.

    Every reflection of ``i`` whose expansion needs only available data is
    predicted by least squares over rows around the basic set. A basic set
    found in a window too small for it cannot reproduce the data.
    """
    rows = [s for s in hull_rows(b, 1) if all(tuple(np.subtract(s, k)) in i for k in b.reflections)]
    ex = Expander(b, i, cfg.rank_rel_tol, rows=rows)
    pred = {h: ex.predict(h) for h in i if ex.ready(h)}
    return _misfit(pred, i, list(pred))


def reconstruct_from_complete_set(i: IntensitySet, b: BasicSet, cfg: RunConfig) -> tuple[IntensitySet, float]:
    """Extend the pattern over the window of ``i`` from C and F only.

    Returns the extended set and its misfit to ``i``. The KH matrix is the
    Gram matrix of the lattice vectors, so its spectral ratio is tested
    against the square of the rank tolerance.
    """
    i0 = i.restricted(completeness_sets(b).union())
    window = tuple(int(np.max(np.abs(np.array(i.reflections())[:, d]))) for d in range(i.dimension))
    ext = extend_pattern(i0, b, window, cfg.rank_rel_tol**2)
    return ext, _misfit(ext, i, list(i))


def run_pipeline(cfg: RunConfig, structure_path, outdir=None) -> PipelineResult:
    """Full round trip for the structure in ``structure_path``.

    Exit code 0 on success, 2 when the window is too small to determine a
    basic set (or its predictions disagree with the data), 1 otherwise.
    Intermediate files go to ``outdir`` when given.
    """
    try:
        s = io.read_structure(structure_path)
    except (OSError, ValueError) as e:
        return PipelineResult(EXIT_ERROR, f"cannot read structure: {e}")
    return run_structure(cfg, s, outdir)


def run_structure(cfg: RunConfig, s: CrystalStructure, outdir=None) -> PipelineResult:
    """:func:`run_pipeline` on an in-memory structure."""
    out = Path(outdir) if outdir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    res = PipelineResult(EXIT_ERROR, "")

    def save(name, writer, obj, *extra):
        if out is not None:
            path = out / name
            writer(path, obj, *extra)
            res.artifacts[name] = str(path)

    try:
        return _run(cfg, s, res, save)
    except (WindowExhaustedError, ReconstructionStall, MissingReflectionError) as e:
        res.exit_code, res.message = EXIT_WINDOW, f"window too small: {e}"
    except (AlgPhaseError, ValueError, np.linalg.LinAlgError) as e:
        res.exit_code, res.message = EXIT_ERROR, f"{type(e).__name__}: {e}"
    return res


def _run(cfg: RunConfig, s: CrystalStructure, res: PipelineResult, save) -> PipelineResult:
    window = cfg.window or default_window(s.n_atoms, s.dimension, cfg.axis)
    if len(window) != s.dimension:
        raise ValueError(f"window {window} does not match dimension {s.dimension}")
    i = synth_window(s, window)
    save("intensities.txt", io.write_intensities, i)

    if s.n_atoms == 1:
        # nothing off the origin: every subtracted intensity vanishes
        res.solutions = [CrystalStructure(s.charges, np.zeros((1, s.dimension)))]
        res.exit_code, res.error, res.message = EXIT_OK, 0.0, "single atom"
        return res
    b = find_basic_set(i, cfg)
    res.basic_set = b
    save("basis.txt", io.write_basic_set, b)
    # the KH matrix is a Gram matrix of lattice vectors: compare at squared tolerance
    ratio = validate_basic_set(b, i, cfg.rank_rel_tol**2)
    if ratio < cfg.rank_rel_tol**2:
        res.diagnostics.append(f"intensity KH matrix over the basic set is singular (ratio {ratio:.3g})")

    try:
        misfit = check_basic_set(i, b, cfg)
    except SingularBasisError as e:
        res.exit_code = EXIT_ERROR
        res.message = f"tolerance: basic set too ill-conditioned to use ({e})"
        return res
    if misfit > cfg.check_tol:
        res.exit_code = EXIT_WINDOW
        res.message = (
            f"window too small: the {len(b)}-element basic set predicts the data "
            f"with misfit {misfit:.3g}"
        )
        return res

    try:
        ext, ext_misfit = reconstruct_from_complete_set(i, b, cfg)
        save("reconstructed.txt", io.write_intensities, ext)
        if ext_misfit > cfg.check_tol:
            res.diagnostics.append(f"extension from C and F drifts by {ext_misfit:.3g}")
    except ReconstructionStall as e:
        save("reconstructed.txt", io.write_intensities, e.partial, e.gaps)
        res.diagnostics.append(str(e))
    except SingularBasisError as e:
        res.diagnostics.append(f"extension from C and F skipped: {e}")

    rec = recover_patterson(i, b, residual_tol=cfg.residual_tol)
    save("patterson.txt", io.write_patterson, rec.patterson)
    if s.n_atoms > MAX_ATOMS:
        res.exit_code, res.message = EXIT_ERROR, f"deconvolution supports at most {MAX_ATOMS} atoms"
        return res
    sols = deconvolve_to_atoms(rec, s.n_atoms, s.charges, max(cfg.residual_tol, 1e-6), cfg.merge_tol)
    res.solutions = sols
    for k, sol in enumerate(sols):
        save(f"structure_{k}.txt", io.write_structure, sol)
    errs = [structure_distance(s, x) for x in sols]
    res.error = min(errs, default=np.inf)
    if res.error < cfg.residual_tol:
        res.exit_code = EXIT_OK
        res.message = f"recovered structure, position error {res.error:.3g}"
        others = sum(e >= cfg.residual_tol for e in errs)
        if others:
            res.diagnostics.append(f"{others} homometric solution(s) also fit the Patterson map")
    else:
        res.exit_code = EXIT_ERROR
        if sols:
            res.message = f"homometric: {len(sols)} solution(s) fit, none is the input structure"
        else:
            res.message = "no structure reproduces the recovered Patterson map at tolerance"
    return res
