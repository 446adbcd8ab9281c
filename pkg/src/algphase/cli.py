"""Command-line front end (``algphase``)."""
from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .crystal import compute_patterson, synth_window
from .errors import AlgPhaseError, ReconstructionStall, WindowExhaustedError
from .generate import generate_random_structure
from .inversion import deconvolve_to_atoms, recover_patterson
from .lattice import (
    RANK_TOL,
    kh_det_closed_form,
    kh_matrix,
    numeric_det,
    principal_vandermonde,
    shape_profile,
    vandermonde_det_closed_form,
)
from .pipeline import EXIT_ERROR, EXIT_OK, EXIT_WINDOW, RunConfig, find_basic_set, run_pipeline
from .reconstruction import extend_pattern


def _window(text: str) -> tuple:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be H[,K[,L]], got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("window half-widths must be positive integers")
    return vals


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--tol", type=float, default=d(None), help="tolerance (meaning depends on the command)")
    g.add_argument("--seed", type=int, default=d(0))
    g.add_argument("--mode", choices=("xray", "neutron"), default=d("neutron"))
    g.add_argument("--axis", choices=("a", "b", "c"), default=d("a"))
    g.add_argument("--window", type=_window, default=d(None), help="half-widths H[,K[,L]]")
    g.add_argument("--precision", choices=("double", "extended"), default=d("double"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algphase", description="Algebraic phase retrieval for point-atom crystals."
    )
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = argparse.ArgumentParser(add_help=False)
    _global_flags(parent, suppress=True)

    p = sub.add_parser("gen", parents=[parent], help="write a random structure")
    p.add_argument("--n-atoms", type=int, required=True)
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--min-separation", type=float, default=0.05)
    p.add_argument("--charge-range", type=_floats, default=[0.5, 3.0])
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("synth", parents=[parent], help="structure -> intensity file")
    p.add_argument("structure")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("patterson", parents=[parent], help="structure -> Patterson file")
    p.add_argument("structure")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("basis", parents=[parent], help="intensity file -> basic-set file")
    p.add_argument("intensities")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("reconstruct", parents=[parent], help="extend intensities over a window")
    p.add_argument("basis")
    p.add_argument("intensities")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("invert", parents=[parent], help="intensities -> Patterson map and atoms")
    p.add_argument("intensities")
    p.add_argument("--basis", help="basic-set file; searched for when omitted")
    p.add_argument("--n-atoms", type=int)
    p.add_argument("--charges", type=_floats)
    p.add_argument("-o", "--output", required=True, help="output prefix")

    p = sub.add_parser("verify-det", parents=[parent], help="closed-form vs numeric determinants")
    p.add_argument("patterson")

    p = sub.add_parser("pipeline", parents=[parent], help="full round trip from a structure file")
    p.add_argument("structure")
    p.add_argument("-o", "--outdir", default=None)
    return parser


def _config(args, **extra) -> RunConfig:
    kw = dict(mode=args.mode, axis=args.axis, window=args.window, seed=args.seed, precision=args.precision)
    kw.update(extra)
    return RunConfig(**kw)


def cmd_gen(args) -> int:
    lo, hi = args.charge_range
    s = generate_random_structure(args.seed, args.n_atoms, args.dim, args.min_separation, (lo, hi), args.mode)
    io.write_structure(args.output, s)
    return EXIT_OK


def cmd_synth(args) -> int:
    s = io.read_structure(args.structure)
    window = args.window or (4,) * s.dimension
    io.write_intensities(args.output, synth_window(s, window))
    return EXIT_OK


def cmd_patterson(args) -> int:
    io.write_patterson(args.output, compute_patterson(io.read_structure(args.structure)))
    return EXIT_OK


def cmd_basis(args) -> int:
    i = io.read_intensities(args.intensities)
    cfg = _config(args, rank_rel_tol=args.tol or RANK_TOL)
    b = find_basic_set(i, cfg)
    io.write_basic_set(args.output, b)
    print(f"basic set of {len(b)} reflections, {len(b.zeros)} zeros")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    b = io.read_basic_set(args.basis)
    i = io.read_intensities(args.intensities)
    window = args.window or (4,) * i.dimension
    try:
        out = extend_pattern(i, b, window, args.tol or RANK_TOL)
    except ReconstructionStall as e:
        io.write_intensities(args.output, e.partial, e.gaps)
        print(f"stalled: {len(e.gaps)} reflections unreachable", file=sys.stderr)
        return EXIT_ERROR
    io.write_intensities(args.output, out)
    return EXIT_OK


def cmd_invert(args) -> int:
    i = io.read_intensities(args.intensities)
    cfg = _config(args)
    b = io.read_basic_set(args.basis) if args.basis else find_basic_set(i, cfg)
    rec = recover_patterson(i, b, residual_tol=args.tol or 1e-6)
    io.write_patterson(f"{args.output}.patterson.txt", rec.patterson)
    print(f"Patterson map with {rec.nbar} centres, fit residual {rec.fit_residual:.3g}")
    if args.n_atoms:
        charges = args.charges or [1.0] * args.n_atoms
        sols = deconvolve_to_atoms(rec, args.n_atoms, charges, tol=max(args.tol or 1e-6, 1e-6))
        for k, s in enumerate(sols):
            io.write_structure(f"{args.output}.structure_{k}.txt", s)
        print(f"{len(sols)} structure(s)")
    return EXIT_OK


def cmd_verify_det(args) -> int:
    p = io.read_patterson(args.patterson)
    tol = args.tol or 1e-8
    shape = shape_profile(p, args.axis)
    closed = vandermonde_det_closed_form(p, shape)
    numeric = numeric_det(principal_vandermonde(p, shape), args.precision)
    err = abs(closed - numeric) / abs(numeric)
    kh_closed = kh_det_closed_form(p, args.axis)
    kh_num = numeric_det(
        kh_matrix(_ExactIntensities(p), shape.principal_reflections()).matrix, args.precision
    ).real
    kh_err = abs(kh_closed - kh_num) / abs(kh_num)
    print(f"det V   closed {closed:.17g}  numeric {numeric:.17g}  rel.err {err:.3g}")
    print(f"det KH  closed {kh_closed:.17g}  numeric {kh_num:.17g}  rel.err {kh_err:.3g}")
    return EXIT_OK if max(err, kh_err) <= tol else EXIT_ERROR


class _ExactIntensities:
    """Intensities synthesized on demand from a Patterson map."""

    def __init__(self, p):
        self.p = p

    def __getitem__(self, h):
        from .crystal import subtracted_intensity

        return subtracted_intensity(self.p, h)


def cmd_pipeline(args) -> int:
    extra = {"rank_rel_tol": args.tol} if args.tol else {}
    res = run_pipeline(_config(args, **extra), args.structure, args.outdir)
    print(res.message)
    for d in res.diagnostics:
        print(f"note: {d}")
    return res.exit_code


COMMANDS = {
    "gen": cmd_gen,
    "synth": cmd_synth,
    "patterson": cmd_patterson,
    "basis": cmd_basis,
    "reconstruct": cmd_reconstruct,
    "invert": cmd_invert,
    "verify-det": cmd_verify_det,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except WindowExhaustedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_WINDOW
    except (AlgPhaseError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
