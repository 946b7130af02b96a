"""Command-line front end: ``construct``, ``verify``, ``density``, ``spectrum``.

Exit codes: 0 success (and, for ``verify``, every check passed), 1 a
verification check failed, 2 bad input or a refused run.
"""
from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from . import intervals as iv
from .construction import (
    DEFAULT_HALF_WIDTH,
    DEFAULT_OVERSAMPLE,
    DEFAULT_SAMPLE_CAP,
    SchedulerPolicy,
    load_state,
    run,
    save_state,
)
from .errors import CapacityError, MissingHistoryError, NyquistError
from .signal import dft_spectrum, integral, write_spectrum_csv
from .verifier import ToleranceConfig, full_report

logger = logging.getLogger("smallspec")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DENSITY_DECIMALS = 12


class UsageError(Exception):
    pass


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def render_decimal(x: Fraction, places: int = DENSITY_DECIMALS) -> str:
    """Exact rational rounded half-even to ``places`` decimals."""
    with localcontext() as ctx:
        ctx.prec = 60
        value = Decimal(x.numerator) / Decimal(x.denominator)
        return str(value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


# --------------------------------------------------------------------------


def cmd_construct(args: argparse.Namespace) -> int:
    policy = SchedulerPolicy(args.scheduler, args.margin, args.growth)
    state = run(
        args.iters,
        half_width=args.T,
        oversample=args.oversample,
        policy=policy,
        retain_G=args.retain_G,
        sample_cap=args.sample_cap,
        k_seq=args.k,
        force=args.force,
    )
    path = save_state(state, args.out)
    g = state.grid
    print(f"grid: T={g.half_width:g} delta={g.step:.6g} M={g.count} nyquist={g.nyquist:.6g}")
    print(f"C = {state.C:.12g}")
    print(f"{'n':>3} {'k_n':>12} {'hull':>24} {'int F_n':>16} {'I_n':>16} {'int G_n^2':>16}")
    for n in range(state.stage + 1):
        k = "-" if n == 0 else str(state.k_seq[n - 1])
        hull = repr(state.Q_hulls[n])
        F = state.signal_at(n)
        mass = f"{integral(F):.10g}" if F is not None else "-"
        ge = "-" if n == 0 else f"{state.g_energy[n - 1]:.10g}"
        print(f"{n:>3} {k:>12} {hull:>24} {mass:>16} {state.I_seq[n]:>16.10g} {ge:>16}")
    print(f"Q_pieces: {state.Q_pieces.to_json()}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    state = load_state(args.state)
    tol = ToleranceConfig(
        rel_quad=args.rel_quad,
        rel_ortho=args.rel_ortho,
        rel_leak=args.rel_leak,
        guard_bins=args.guard_bins,
        range_slack=args.range_slack,
    )
    report = full_report(state, tol=tol)
    out = Path(args.report) if args.report else _state_dir(args.state) / "report.json"
    out.write_text(report.to_json() + "\n")
    failures = report.failures
    print(f"{len(report.checks)} checks, {len(failures)} failed")
    for rec in failures:
        label = f" [{rec.label}]" if rec.label else ""
        print(f"FAIL {rec.name} stage {rec.stage}{label}: residual {rec.residual:.3g} > tol {rec.tol:.3g}")
    trend = report.meta["indicator_distance"]
    print("indicator distance D_n: " + ", ".join(f"{d:.6g}" for d in trend["D"]))
    print(f"wrote {out}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_density(args: argparse.Namespace) -> int:
    state = load_state(args.state)
    if args.r:
        radii = sorted(set(args.r))
    else:
        if args.step is None or args.rmax is None:
            raise UsageError("give --rmax and --step, or explicit --r values")
        if args.step <= 0:
            raise UsageError("--step must be positive")
        if args.rmax < args.step:
            raise UsageError("--rmax must be at least --step")
        count = int(args.rmax // args.step)
        radii = [args.step * i for i in range(1, count + 1)]
    if radii[0] <= 0:
        raise UsageError("radii must be positive")
    rows = iv.density_profile(state.Q_pieces, radii)
    out = Path(args.out) if args.out else _state_dir(args.state) / "density.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["R", "h", "h_over_R"])
        for R, h, ratio in rows:
            writer.writerow([_render_r(R), render_decimal(h), render_decimal(ratio)])
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _render_r(R: Fraction) -> str:
    return str(R.numerator) if R.denominator == 1 else render_decimal(R)


_WHICH = re.compile(r"^(F|G)(\d*)$")


def select_signal(state, which: str):
    m = _WHICH.match(which)
    if not m:
        raise UsageError(f"--which must look like F, F0, F3 or G2, got {which!r}")
    kind, idx = m[1], m[2]
    if kind == "F":
        n = state.stage if idx == "" else int(idx)
        if n > state.stage:
            raise UsageError(f"{which}: run has only {state.stage} stages")
        sig = state.signal_at(n)
        if sig is None:
            raise MissingHistoryError(f"{which} was not retained; rerun construct with --retain-G")
        return sig
    if idx == "":
        raise UsageError("G needs a stage index, e.g. G1")
    n = int(idx)
    if not 1 <= n <= state.stage:
        raise UsageError(f"{which}: no such stage in a {state.stage}-stage run")
    if state.G_history is None:
        raise MissingHistoryError(f"{which} was not retained; rerun construct with --retain-G")
    return state.G_history[n - 1]


def cmd_spectrum(args: argparse.Namespace) -> int:
    state = load_state(args.state)
    sig = select_signal(state, args.which)
    est = dft_spectrum(sig)
    out = Path(args.out) if args.out else _state_dir(args.state) / f"spectrum_{args.which}.csv"
    write_spectrum_csv(out, est)
    peak = int(abs(est.amplitudes).argmax())
    print(f"peak |amp| {abs(est.amplitudes[peak]):.10g} at xi={est.freqs[peak]:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _state_dir(path) -> Path:
    p = Path(path)
    return p if p.is_dir() else p.parent


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smallspec",
        description="Build and verify a finite-measure indicator construction with density-zero spectrum.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="run the iteration and write state.json + CSVs")
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--scheduler", choices=["minimal", "slow_density"], default="minimal")
    p.add_argument("--margin", type=int, default=1)
    p.add_argument("--growth", default="n", help="growth index: n, 3n, n^2, log or a constant")
    p.add_argument("--T", type=float, default=DEFAULT_HALF_WIDTH, help="window half width")
    p.add_argument("--oversample", type=float, default=DEFAULT_OVERSAMPLE)
    p.add_argument("--sample-cap", type=int, default=DEFAULT_SAMPLE_CAP)
    p.add_argument("--out", default="run")
    p.add_argument("--retain-G", dest="retain_G", action="store_true", default=None)
    p.add_argument("--no-retain-G", dest="retain_G", action="store_false")
    p.add_argument("--k", type=_int_list, default=None, help="explicit k sequence, comma separated")
    p.add_argument("--force", action="store_true", help="accept inadmissible k (fault injection)")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="check every identity; exit 0 iff all pass")
    p.add_argument("state")
    defaults = ToleranceConfig()
    p.add_argument("--rel-quad", type=float, default=defaults.rel_quad)
    p.add_argument("--rel-ortho", type=float, default=defaults.rel_ortho)
    p.add_argument("--rel-leak", type=float, default=defaults.rel_leak)
    p.add_argument("--guard-bins", type=int, default=defaults.guard_bins)
    p.add_argument("--range-slack", type=float, default=defaults.range_slack)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("density", help="exact h(R) = |Q n (-R, R)| table")
    p.add_argument("state")
    p.add_argument("--rmax", type=_fraction)
    p.add_argument("--step", type=_fraction)
    p.add_argument("--r", type=_fraction, nargs="+", help="explicit radii instead of a range")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("spectrum", help="DFT spectrum CSV of F_n or G_n")
    p.add_argument("state")
    p.add_argument("--which", default="F")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CapacityError, NyquistError, MissingHistoryError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
