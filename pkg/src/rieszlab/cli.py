"""Command-line entry point: ``rieszlab <subcommand> [options]``.

Exit codes: 0 success, 1 a check failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import csv
import io
import json
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .constants import (DimOrder, averaging_constant, complex_sphere_moment, domination_constant,
                        gamma_k, index_count, rotation_prefactor, sphere_moment)
from .experiments import (REPORT_COLUMNS, SweepConfig, d_profile, fit_slopes, load_config,
                          reports_to_csv, reports_to_json, resolve_threads, rows_to_csv,
                          run_ratio_sweep, run_square_sweep)
from .factorization import UnsupportedMethodError
from .fields import GridSpec, default_grid, dump_field, random_bandlimited

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _table(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0].keys())
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(rows, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1, default=float)


def _dk(args) -> DimOrder:
    try:
        return DimOrder(args.d, args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ----------------------------------------------------------------------------
# subcommands

def cmd_constants(args) -> int:
    dk = _dk(args)
    rows = [
        {"quantity": "gamma_k", "d": dk.d, "k": dk.k, "value": gamma_k(dk).value},
        {"quantity": "gamma_k_complex", "d": dk.d, "k": dk.k,
         "value": gamma_k(dk, ambient="complex_2d").value},
        {"quantity": "averaging_constant", "d": dk.d, "k": dk.k, "value": averaging_constant(dk).value},
        {"quantity": "index_count", "d": dk.d, "k": dk.k, "value": index_count(dk)},
        {"quantity": "sphere_moment", "d": dk.d, "k": dk.k, "value": sphere_moment(dk).value},
        {"quantity": "complex_sphere_moment", "d": dk.d, "k": dk.k,
         "value": complex_sphere_moment(dk).value},
        {"quantity": "rotation_prefactor", "d": dk.d, "k": dk.k, "value": rotation_prefactor(dk).value},
        {"quantity": "domination_constant", "d": dk.d, "k": dk.k,
         "value": domination_constant(dk).value},
    ]
    _emit(_table(rows), args.out)
    _emit_json(rows, args.json)
    return EXIT_OK


def cmd_profile(args) -> int:
    from .factorization import closed_form_1d, profile_grid_ratio, profile_to_csv, quadrature_profile
    from .factorization import RadialProfile
    from .harmonics import monomial

    dk = _dk(args)
    rhos = np.linspace(0.0, args.rho_max, args.points + 1)[1:]
    if args.method == "quadrature":
        prof = quadrature_profile(dk, rhos)
    elif args.method == "closed":
        if (dk.d, dk.k) != (1, 1):
            raise UsageError("closed form is available for d=1, k=1 only")
        prof = RadialProfile(rhos, closed_form_1d(rhos).astype(complex), dk, "closed_form")
    else:
        spec = GridSpec(dk.d, args.N or default_grid(dk.d).N, args.L)
        f = random_bandlimited(spec, args.seed, band=spec.N // 4)
        P = monomial(tuple(range(1, dk.k + 1)), dk.d)
        prof = profile_grid_ratio(dk, args.t, spec, f, P)
    _emit(profile_to_csv(prof), args.out)
    return EXIT_OK


def second_harmonic(dk: DimOrder):
    """A degree-``k`` harmonic that is not a coordinate relabelling of a monomial.

    ``x1 + 2 x2`` for ``k = 1``, otherwise ``(x1^2 - x2^2 + x1 x2) x3 ... xk``.
    """
    from .harmonics import parse_harmonic

    d, k = dk.d, dk.k
    if d < 2:
        raise UsageError("a second harmonic needs d >= 2")

    def line(c, e):
        return f"{c} " + " ".join(str(v) for v in e)

    if k == 1:
        terms = [(1, [1, 0]), (2, [0, 1])]
    else:
        terms = [(1, [2, 0]), (-1, [0, 2]), (1, [1, 1])]
    tail = [1 if 3 <= i + 1 <= k else 0 for i in range(2, d)]
    text = "\n".join(line(c, e + tail) for c, e in terms)
    return parse_harmonic(text, d)


def cmd_factorize_check(args) -> int:
    from .factorization import closed_form_1d, profile_grid_ratio, profile_quadrature
    from .harmonics import monomial

    dk = _dk(args)
    spec = GridSpec(dk.d, args.N or default_grid(dk.d).N, args.L)
    f = random_bandlimited(spec, args.seed, band=spec.N // 4)
    if args.dump:
        dump_field(f, args.dump)
    P = monomial(tuple(range(1, dk.k + 1)), dk.d)
    prof = profile_grid_ratio(dk, args.t, spec, f, P)
    sel = (prof.rho_values >= 0.1) & (prof.rho_values <= 4.0)
    rho, got = prof.rho_values[sel], prof.m_values[sel]
    if dk.d == 1:
        ref, method = closed_form_1d(rho), "closed_form"
    elif dk.d % 2:
        ref, method = np.array([profile_quadrature(dk, r) for r in rho]), "quadrature"
    else:
        other = profile_grid_ratio(dk, args.t, spec, f, second_harmonic(dk))
        common, ia, ib = np.intersect1d(prof.mode_norm2[sel], other.mode_norm2,
                                        return_indices=True)
        rho, got, ref = rho[ia], got[ia], other.m_values[ib]
        method = "second_harmonic"
    err = float(np.max(np.abs(got - ref))) if rho.size else float("nan")
    ok = rho.size > 0 and err < args.tol
    row = {"d": dk.d, "k": dk.k, "t": args.t, "N": spec.N, "L": spec.L, "reference": method,
           "bins": int(rho.size), "max_abs_err": err, "tol": args.tol, "pass": ok}
    _emit(_table([row]), args.out)
    _emit_json([row], args.json)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_average_check(args) -> int:
    from .averaging import verify_averaging

    dk = _dk(args)
    spec = GridSpec(dk.d, args.N or default_grid(dk.d).N, args.L)
    f = random_bandlimited(spec, args.seed, band=spec.N // 8)
    if args.dump:
        dump_field(f, args.dump)
    rep = verify_averaging(dk, args.t, f, args.samples, args.seed, threads=args.threads)
    row = rep.row()
    row["tol"] = args.tol
    row["pass"] = rep.rel_err < args.tol
    _emit(_table([row]), args.out)
    _emit_json([row], args.json)
    return EXIT_OK if row["pass"] else EXIT_FAIL


_ROTATE_GEOMETRY = {1: (128, 16.0, 8, 1.0), 2: (32, 16.0, 4, 2.0)}


def cmd_rotate_check(args) -> int:
    from .harmonics import monomial
    from .rotations import reconstruct_truncated

    dk = _dk(args)
    if dk.d not in _ROTATE_GEOMETRY:
        raise UsageError("rotate-check supports d in {1, 2}")
    N, L, band, t = _ROTATE_GEOMETRY[dk.d]
    t = args.t if args.t is not None else t
    spec = GridSpec(2 * dk.d, args.N or N, L)
    f = random_bandlimited(spec, args.seed, band=band)
    if args.dump:
        dump_field(f, args.dump)
    samples = args.samples if args.samples is not None else (16 if dk.d == 1 else 4000)
    P = monomial(tuple(range(1, dk.k + 1)), dk.d)
    rep = reconstruct_truncated(f, P, t, samples, args.seed, threads=args.threads)
    tol = args.tol if args.tol is not None else (0.02 if dk.d == 1 else 0.05)
    row = rep.row()
    row.update(tol=tol, **{"pass": rep.rel_err < tol})
    _emit(_table([row]), args.out)
    _emit_json([row], args.json)
    return EXIT_OK if row["pass"] else EXIT_FAIL


def restrict_points(dk: DimOrder, t: float, seed: int) -> List[np.ndarray]:
    """Five test points: radii ``(0.25, 0.5, 0.75, 1.25, 2) t`` on seeded directions."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, dk.d, dk.k]))
    pts = []
    for c in (0.25, 0.5, 0.75, 1.25, 2.0):
        u = rng.standard_normal(dk.d)
        u /= np.linalg.norm(u)
        pts.append(c * t * u)
    return pts


def cmd_restrict_check(args) -> int:
    from .restriction import check_domination, slice_integral_check

    dk = _dk(args)
    j = tuple(range(1, dk.k + 1))
    pts = [np.array(args.x, dtype=float)] if args.x else restrict_points(dk, args.t, args.seed)
    rows = []
    ok = True
    for x in pts:
        if x.size != dk.d:
            raise UsageError(f"--x needs {dk.d} coordinates")
        rep = slice_integral_check(j, x, args.t, dk)
        good = rep.rel_err < 1e-6
        ok &= good
        rows.append({"d": dk.d, "k": dk.k, "t": args.t, "x": " ".join(_fmt(v) for v in x),
                     "lhs": rep.lhs, "rhs": rep.rhs, "rel_err": rep.rel_err, "pass": good})
    _emit(_table(rows), args.out)
    _emit_json(rows, args.json)
    if args.domination:
        spec = GridSpec(dk.d, args.N or 32, args.L)
        f = random_bandlimited(spec, args.seed, band=spec.N // 8)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 7]))
        om = rng.standard_normal(dk.d)
        om /= np.linalg.norm(om)
        dom = check_domination(f, om, args.t, dk)
        good = dom.max_ratio <= 1.05
        ok &= good
        sys.stdout.write(_table([{**dom.row(), "omega_seed": args.seed, "pass": good}]))
    return EXIT_OK if ok else EXIT_FAIL


SWEEP_EPILOG = ("CSV columns, in order: " + ", ".join(REPORT_COLUMNS) + ". "
                "With --out FILE the d-profile table goes to FILE.dprofile.csv and the "
                "exploratory log-ratio vs log p* slopes to FILE.slopes.csv.")


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else SweepConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    out = args.out or cfg.out
    threads = args.threads
    if args.square:
        reports = run_square_sweep(cfg, threads=threads)
    else:
        reports = run_ratio_sweep(cfg, threads=threads)
    _emit(reports_to_csv(reports), out)
    if out:
        with open(out + ".dprofile.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv(d_profile(reports)))
        with open(out + ".slopes.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv(fit_slopes(reports)))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(reports_to_json(reports))
    failed = [r for r in reports if r.diagnostics.get("error")]
    return EXIT_FAIL if failed else EXIT_OK


# ----------------------------------------------------------------------------
# parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (fallback: RLAB_THREADS, then 1)")
    p.add_argument("--config", default=None, help="key = value config file (sweep)")
    p.add_argument("--json", default=None, help="also write a JSON mirror to this path")
    p.add_argument("--dump", default=None, help="write the test field to this path")
    return p


def _dk_args(p: argparse.ArgumentParser, d: int = 1, k: int = 1) -> None:
    p.add_argument("--d", type=int, default=d)
    p.add_argument("--k", type=int, default=k)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="rieszlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rieszlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("constants", parents=[common], help="table of Gamma constants")
    _dk_args(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("profile", parents=[common], help="radial profile as CSV")
    _dk_args(p)
    p.add_argument("--method", choices=("quadrature", "grid", "closed"), default="quadrature")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--rho-max", dest="rho_max", type=float, default=4.0)
    p.add_argument("--points", type=int, default=80)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--L", type=float, default=16.0)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("factorize-check", parents=[common], help="grid-ratio profile vs reference")
    _dk_args(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--L", type=float, default=16.0)
    p.add_argument("--tol", type=float, default=0.02)
    p.set_defaults(func=cmd_factorize_check)

    p = sub.add_parser("average-check", parents=[common], help="Haar averaging identity")
    _dk_args(p, 2, 1)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--L", type=float, default=16.0)
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=cmd_average_check)

    p = sub.add_parser("rotate-check", parents=[common], help="complex method of rotations")
    _dk_args(p)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_rotate_check)

    p = sub.add_parser("restrict-check", parents=[common], help="slice-integral identity")
    _dk_args(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x", type=float, nargs="+", default=None, help="single test point")
    p.add_argument("--domination", action="store_true", help="also run the pointwise domination check")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--L", type=float, default=16.0)
    p.set_defaults(func=cmd_restrict_check)

    p = sub.add_parser("sweep", parents=[common], help="maximal/plain ratio sweep",
                       epilog=SWEEP_EPILOG)
    p.add_argument("--square", action="store_true", help="square-function sweep over all monomials")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args.threads = resolve_threads(args.threads)
    except ValueError as exc:
        sys.stderr.write(f"rieszlab: {exc}\n")
        return EXIT_USAGE
    if args.command != "sweep" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (UsageError, UnsupportedMethodError, FileNotFoundError) as exc:
        sys.stderr.write(f"rieszlab {args.command}: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        if args.command == "sweep":
            sys.stderr.write(f"rieszlab sweep: {exc}\n")
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
