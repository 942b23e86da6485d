"""Empirical ratio sweeps for the maximal Riesz transforms.

Each cell ``(d, k, seed)`` builds a test field, computes ``R_P f`` and the
maximal function over a truncation grid, and reports
``||R_P^* f||_p / ||R_P f||_p`` for every exponent ``p``. Square-function
sweeps do the same with ``(sum_P |.|^2)^{1/2}`` on both sides. Cells run in a
bounded thread pool and are collected in cell order, so the output does not
depend on the number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import DimOrder
from .fields import (GridField, GridSpec, default_grid, lp_norm, periodized_gaussian,
                     random_bandlimited, single_mode)
from .harmonics import SolidHarmonic, format_harmonic, monomial, parse_harmonic
from .riesz import (TruncatedKernelSpec, TruncationGrid, apply_maximal, apply_riesz,
                    composite_terms, square_function, tail_diagnostic)

__all__ = [
    "FAMILIES",
    "SWEEP_GRIDS",
    "REPORT_COLUMNS",
    "SweepConfig",
    "RatioReport",
    "p_star",
    "build_field",
    "run_ratio_sweep",
    "run_square_sweep",
    "reports_to_csv",
    "reports_to_json",
    "fit_slopes",
    "d_profile",
    "rows_to_csv",
    "parse_config",
    "load_config",
    "resolve_threads",
]

FAMILIES = ("gaussian", "random_bandlimited", "single_mode")

# (N, L) per dimension. Boxes shrink for d >= 3 so that t_min = 2h reaches
# the unit scale of the Gaussian family.
SWEEP_GRIDS = {1: (256, 16.0), 2: (128, 16.0), 3: (64, 8.0), 4: (32, 8.0)}

REPORT_COLUMNS = ("d", "k", "p", "family", "seed", "P", "norm_Rf", "norm_Rstarf", "ratio",
                  "N", "L", "t_min", "t_max", "n_t", "aliasing", "real_space_tail", "error")


def p_star(p: float) -> float:
    """``max(p, p/(p-1))``."""
    return max(p, p / (p - 1.0))


@dataclass(frozen=True)
class SweepConfig:
    """Grid of sweep cells.

    ``pairs`` lists the ``(d, k)`` cells; by default every combination of
    ``dims`` and ``orders`` with ``k <= d``. ``grids`` overrides ``(N, L)``
    per dimension. The truncation grid runs from ``t_min_h * h`` to
    ``t_max`` (default ``L/4``) with ratio ``t_ratio``.
    """

    dims: Tuple[int, ...] = (1, 2, 3, 4)
    orders: Tuple[int, ...] = (1, 2)
    exponents: Tuple[float, ...] = (1.5, 2.0, 3.0)
    family: str = "gaussian"
    seeds: Tuple[int, ...] = (0,)
    out: Optional[str] = None
    t_min_h: float = 2.0
    t_max: Optional[float] = None
    t_ratio: float = 2 ** 0.25
    grids: Tuple[Tuple[int, int, float], ...] = ()
    band: Optional[int] = None
    mode: int = 1
    harmonic: Optional[str] = None
    pairs: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        for p in self.exponents:
            if not (math.isfinite(p) and p > 1):
                raise ValueError(f"exponent {p} must be finite and > 1")
        for d, k in self.cells_dk():
            DimOrder(d, k)

    def cells_dk(self) -> List[Tuple[int, int]]:
        if self.pairs:
            return [tuple(map(int, c)) for c in self.pairs]
        return [(d, k) for d in self.dims for k in self.orders if k <= d]

    def grid(self, d: int) -> GridSpec:
        for dd, N, L in self.grids:
            if dd == d:
                return GridSpec(d, int(N), float(L))
        if d in SWEEP_GRIDS:
            N, L = SWEEP_GRIDS[d]
            return GridSpec(d, N, L)
        return default_grid(d)

    def truncation(self, spec: GridSpec) -> TruncationGrid:
        t_max = spec.L / 4 if self.t_max is None else self.t_max
        return TruncationGrid(self.t_min_h * spec.h, t_max, self.t_ratio)


@dataclass
class RatioReport:
    d: int
    k: int
    p: float
    family: str
    seed: int
    norm_Rf: float
    norm_Rstarf: float
    ratio: float
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def row(self) -> dict:
        out = {"d": self.d, "k": self.k, "p": self.p, "family": self.family, "seed": self.seed,
               "norm_Rf": self.norm_Rf, "norm_Rstarf": self.norm_Rstarf, "ratio": self.ratio}
        for c in REPORT_COLUMNS:
            if c not in out:
                out[c] = self.diagnostics.get(c, "")
        return out


def build_field(cfg: SweepConfig, spec: GridSpec, seed: int) -> GridField:
    """Test field of the configured family."""
    if cfg.family == "gaussian":
        return periodized_gaussian(spec, a=1.0)
    if cfg.family == "random_bandlimited":
        return random_bandlimited(spec, seed, band=cfg.band)
    return single_mode(spec, [cfg.mode] * spec.n)


def _default_harmonic(cfg: SweepConfig, d: int, k: int) -> SolidHarmonic:
    if cfg.harmonic:
        P = parse_harmonic(cfg.harmonic, d)
        if P.degree != k:
            raise ValueError(f"configured harmonic has degree {P.degree}, cell needs {k}")
        return P
    return monomial(tuple(range(1, k + 1)), d)


def _cell(cfg: SweepConfig, d: int, k: int, seed: int,
          Pset: Optional[Sequence[SolidHarmonic]]) -> List[RatioReport]:
    diag: Dict[str, object] = {}
    try:
        spec = cfg.grid(d)
        diag.update(N=spec.N, L=spec.L)
        tg = cfg.truncation(spec)
        ts = tg.values
        diag.update(t_min=float(ts[0]), t_max=float(ts[-1]), n_t=len(ts))
        if Pset is None:
            Ps = [_default_harmonic(cfg, d, k)]
        else:
            Ps = list(Pset) if not callable(Pset) else list(Pset(d, k))
        for P in Ps:
            if P.dimension != d or P.degree != k:
                raise ValueError(f"harmonic of (d={P.dimension}, k={P.degree}) in cell ({d},{k})")
        diag["P"] = ";".join(format_harmonic(P).strip().replace("\n", "|") for P in Ps)
        tail = tail_diagnostic(TruncatedKernelSpec(Ps[0], float(ts[0])), spec)
        diag.update(aliasing=tail["aliasing"], real_space_tail=tail["real_space_tail"])
        f = build_field(cfg, spec, seed)
        R = [apply_riesz(f, P) for P in Ps]
        Rs = [apply_maximal(f, P, tg) for P in Ps]
        num, den = square_function(Rs), square_function(R)
        out = []
        for p in cfg.exponents:
            a, b = lp_norm(den, p), lp_norm(num, p)
            ratio = b / a if a > 0 else float("nan")
            out.append(RatioReport(d, k, float(p), cfg.family, seed, a, b, ratio, dict(diag)))
        return out
    except Exception as exc:  # recorded, sweep continues
        diag["error"] = f"{type(exc).__name__}: {exc}"
        nan = float("nan")
        return [RatioReport(d, k, float(p), cfg.family, seed, nan, nan, nan, dict(diag))
                for p in cfg.exponents]


def _run(cfg: SweepConfig, Pset, threads: int) -> List[RatioReport]:
    cells = [(d, k, s) for (d, k) in cfg.cells_dk() for s in cfg.seeds]
    threads = max(1, int(threads))
    if threads == 1:
        parts = [_cell(cfg, d, k, s, Pset) for d, k, s in cells]
    else:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda c: _cell(cfg, c[0], c[1], c[2], Pset), cells))
    return [r for part in parts for r in part]


def run_ratio_sweep(cfg: SweepConfig, threads: int = 1) -> List[RatioReport]:
    """``||R_P^* f||_p / ||R_P f||_p`` for every cell and exponent.

    ``P`` is the first distinct-index monomial ``x_1 ... x_k`` unless
    ``cfg.harmonic`` gives one. Failing cells yield rows with NaN values and
    the exception text in ``diagnostics["error"]``.
    """
    return _run(cfg, None, threads)


def run_square_sweep(cfg: SweepConfig, Pset: Optional[Sequence[SolidHarmonic]] = None,
                     threads: int = 1) -> List[RatioReport]:
    """Square-function ratio ``||(sum |R_P^* f|^2)^{1/2}||_p / ||(sum |R_P f|^2)^{1/2}||_p``.

    ``Pset`` defaults to all distinct-index monomials of each cell. A fixed
    list applies to the cells of matching dimension; others record an error.
    """
    if Pset is None:
        Pset = lambda d, k: composite_terms(DimOrder(d, k))
    return _run(cfg, Pset, threads)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def reports_to_csv(reports: Sequence[RatioReport]) -> str:
    """CSV text with the fixed column order :data:`REPORT_COLUMNS`."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        row = r.row()
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports: Sequence[RatioReport]) -> str:
    rows = []
    for r in reports:
        row = r.row()
        rows.append({c: (None if isinstance(row[c], float) and math.isnan(row[c]) else row[c])
                     for c in REPORT_COLUMNS})
    return json.dumps(rows, indent=1, default=float)


def fit_slopes(reports: Sequence[RatioReport]) -> List[dict]:
    """Least-squares slope of ``log ratio`` against ``log p*`` per (d, k, family, seed).

    Exploratory only; groups with fewer than two distinct ``p*`` are skipped.
    """
    groups: Dict[tuple, list] = {}
    for r in reports:
        if math.isfinite(r.ratio) and r.ratio > 0:
            groups.setdefault((r.d, r.k, r.family, r.seed), []).append((p_star(r.p), r.ratio))
    out = []
    for key, pts in groups.items():
        xs = np.log([p for p, _ in pts])
        if np.ptp(xs) == 0:
            continue
        ys = np.log([v for _, v in pts])
        slope = float(np.polyfit(xs, ys, 1)[0])
        out.append({"d": key[0], "k": key[1], "family": key[2], "seed": key[3],
                    "points": len(pts), "slope": slope})
    return out


def d_profile(reports: Sequence[RatioReport]) -> List[dict]:
    """One row per (k, p, family, seed) with the ratio at every ``d``."""
    dims = sorted({r.d for r in reports})
    rows: Dict[tuple, dict] = {}
    for r in reports:
        key = (r.k, r.p, r.family, r.seed)
        row = rows.setdefault(key, {"k": r.k, "p": r.p, "family": r.family, "seed": r.seed,
                                    **{f"ratio_d{d}": "" for d in dims}})
        row[f"ratio_d{r.d}"] = r.ratio
    return list(rows.values())


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0].keys())
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# config files

def _ints(v: str):
    return tuple(int(x) for x in v.replace(",", " ").split())


def _floats(v: str):
    return tuple(float(x) for x in v.replace(",", " ").split())


def _grids(v: str):
    out = []
    for item in v.split(","):
        item = item.strip()
        if item:
            d, N, L = item.split(":")
            out.append((int(d), int(N), float(L)))
    return tuple(out)


def _pairs(v: str):
    out = []
    for item in v.split(","):
        item = item.strip()
        if item:
            d, k = item.split(":")
            out.append((int(d), int(k)))
    return tuple(out)


_PARSERS: Dict[str, Callable[[str], object]] = {
    "dims": _ints,
    "orders": _ints,
    "exponents": _floats,
    "family": str.strip,
    "seeds": _ints,
    "out": str.strip,
    "t_min_h": float,
    "t_max": float,
    "t_ratio": float,
    "grids": _grids,
    "band": int,
    "mode": int,
    "harmonic": lambda v: v.replace("|", "\n"),
    "pairs": _pairs,
}


def parse_config(text: str, base: Optional[SweepConfig] = None) -> SweepConfig:
    """Read ``key = value`` lines into a :class:`SweepConfig`.

    Lists are comma or space separated; ``grids`` entries are ``d:N:L`` and
    ``pairs`` entries ``d:k``; ``harmonic`` uses ``|`` as line separator.
    Blank lines and ``#`` comments are ignored.

    Raises
    ------
    ValueError
        On unknown keys or malformed lines.
    """
    vals = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ValueError(f"line {n}: unknown key {key!r}")
        vals[key] = _PARSERS[key](value)
    return replace(base or SweepConfig(), **vals)


def load_config(path) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def resolve_threads(threads: Optional[int]) -> int:
    """Explicit value, else ``RLAB_THREADS``, else 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("RLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RLAB_THREADS={env!r} is not an integer") from None
    return 1
