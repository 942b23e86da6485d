"""Haar rotations, conjugated operators, and the averaging identity.

For a Fourier multiplier ``T`` with symbol ``a``, the conjugate
``T_U f(x) = T(f(U^{-1} .))(U x)`` is the multiplier ``a(U xi)``. Operators
here expose their symbol at arbitrary frequencies, so conjugation is an
exact evaluation at rotated frequencies instead of a resampling of ``f``.
:func:`rotate_field` provides the physical-space rotation (trigonometric
interpolation at rotated nodes) for localized fields.

The averaging identity states

    M^t f = C(d, k) E_U[(R^t)_U f],   R^t = sum_{j in I} R_j^t R_j,

with ``U`` Haar-distributed on ``SO(d)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .constants import DimOrder, averaging_constant
from .factorization import (RadialProfile, profile_grid_ratio,
                            quadrature_profile)
from .fields import GridField, GridSpec, forward, inverse, periodized_gaussian
from .harmonics import SolidHarmonic, monomial, multiplier_value
from .riesz import (TruncatedKernelSpec, composite_terms,
                    truncated_multiplier_at)

__all__ = [
    "Rotation",
    "sample_rotation",
    "sample_rotations",
    "IdentityOp",
    "RieszOp",
    "TruncatedOp",
    "CompositeOp",
    "RadialOp",
    "conjugate_apply",
    "rotate_field",
    "tree_sum",
    "AveragingReport",
    "direct_profile",
    "verify_averaging",
    "averaging_errors",
]


@dataclass(frozen=True)
class Rotation:
    """A ``d x d`` special-orthogonal matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.matrix, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValueError("rotation must be a square matrix")
        d = U.shape[0]
        if np.max(np.abs(U.T @ U - np.eye(d))) > 1e-12:
            raise ValueError("matrix is not orthogonal")
        if abs(np.linalg.det(U) - 1.0) > 1e-12:
            raise ValueError("determinant is not +1")
        object.__setattr__(self, "matrix", U)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)


def _haar(rng: np.random.Generator, d: int) -> np.ndarray:
    A = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(A)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)[None, :]
    if np.linalg.det(Q) < 0:
        Q[:, -1] = -Q[:, -1]
    return Q


def sample_rotation(d: int, seed, index: int | None = None) -> Rotation:
    """Haar-distributed rotation in ``SO(d)``.

    QR of a standard Gaussian matrix with the sign of each column fixed by
    the diagonal of ``R``; a reflection is turned into a rotation by negating
    the last column. ``(seed, index)`` selects an independent stream, so
    sample ``i`` of a batch does not depend on how the batch is scheduled.
    """
    if d < 1:
        raise ValueError("d must be positive")
    entropy = [seed] if index is None else [seed, index]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    return Rotation(_haar(rng, d))


def sample_rotations(d: int, count: int, seed) -> np.ndarray:
    """``count`` rotations as an array ``(count, d, d)``; sample ``i`` uses ``(seed, i)``."""
    return np.stack([sample_rotation(d, seed, i).matrix for i in range(count)])


# ----------------------------------------------------------------------------
# operators with symbols at arbitrary frequencies

@dataclass(frozen=True)
class IdentityOp:
    def symbol(self, xi: np.ndarray, spec: GridSpec) -> np.ndarray:
        return np.ones(len(xi), dtype=complex)


@dataclass(frozen=True)
class RieszOp:
    P: SolidHarmonic

    def symbol(self, xi, spec):
        return np.asarray(multiplier_value(self.P, xi), dtype=complex)


@dataclass(frozen=True)
class TruncatedOp:
    kspec: TruncatedKernelSpec

    def symbol(self, xi, spec):
        return truncated_multiplier_at(self.kspec, spec, xi)


@dataclass(frozen=True)
class CompositeOp:
    """``R^t = sum_j R_j^t R_j`` over the distinct-index monomials."""

    dk: DimOrder
    t: float
    R_max: float | None = None

    def symbol(self, xi, spec):
        acc = np.zeros(len(xi), dtype=complex)
        for P in composite_terms(self.dk):
            kspec = TruncatedKernelSpec(P, self.t, self.R_max)
            acc += truncated_multiplier_at(kspec, spec, xi) * multiplier_value(P, xi)
        return acc


@dataclass(frozen=True)
class RadialOp:
    """``M^t``: multiplier ``m^1(t |xi|)`` from a radial profile."""

    profile: RadialProfile
    t: float

    def symbol(self, xi, spec):
        rho = self.t * np.linalg.norm(xi, axis=-1)
        return np.asarray(self.profile(rho), dtype=complex)


_OPS = (IdentityOp, RieszOp, TruncatedOp, CompositeOp, RadialOp)


def _active_modes(F: np.ndarray, spec: GridSpec, rel_tol: float = 1e-12):
    # modes carrying energy; roundoff-level coefficients are ignored
    mag = np.abs(F)
    idx = np.nonzero(mag > rel_tol * mag.max())
    m = np.stack([spec.mode_axis()[i] for i in idx], axis=-1)
    return idx, m / spec.L


def conjugate_apply(op, U: Rotation | np.ndarray | None, f: GridField) -> GridField:
    """``T_U f`` for a multiplier operator ``T``: symbol evaluated at ``U xi``.

    ``U=None`` applies ``T`` itself (through the same symbol evaluation).
    """
    if not isinstance(op, _OPS):
        raise TypeError(f"unsupported operator {op!r}")
    F = forward(f)
    idx, xi = _active_modes(F.values, f.spec)
    if U is not None:
        Um = U.matrix if isinstance(U, Rotation) else np.asarray(U)
        xi = xi @ Um.T
    out = np.zeros(f.spec.shape, dtype=complex)
    out[idx] = op.symbol(xi, f.spec) * F.values[idx]
    return inverse(F.with_values(out))


def rotate_field(f: GridField, U: Rotation | np.ndarray, band: float | None = None) -> GridField:
    """``f(U^{-1}(x - c) + c)`` about the box center ``c``, by trigonometric
    interpolation of ``f`` at the rotated lattice nodes.

    Only meaningful for fields localized well inside the box (the rotated
    function is not periodic otherwise). ``band`` limits the modes used.
    """
    spec = f.spec
    Um = U.matrix if isinstance(U, Rotation) else np.asarray(U, dtype=float)
    F = forward(f).values
    mask = np.abs(F) > 1e-14 * np.abs(F).max()
    if band is not None:
        mask &= spec.mode_norm2() <= band * band
    idx = np.nonzero(mask)
    m = np.stack([spec.mode_axis()[i] for i in idx], axis=-1)      # (M, n)
    N, n = spec.N, spec.n
    c = N // 2
    # sum_m F_m e^{2 pi i m.(U^T (i-c) + c)/N} / sqrt(N^n), separable in i
    coef = F[idx] * np.exp(2j * np.pi * (m @ np.full(n, c)) / N) / math.sqrt(N ** n)
    Um_rows = m @ Um.T                                                # rows: U m
    grid_idx = np.arange(N) - c
    E = [np.exp(2j * np.pi * Um_rows[:, a, None] * grid_idx[None, :] / N) for a in range(n)]
    T = coef[:, None] * E[0]                                          # (M, N)
    for a in range(1, n - 1):
        T = T[..., None] * E[a].reshape((len(coef),) + (1,) * a + (N,))
    if n == 1:
        vals = T.sum(axis=0)
    else:
        vals = (T.reshape(len(coef), -1).T @ E[n - 1]).reshape(spec.shape)
    return f.with_values(vals)


def tree_sum(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise (tree) sum in fixed order."""
    items = list(arrays)
    if not items:
        raise ValueError("nothing to sum")
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


@dataclass
class AveragingReport:
    d: int
    k: int
    t: float
    samples: int
    seed: int
    rel_err: float
    std_err: float

    def row(self) -> dict:
        return asdict(self)


def direct_profile(dk: DimOrder, t: float, spec: GridSpec, rho_max: float) -> RadialProfile:
    """Profile used for the direct evaluation of ``M^t``.

    Odd ``d``: quadrature on a dense ``rho`` grid. Even ``d``: grid ratio
    from a centered Gaussian, whose transform is positive on every mode, with
    a low conditioning threshold so the whole band is covered.
    """
    if dk.d % 2:
        rhos = np.linspace(0.0, rho_max * 1.01, 401)[1:]
        return quadrature_profile(dk, rhos)
    g = periodized_gaussian(spec, a=1.0)
    P = monomial(tuple(range(1, dk.k + 1)), dk.d)
    prof = profile_grid_ratio(dk, t, spec, g, P, threshold=1e-9)
    if prof.rho_values[-1] < rho_max:
        raise ValueError("grid-ratio profile does not cover the field's band")
    return prof


def _sample_symbols(dk, t, spec, xi, seed, indices, R_max):
    op = CompositeOp(dk, t, R_max)
    out = []
    for i in indices:
        U = sample_rotation(dk.d, seed, i).matrix
        out.append(op.symbol(xi @ U.T, spec))
    return out


def _symbols(dk, t, spec, xi, seed, samples, R_max, threads):
    if threads > 1:
        chunks = np.array_split(np.arange(samples), threads)
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda c: _sample_symbols(dk, t, spec, xi, seed, c, R_max), chunks))
        return [a for p in parts for a in p]
    return _sample_symbols(dk, t, spec, xi, seed, range(samples), R_max)


def averaging_errors(dk, t: float, f: GridField, counts: Sequence[int], seed: int,
                     profile: RadialProfile | None = None, R_max: float | None = None,
                     threads: int = 1):
    """Relative L2 error of the Monte Carlo average for each prefix length in
    ``counts`` (one stream of ``max(counts)`` rotations).

    Returns ``(errors, std_errors)`` as arrays aligned with ``counts``.
    """
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    spec = f.spec
    if spec.n != dk.d:
        raise ValueError("grid dimension does not match d")
    F = forward(f).values
    idx, xi = _active_modes(F, spec)
    # every Riesz symbol vanishes at xi = 0, so the identity says nothing there
    nz = np.any(xi != 0, axis=1)
    idx, xi = tuple(i[nz] for i in idx), xi[nz]
    if not len(xi):
        raise ValueError("field has no nonzero active modes")
    w = F[idx]
    rho_max = t * float(np.max(np.linalg.norm(xi, axis=1)))
    if profile is None:
        profile = direct_profile(dk, t, spec, rho_max)
    lhs = RadialOp(profile, t).symbol(xi, spec)
    C = averaging_constant(dk).value
    total = int(max(counts))
    syms = _symbols(dk, t, spec, xi, seed, total, R_max, threads)
    norm = np.linalg.norm(lhs * w)
    errs, ses = [], []
    for n in counts:
        block = syms[:n]
        mean = tree_sum(block) / n
        est = C * mean
        errs.append(np.linalg.norm((est - lhs) * w) / norm)
        dev2 = tree_sum([np.abs(C * (b - mean)) ** 2 for b in block]) / max(n - 1, 1)
        ses.append(math.sqrt(float(np.sum(dev2 * np.abs(w) ** 2)) / n) / norm)
    return np.array(errs), np.array(ses)


def verify_averaging(dk, t: float, f: GridField, samples: int, seed: int,
                     profile: RadialProfile | None = None, R_max: float | None = None,
                     threads: int = 1) -> AveragingReport:
    """Monte Carlo check of ``M^t f = C(d,k) E_U[(R^t)_U f]``.

    The right side averages the conjugated composite operator over
    ``samples`` Haar rotations; the left side applies the radial profile.
    Errors are relative L2 (Parseval, over the field's nonzero active modes;
    the mean is excluded because both Riesz symbols vanish at ``xi = 0``).
    """
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    errs, ses = averaging_errors(dk, t, f, [samples], seed, profile, R_max, threads)
    return AveragingReport(dk.d, dk.k, float(t), int(samples), int(seed),
                           float(errs[0]), float(ses[0]))
