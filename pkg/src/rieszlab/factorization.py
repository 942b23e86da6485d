"""Radial multiplier profile of the factorization ``R_P^t = M^t (R_P)``.

``M^t`` is a radial Fourier multiplier ``m^t(xi) = m^1(t |xi|)``, the same
for every harmonic ``P`` of degree ``k``. Three independent evaluations are
provided:

* ``closed_form_1d``: ``1 - (2/pi) Si(2 pi rho)`` for ``d = k = 1``;
* ``quadrature`` (odd ``d``): the Hankel-transform representation

  ``m^1(rho) = 1 - gamma_k (2 pi)^{d/2} int_0^{2 pi rho} u^{-d/2} J_{d/2+k-1}(u) du``,

  where the half-integer Bessel function is a spherical Bessel function;
* ``grid_ratio``: the frequency-wise ratio of the grid-computed truncated
  and plain Riesz transforms, binned by ``|m|^2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import sici, spherical_jn

from .constants import DimOrder, gamma_k
from .fields import GridField, GridSpec, forward, inverse
from .harmonics import SolidHarmonic, monomial
from .quadrature import integrate_panels
from .riesz import (TruncatedKernelSpec, apply_riesz, apply_truncated,
                    riesz_multiplier, truncated_multiplier)

__all__ = [
    "RadialProfile",
    "UnsupportedMethodError",
    "closed_form_1d",
    "profile_quadrature",
    "quadrature_profile",
    "profile_grid_ratio",
    "apply_radial_profile",
    "EvenFit",
    "fit_even_coefficients",
    "profile_to_csv",
]


class UnsupportedMethodError(ValueError):
    """The requested evaluation route does not cover this (d, k)."""


@dataclass
class RadialProfile:
    """Sampled profile ``rho -> m^1(rho)``.

    ``rho_values`` are the dimensionless products ``t |xi|``. For grid-ratio
    profiles ``spread`` holds the per-bin ``(max - min) / |mean|`` of the
    real parts and ``counts`` the number of modes per bin.
    """

    rho_values: np.ndarray
    m_values: np.ndarray
    dk: DimOrder
    method: str
    t: float = 1.0
    spread: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    mode_norm2: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rho_values = np.asarray(self.rho_values, dtype=float)
        self.m_values = np.asarray(self.m_values, dtype=complex)
        if self.rho_values.shape != self.m_values.shape:
            raise ValueError("rho and m arrays differ in shape")
        if self.rho_values.size and np.any(np.diff(self.rho_values) <= 0):
            raise ValueError("rho values must be strictly increasing")

    @property
    def bound(self) -> float:
        """``max |m^1|`` over the samples."""
        return float(np.max(np.abs(self.m_values))) if self.m_values.size else 0.0

    def interpolator(self):
        """Monotone-cubic interpolant in ``rho``, anchored at ``m^1(0) = 1``."""
        rho, m = self.rho_values, self.m_values
        if rho[0] > 0:
            rho = np.concatenate([[0.0], rho])
            m = np.concatenate([[1.0 + 0j], m])
        if rho.size < 3:
            re = lambda x: np.interp(x, rho, m.real)  # noqa: E731
            im = lambda x: np.interp(x, rho, m.imag)  # noqa: E731
        else:
            re = PchipInterpolator(rho, m.real, extrapolate=False)
            im = PchipInterpolator(rho, m.imag, extrapolate=False)
        hi = rho[-1]

        def value(x):
            x = np.asarray(x, dtype=float)
            if np.any(x > hi * (1 + 1e-12)) or np.any(x < 0):
                raise ValueError(f"rho outside profile range [0, {hi}]")
            x = np.minimum(x, hi)
            return re(x) + 1j * im(x)

        return value

    def __call__(self, rho):
        return self.interpolator()(rho)


def closed_form_1d(rho):
    """``1 - (2/pi) Si(2 pi rho)``, the profile for ``d = k = 1``."""
    rho = np.asarray(rho, dtype=float)
    return 1.0 - (2.0 / math.pi) * sici(2.0 * math.pi * rho)[0]


def _bessel_integrand(dk: DimOrder):
    d, k = dk.d, dk.k
    n = (d - 1) // 2 + k - 1          # J_{n+1/2}(u) = sqrt(2u/pi) j_n(u)
    c = math.sqrt(2.0 / math.pi)
    power = 0.5 * (1 - d)

    def g(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = c * u ** power * spherical_jn(n, u)
        if d > 1:
            # u^{(1-d)/2} j_n(u) ~ u^{k-1} / (2n+1)!! as u -> 0
            small = u < 1e-8
            if np.any(small):
                dfact = math.prod(range(2 * n + 1, 0, -2))
                out = np.where(small, c * u ** (k - 1) / dfact, out)
        return out

    return g


def profile_quadrature(dk, rho: float, abs_tol: float = 1e-12) -> complex:
    """``m^1(rho)`` by adaptive quadrature of the Hankel-type integral (odd ``d``).

    The integrand oscillates with period about ``2 pi``; panels are split at
    multiples of ``pi``.

    Raises
    ------
    UnsupportedMethodError
        For even ``d``, where the Bessel order is an integer; use
        :func:`profile_grid_ratio` instead.
    """
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    if dk.d % 2 == 0:
        raise UnsupportedMethodError("quadrature profile needs odd d; use profile_grid_ratio")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return 1.0 + 0j
    upper = 2.0 * math.pi * rho
    pts = np.arange(0.0, upper, math.pi)
    pts = np.append(pts, upper) if pts[-1] < upper else pts
    val, _ = integrate_panels(_bessel_integrand(dk), pts, abs_tol=abs_tol, rel_tol=1e-14)
    g = gamma_k(dk).value
    return complex(1.0 - g * (2.0 * math.pi) ** (0.5 * dk.d) * val)


def quadrature_profile(dk, rhos) -> RadialProfile:
    """:func:`profile_quadrature` on an increasing array of ``rho``."""
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    rhos = np.asarray(rhos, dtype=float)
    vals = np.array([profile_quadrature(dk, r) for r in rhos])
    return RadialProfile(rhos, vals, dk, "quadrature")


def profile_grid_ratio(dk, t: float, grid: GridSpec, f: GridField, P: SolidHarmonic,
                       R_max: float | None = None, threshold: float = 0.1) -> RadialProfile:
    """Binned ratio ``forward(R_P^t f) / forward(R_P f)``.

    Modes whose denominator is below ``threshold * max`` are dropped; the
    remaining ratios are grouped by the integer ``|m|^2`` and averaged.

    Raises
    ------
    ValueError
        If no mode passes the conditioning threshold.
    """
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    if f.spec != grid or P.dimension != dk.d or P.degree != dk.k:
        raise ValueError("field, grid and harmonic disagree")
    num = forward(apply_truncated(f, TruncatedKernelSpec(P, t, R_max))).values
    den = forward(apply_riesz(f, P)).values
    mag = np.abs(den)
    keep = mag >= threshold * mag.max() if mag.max() > 0 else np.zeros_like(mag, bool)
    keep &= mag > 0
    if not np.any(keep):
        raise ValueError("no well-conditioned modes")
    ratio = num[keep] / den[keep]
    m2 = np.broadcast_to(grid.mode_norm2(), grid.shape)[keep]
    order = np.argsort(m2, kind="stable")
    m2, ratio = m2[order], ratio[order]
    uniq, start, counts = np.unique(m2, return_index=True, return_counts=True)
    means = np.add.reduceat(ratio, start) / counts
    hi = np.maximum.reduceat(ratio.real, start)
    lo = np.minimum.reduceat(ratio.real, start)
    with np.errstate(divide="ignore", invalid="ignore"):
        spread = (hi - lo) / np.abs(means)
    rho = t * np.sqrt(uniq) / grid.L
    return RadialProfile(rho, means, dk, "grid_ratio", t=float(t), spread=spread,
                         counts=counts, mode_norm2=uniq,
                         meta={"N": grid.N, "L": grid.L, "threshold": threshold,
                               "R_max": R_max})


def apply_radial_profile(f: GridField, profile: RadialProfile, t: float,
                         tol: float = 1e-12) -> GridField:
    """Multiply ``forward(f)`` by ``m^1(t |xi|)`` interpolated from ``profile``.

    Modes beyond the profile range must carry no energy (``|f^| <= tol * max``);
    otherwise a ``ValueError`` is raised.
    """
    F = forward(f)
    rho = t * np.sqrt(f.spec.mode_norm2()) / f.spec.L
    rho = np.broadcast_to(rho, f.spec.shape)
    hi = profile.rho_values[-1]
    inside = rho <= hi * (1 + 1e-12)
    mag = np.abs(F.values)
    if np.any(mag[~inside] > tol * mag.max()):
        raise ValueError("field has energy beyond the profile range")
    M = np.zeros(f.spec.shape, dtype=complex)
    M[inside] = profile.interpolator()(rho[inside])
    return inverse(F.with_values(F.values * M))


@dataclass
class EvenFit:
    coefficients: np.ndarray
    residual: float
    zero_residual: float
    holdout_residual: float
    condition: float


def _ball_powers(spec: GridSpec, radius: float, count: int, sub: int = 8) -> list:
    """Partial-volume samples of ``|x|^{2i} 1{|x| < radius}``, ``i < count``."""
    axes = spec.open_axes(spec.centered_axis())
    r2 = np.broadcast_to(sum(a * a for a in axes), spec.shape)
    out = [np.where(r2 < radius ** 2, r2 ** i, 0.0) for i in range(count)]
    half = 0.5 * math.sqrt(spec.n) * spec.h
    edge = np.abs(np.sqrt(r2) - radius) <= half
    idx = np.nonzero(edge)
    if idx[0].size:
        centers = np.stack([np.broadcast_to(a, spec.shape)[idx] for a in axes], axis=-1)
        off1 = ((np.arange(sub) + 0.5) / sub - 0.5) * spec.h
        offs = np.stack(np.meshgrid(*([off1] * spec.n), indexing="ij"), -1).reshape(-1, spec.n)
        pts = centers[:, None, :] + offs[None, :, :]
        pr2 = np.sum(pts ** 2, axis=-1)
        inside = pr2 < radius ** 2
        for i in range(count):
            out[i][idx] = np.mean(np.where(inside, pr2 ** i, 0.0), axis=1)
    return out


def fit_even_coefficients(dk, grid: GridSpec, P: SolidHarmonic | None = None,
                          threshold: float = 0.1, holdout_seed: int = 0,
                          max_condition: float = 1e12) -> EvenFit:
    """Least-squares ``alpha_i`` with ``b = sum alpha_i |x|^{2i} 1_B``.

    Fits ``forward(b) m_P`` to the multiplier of ``K_P 1_{B^c}`` (``t = 1``) on
    modes where ``|m_P|`` exceeds ``threshold * max`` and the frequency lies
    in the well-resolved band ``|m| <= N/4``. Every other such mode is held
    out (seeded split) to measure generalization.

    Raises
    ------
    UnsupportedMethodError
        For odd ``k``.
    numpy.linalg.LinAlgError
        If the design matrix is numerically rank-deficient.
    """
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    if dk.k % 2:
        raise UnsupportedMethodError("even-coefficient fit needs even k")
    if P is None:
        P = monomial(tuple(range(1, dk.k + 1)), dk.d)
    count = dk.k // 2
    target = truncated_multiplier(TruncatedKernelSpec(P, 1.0), grid)
    mP = riesz_multiplier(grid, P)
    band = np.broadcast_to(grid.mode_norm2() <= (grid.N // 4) ** 2, grid.shape)
    keep = (np.abs(mP) >= threshold * np.abs(mP).max()) & band
    cols = []
    for b in _ball_powers(grid, 1.0, count):
        cols.append((np.fft.fftn(b) * grid.h ** grid.n * mP)[keep])
    A = np.stack(cols, axis=1)
    y = target[keep]
    rng = np.random.default_rng(holdout_seed)
    train = rng.random(len(y)) < 0.5
    At = np.concatenate([A[train].real, A[train].imag])
    yt = np.concatenate([y[train].real, y[train].imag])
    sv = np.linalg.svd(At, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if cond > max_condition:
        raise np.linalg.LinAlgError(f"rank-deficient fit, condition number {cond:.3e}")
    coef, *_ = np.linalg.lstsq(At, yt, rcond=None)
    norm_y = np.linalg.norm(y[train])
    resid = np.linalg.norm(A[train] @ coef - y[train]) / norm_y
    hold = np.linalg.norm(A[~train] @ coef - y[~train]) / np.linalg.norm(y[~train])
    return EvenFit(coef, float(resid), 1.0, float(hold), cond)


def profile_to_csv(profile: RadialProfile) -> str:
    """CSV text with columns ``rho, re_m, im_m, method, d, k, t``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "re_m", "im_m", "method", "d", "k", "t"])
    for r, m in zip(profile.rho_values, profile.m_values):
        w.writerow([f"{r:.17g}", f"{m.real:.17g}", f"{m.imag:.17g}", profile.method,
                    profile.dk.d, profile.dk.k, f"{profile.t:.17g}"])
    return buf.getvalue()
