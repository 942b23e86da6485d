"""Complex-space operators on ``C^d = R^{2d}`` and the method of rotations.

Grid layout: a field on ``C^d`` is a :class:`GridField` with ``n = 2d`` axes
ordered ``(x_1, ..., x_d, y_1, ..., y_d)`` where ``z_j = x_j + i y_j``. The
frequency dual to ``z`` is written ``eta_j = xi_{x,j} + i xi_{y,j}`` so that
``x.xi_x + y.xi_y = Re(z . conj(eta))``.

The directional transform

    H_zeta^t f(z) = int_{t <= |lam| <= Lam} (lam/|lam|)^k f(z - lam zeta) / |lam|^2 dlam

acts on a plane wave with frequency ``eta`` as multiplication by
``exp(-i k arg c) G(|c|)`` with ``c = sum_j zeta_j conj(eta_j)`` and

    G(s) = int_t^Lam int_0^{2pi} e^{i k th} e^{-2 pi i r s cos th} dth dr / r.

``G`` is tabulated once per ``(k, t, Lam)`` by the lambda-plane quadrature
(geometric in ``r``, uniform in angle) and interpolated in ``s``. Applying
the multiplier to a band-limited field is the same as summing the quadrature
over exact trigonometric-interpolant translates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import jv

from .averaging import tree_sum
from .constants import DimOrder, complex_sphere_moment_mc, gamma_k, rotation_prefactor
from .fields import GridField, GridSpec, forward, inverse
from .harmonics import SolidHarmonic, evaluate
from .quadrature import gauss_legendre_panels, integrate_panels
from .riesz import TruncationGrid

__all__ = [
    "ComplexDirection",
    "LambdaQuadrature",
    "RotationReport",
    "complex_kernel",
    "sample_complex_kernel",
    "direct_complex_truncated",
    "hilbert_profile",
    "hilbert_profile_bessel",
    "directional_multiplier",
    "directional_hilbert",
    "maximal_directional_hilbert",
    "reconstruct_truncated",
    "zeta_moment_mc",
    "zeta_cross_moment_mc",
]

_SUBSAMPLE = {2: 8, 4: 3}


@dataclass(frozen=True)
class ComplexDirection:
    """Unit vector of ``C^d`` (a point of ``S^{2d-1}``)."""

    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=complex).reshape(-1)
        if z.size < 1:
            raise ValueError("empty direction")
        if abs(np.sum(np.abs(z) ** 2) - 1.0) > 1e-12:
            raise ValueError("direction is not a unit vector")
        object.__setattr__(self, "zeta", z)

    @property
    def d(self) -> int:
        return self.zeta.size

    @classmethod
    def from_real(cls, w) -> "ComplexDirection":
        """Normalize a real ``2d``-vector read as ``(Re z, Im z)``."""
        w = np.asarray(w, dtype=float)
        d = w.size // 2
        w = w / np.linalg.norm(w)
        return cls(w[:d] + 1j * w[d:])

    @classmethod
    def sample(cls, d: int, seed: int, index: int = 0) -> "ComplexDirection":
        """Uniform point of ``S^{2d-1}`` from normalized Gaussians."""
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        return cls.from_real(rng.standard_normal(2 * d))


@dataclass(frozen=True)
class LambdaQuadrature:
    """Quadrature of ``dlam / |lam|^2`` over the annulus ``t <= |lam| <= lam_max``.

    Radial nodes are Gauss-Legendre on geometric panels (``panels_per_decade``)
    and carry the weight of ``dr / r``. Angles are ``n_a`` uniform points.
    """

    t: float
    lam_max: float
    k: int = 1
    n_a: int = 16
    panels_per_decade: int = 64
    order: int = 4

    def __post_init__(self):
        if not 0 < self.t < self.lam_max:
            raise ValueError("need 0 < t < lam_max")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_a < 8 * self.k:
            raise ValueError(f"n_a={self.n_a} must be >= 8k={8 * self.k}")

    @classmethod
    def default(cls, t: float, lam_max: float, k: int, s_max: float = 0.0) -> "LambdaQuadrature":
        """``n_a = max(16, 8k)``, raised to resolve the phase ``2 pi r s cos th``."""
        n_a = max(16, 8 * k, int(math.ceil(2 * math.pi * lam_max * s_max)) + 32)
        return cls(t, lam_max, k, n_a)

    def radial(self):
        decades = math.log10(self.lam_max / self.t)
        panels = max(1, int(math.ceil(self.panels_per_decade * decades)))
        edges = self.t * (self.lam_max / self.t) ** (np.arange(panels + 1) / panels)
        r, w = gauss_legendre_panels(edges, self.order)
        return r, w / r

    def angular(self):
        th = 2 * math.pi * np.arange(self.n_a) / self.n_a
        return th, np.full(self.n_a, 2 * math.pi / self.n_a)


@dataclass
class RotationReport:
    d: int
    k: int
    t: float
    samples: int
    seed: int
    rel_err: float
    std_err: float
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"d": self.d, "k": self.k, "t": self.t, "samples": self.samples,
                "seed": self.seed, "rel_err": self.rel_err, "std_err": self.std_err}


def _check_complex_grid(spec: GridSpec) -> int:
    if spec.n % 2:
        raise ValueError("complex-space fields need an even number of axes")
    return spec.n // 2


# ----------------------------------------------------------------------------
# kernel side

def complex_kernel(P: SolidHarmonic, z, t: float):
    """``gamma~_k P(z) / |z|^{2d+k}`` for ``|z| >= t`` and 0 inside.

    ``z`` has shape ``(d,)`` or ``(..., d)`` and is complex.

    Raises
    ------
    ValueError
        At ``z = 0``.
    """
    z = np.asarray(z, dtype=complex)
    d, k = P.dimension, P.degree
    r2 = np.sum(np.abs(z) ** 2, axis=-1)
    if np.any(r2 == 0):
        raise ValueError("complex kernel is singular at z = 0")
    g = gamma_k(DimOrder(d, k), ambient="complex_2d").value
    val = g * np.asarray(evaluate(P, z)) / r2 ** (0.5 * (2 * d + k))
    val = np.where(r2 >= t * t, val, 0.0)
    return complex(val) if np.ndim(val) == 0 else val


def _kernel_axes(P, g, coords, t, lam):
    d, k = P.dimension, P.degree
    z = [coords[j] + 1j * coords[d + j] for j in range(d)]
    r2 = sum(c * c for c in coords)
    poly = 0.0
    for exp, c in P.terms.items():
        term = float(c)
        for j, e in enumerate(exp):
            if e:
                term = term * z[j] ** e
        poly = poly + term
    with np.errstate(divide="ignore", invalid="ignore"):
        K = g * poly / r2 ** (0.5 * (2 * d + k))
    keep = (r2 >= t * t) & (r2 <= lam * lam)
    return np.where(keep, K, 0.0), r2


def sample_complex_kernel(P: SolidHarmonic, t: float, spec: GridSpec,
                          lam_max: Optional[float] = None) -> np.ndarray:
    """Complex kernel on ``t <= |z| <= lam_max`` sampled in FFT layout.

    Cells crossed by either cutoff sphere hold the mean over a sub-lattice.
    """
    d = _check_complex_grid(spec)
    if P.dimension != d:
        raise ValueError("polynomial dimension does not match the grid")
    lam = spec.L / 2 if lam_max is None else float(lam_max)
    if lam > spec.L / 2 + 1e-12:
        raise ValueError("lam_max exceeds L/2")
    g = gamma_k(DimOrder(d, P.degree), ambient="complex_2d").value
    h, n = spec.h, spec.n
    axes = spec.open_axes(spec.centered_axis())
    vals, r2 = _kernel_axes(P, g, axes, t, lam)
    vals = np.array(np.broadcast_to(vals, spec.shape), dtype=complex)
    r = np.sqrt(np.broadcast_to(r2, spec.shape))
    half = 0.5 * math.sqrt(n) * h
    idx = np.nonzero((np.abs(r - t) <= half) | (np.abs(r - lam) <= half))
    if idx[0].size:
        s = _SUBSAMPLE.get(n, 2)
        off = ((np.arange(s) + 0.5) / s - 0.5) * h
        offs = np.stack(np.meshgrid(*([off] * n), indexing="ij"), -1).reshape(-1, n)
        centers = np.stack([np.broadcast_to(a, spec.shape)[idx] for a in axes], -1)
        out = np.empty(len(centers), dtype=complex)
        step = max(1, 65536 // len(offs))
        for a in range(0, len(centers), step):
            pts = centers[a:a + step, None, :] + offs[None]
            K, _ = _kernel_axes(P, g, [pts[..., i] for i in range(n)], t, lam)
            out[a:a + step] = K.mean(axis=1)
        vals[idx] = out
    return vals


def direct_complex_truncated(f: GridField, P: SolidHarmonic, t: float,
                             lam_max: Optional[float] = None) -> GridField:
    """Periodic convolution of ``f`` with the sampled complex kernel."""
    K = sample_complex_kernel(P, t, f.spec, lam_max)
    h = f.spec.h ** f.spec.n
    out = np.fft.ifftn(np.fft.fftn(f.values) * np.fft.fftn(K)) * h
    return f.with_values(out)


# ----------------------------------------------------------------------------
# directional transform

def _eta_axes(spec: GridSpec):
    d = spec.n // 2
    ax = spec.open_axes(spec.freq_axis())
    return [ax[j] + 1j * ax[d + j] for j in range(d)]


def _max_eta(F: np.ndarray, spec: GridSpec) -> float:
    mag = np.abs(F)
    active = mag > 1e-12 * mag.max() if mag.max() > 0 else mag > 0
    if not active.any():
        return 0.0
    return float(np.sqrt(spec.mode_norm2()[np.broadcast_to(active, spec.shape)].max())) / spec.L


def hilbert_profile(quad: LambdaQuadrature, s) -> np.ndarray:
    """``G(s)`` summed directly on the lambda-quadrature nodes."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r, wr = quad.radial()
    th, wa = quad.angular()
    ang = wa * np.exp(1j * quad.k * th)
    cos = np.cos(th)
    out = np.empty(s.shape, dtype=complex)
    for i in range(0, s.size, 64):
        ss = s[i:i + 64]
        phase = np.exp(-2j * np.pi * ss[:, None, None] * r[None, :, None] * cos[None, None, :])
        out[i:i + 64] = np.einsum("sra,a,r->s", phase, ang, wr)
    return out


def hilbert_profile_bessel(k: int, t: float, lam_max: float, s: float) -> complex:
    """Oracle ``G(s) = 2 pi (-i)^k int_t^Lam J_k(2 pi r s) dr / r``."""
    if s == 0:
        return 0j
    period = 1.0 / (2 * s)
    nb = int(min(4000, max(8, (lam_max - t) / period)))
    edges = np.linspace(t, lam_max, nb + 1)
    val, _ = integrate_panels(lambda r: jv(k, 2 * np.pi * r * s) / r, edges,
                              abs_tol=1e-13, rel_tol=1e-12)
    return 2 * np.pi * (1, -1j, -1, 1j)[k % 4] * val


_tables: dict = {}


def _profile_table(k: int, t: float, lam: float, s_max: float):
    key = (k, float(t), float(lam), float(s_max))
    if key not in _tables:
        quad = LambdaQuadrature.default(t, lam, k, s_max)
        ns = max(64, int(math.ceil(s_max * lam * 20)) + 1)
        s = np.linspace(0.0, s_max, ns)
        G = hilbert_profile(quad, s)
        G[0] = 0.0
        if len(_tables) > 32:
            _tables.clear()
        _tables[key] = (CubicSpline(s, G.real), CubicSpline(s, G.imag), quad)
    return _tables[key]


def _multiplier_from_c(c: np.ndarray, k: int, t: float, lam: float, s_max: float) -> np.ndarray:
    a = np.abs(c)
    if a.size and a.max() > s_max * (1 + 1e-12):
        raise ValueError("active modes exceed the tabulated range")
    gre, gim, _ = _profile_table(k, t, lam, s_max)
    G = gre(a) + 1j * gim(a)
    safe = np.where(a > 0, a, 1.0)
    return np.where(a > 0, (np.conj(c) / safe) ** k * G, 0.0)


def directional_multiplier(zeta: ComplexDirection, k: int, t: float, spec: GridSpec,
                           lam_max: Optional[float] = None, s_max: Optional[float] = None,
                           mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Fourier multiplier of ``H_zeta^t`` on the grid (zero where ``c = 0``).

    With ``mask`` only the selected modes are evaluated and a 1-D array in
    ``F[mask]`` order is returned.
    """
    d = _check_complex_grid(spec)
    if zeta.d != d:
        raise ValueError("direction dimension does not match the grid")
    lam = spec.L / 2 if lam_max is None else float(lam_max)
    if lam > spec.L / 2 + 1e-12:
        raise ValueError("lam_max exceeds L/2")
    if s_max is None:
        s_max = math.sqrt(spec.n) * (spec.N / 2) / spec.L
    eta = [np.broadcast_to(e, spec.shape) for e in _eta_axes(spec)]
    if mask is not None:
        eta = [e[mask] for e in eta]
    c = sum(zeta.zeta[j] * np.conj(eta[j]) for j in range(d))
    return _multiplier_from_c(c, k, t, lam, s_max)


def directional_hilbert(f: GridField, zeta: ComplexDirection, t: float, k: int,
                        quad: Optional[LambdaQuadrature] = None,
                        lam_max: Optional[float] = None) -> GridField:
    """Truncated directional ``k``-th power of the complex Hilbert transform.

    Raises
    ------
    ValueError
        If ``lam_max`` exceeds ``L/2`` or the grid does not resolve ``t``.
    """
    spec = f.spec
    if quad is not None:
        t, k, lam_max = quad.t, quad.k, quad.lam_max
    if t < 2 * spec.h:
        raise ValueError(f"t={t} below 2h={2 * spec.h}")
    F = forward(f).values
    s_max = max(_max_eta(F, spec), 1.0 / spec.L)
    mask = np.abs(F) > 1e-12 * max(np.abs(F).max(), 1e-300)
    out = np.zeros_like(F)
    out[mask] = F[mask] * directional_multiplier(zeta, k, t, spec, lam_max, s_max, mask)
    return inverse(GridField(spec, out, "frequency"))


def maximal_directional_hilbert(f: GridField, zeta: ComplexDirection,
                                tg: TruncationGrid | Sequence[float], k: int,
                                lam_max: Optional[float] = None) -> GridField:
    """Pointwise ``sup_t |H_zeta^t f|`` over a truncation grid."""
    ts = tg.values if isinstance(tg, TruncationGrid) else [float(x) for x in tg]
    if len(ts) == 0:
        raise ValueError("empty truncation grid")
    out = None
    for t in ts:
        a = np.abs(directional_hilbert(f, zeta, t, k, lam_max=lam_max).values)
        out = a if out is None else np.maximum(out, a)
    return f.with_values(out)


# ----------------------------------------------------------------------------
# rotation identity

def _directions(d: int, k: int, samples: int, seed: int):
    if d == 1:
        n = max(16, 8 * k, samples)
        return [ComplexDirection(np.array([np.exp(2j * np.pi * i / n)])) for i in range(n)]
    return [ComplexDirection.sample(d, seed, i) for i in range(samples)]


def reconstruct_truncated(f: GridField, P: SolidHarmonic, t: float, samples: int,
                          seed: int, lam_max: Optional[float] = None,
                          counts: Optional[Sequence[int]] = None,
                          threads: int = 1) -> RotationReport:
    """Average ``prefactor * P(zeta) H_zeta^t f`` over ``zeta`` and compare.

    For ``d = 1`` the average is an exact uniform angular rule; for ``d = 2``
    it is Monte Carlo over ``zeta`` with per-sample seeds ``(seed, i)``. The
    reference is :func:`direct_complex_truncated`. Errors are relative
    ``L^2`` norms computed by Parseval. ``counts`` adds errors on prefixes of
    the same sample stream to ``meta["curve"]``.
    """
    spec = f.spec
    d = _check_complex_grid(spec)
    if d not in (1, 2):
        raise ValueError("complex-space grids are limited to d in {1, 2}")
    if P.dimension != d:
        raise ValueError("polynomial dimension does not match the grid")
    k = P.degree
    lam = spec.L / 2 if lam_max is None else float(lam_max)
    ref = forward(direct_complex_truncated(f, P, t, lam)).values
    F = forward(f).values
    mask = np.abs(F) > 1e-12 * max(np.abs(F).max(), 1e-300)
    Fa, Ra = F[mask], ref[mask]
    ref_norm = float(np.sqrt(np.sum(np.abs(Ra) ** 2)))
    if ref_norm == 0:
        return RotationReport(d, k, t, samples, seed, 0.0, 0.0)
    s_max = max(_max_eta(F, spec), 1.0 / spec.L)
    pref = rotation_prefactor(DimOrder(d, k)).value
    dirs = _directions(d, k, samples, seed)

    eta = [np.broadcast_to(e, spec.shape)[mask] for e in _eta_axes(spec)]
    ceta = np.conj(np.stack(eta))

    def one(z: ComplexDirection):
        M = _multiplier_from_c(z.zeta @ ceta, k, t, lam, s_max)
        return pref * complex(evaluate(P, z.zeta)) * M * Fa

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            terms = list(ex.map(one, dirs))
    else:
        terms = [one(z) for z in dirs]

    def stats(n):
        mean = tree_sum(terms[:n]) / n
        err = float(np.sqrt(np.sum(np.abs(mean - Ra) ** 2))) / ref_norm
        if d == 1 or n < 2:
            return err, 0.0
        sq = sum(float(np.sum(np.abs(x) ** 2)) for x in terms[:n]) / n
        var = max(sq - float(np.sum(np.abs(mean) ** 2)), 0.0) * n / (n - 1)
        return err, math.sqrt(var / n) / ref_norm

    err, se = stats(len(dirs))
    meta = {"N": spec.N, "L": spec.L, "lam_max": lam, "directions": len(dirs)}
    if counts:
        meta["curve"] = [(int(n),) + stats(int(n)) for n in counts if int(n) <= len(dirs)]
    return RotationReport(d, k, t, len(dirs), seed, err, se, meta)


def zeta_moment_mc(dk, j: Sequence[int], samples: int = 100_000, seed: int = 0):
    """Monte Carlo ``int |zeta_j|^2 dzeta`` over ``S^{2d-1}``; returns (mean, stderr)."""
    dk = dk if isinstance(dk, DimOrder) else DimOrder(*dk)
    j = tuple(int(i) for i in j)
    if len(j) != dk.k or len(set(j)) != len(j) or min(j) < 1 or max(j) > dk.d:
        raise ValueError(f"index {j} is not a distinct-index tuple for {dk}")
    return complex_sphere_moment_mc(dk, samples, seed, index=j)


def zeta_cross_moment_mc(d: int, j: Sequence[int], j2: Sequence[int],
                         samples: int = 100_000, seed: int = 0):
    """Monte Carlo ``int zeta_j conj(zeta_j') dzeta``; returns (complex mean, stderr)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, d, len(j)]))
    w = rng.standard_normal((samples, 2 * d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    z = w[:, :d] + 1j * w[:, d:]
    a = np.prod(z[:, np.asarray(j) - 1], axis=1)
    b = np.prod(z[:, np.asarray(j2) - 1], axis=1)
    x = a * np.conj(b)
    se = math.sqrt((np.var(x.real, ddof=1) + np.var(x.imag, ddof=1)) / samples)
    return complex(np.mean(x)), se
