"""Sampled complex fields on uniform periodic grids over ``[0, L)^n``.

Lattice index ``(i_1, ..., i_n)`` sits at ``x = i * h`` with ``h = L / N``.
Frequency index ``m`` (signed, FFT order) corresponds to the continuum
frequency ``xi = m / L``. Forward and inverse transforms are unitary.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "GridField",
    "DEFAULT_N",
    "DEFAULT_L",
    "default_grid",
    "from_function",
    "forward",
    "inverse",
    "lp_norm",
    "periodized_gaussian",
    "single_mode",
    "random_bandlimited",
    "band_mask",
    "dump_field",
    "load_field",
]

DEFAULT_N = {1: 256, 2: 128, 3: 64, 4: 32, 6: 16}
DEFAULT_L = 16.0
_MAGIC = b"RLAB"
_HEADER = struct.Struct("<4sIId")
_HEADER_SIZE = 32


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: ``n`` axes of ``N`` points on ``[0, L)``."""

    n: int
    N: int
    L: float = DEFAULT_L

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid dimension must be positive")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.N ** self.n > 2**31:
            raise ValueError("grid too large")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    def axis(self) -> np.ndarray:
        """Physical coordinates ``i * h`` along one axis."""
        return np.arange(self.N) * self.h

    def centered_axis(self) -> np.ndarray:
        """Minimum-image coordinates in ``[-L/2, L/2)`` in FFT index order."""
        return np.fft.fftfreq(self.N) * self.L

    def mode_axis(self) -> np.ndarray:
        """Signed integer frequency indices in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    def freq_axis(self) -> np.ndarray:
        """Continuum frequencies ``m / L`` in FFT order."""
        return self.mode_axis() / self.L

    def open_axes(self, axis_values: np.ndarray):
        """Broadcastable copies of a 1-D axis, one per grid dimension."""
        return [axis_values.reshape([-1 if a == i else 1 for a in range(self.n)])
                for i in range(self.n)]

    def mode_norm2(self) -> np.ndarray:
        """Integer ``|m|^2`` on the full frequency grid."""
        m = self.mode_axis().astype(np.int64)
        return sum(a * a for a in self.open_axes(m))


def default_grid(n: int, L: float = DEFAULT_L) -> GridSpec:
    """Desk-scale default resolution for an ``n``-dimensional grid."""
    if n in DEFAULT_N:
        return GridSpec(n, DEFAULT_N[n], L)
    if n == 5:
        return GridSpec(5, 16, L)
    raise ValueError(f"no default grid for n={n}")


class GridField:
    """Complex samples on a :class:`GridSpec`, tagged physical or frequency.

    ``values`` has shape ``spec.shape``. Fields are treated as immutable; the
    array is flagged read-only.
    """

    __slots__ = ("spec", "values", "space")

    def __init__(self, spec: GridSpec, values, space: str = "physical"):
        if space not in ("physical", "frequency"):
            raise ValueError(f"unknown space tag {space!r}")
        arr = np.asarray(values)
        if arr.shape != spec.shape:
            if arr.size == spec.size:
                arr = arr.reshape(spec.shape)
            else:
                raise ValueError(f"values of shape {arr.shape} do not match grid {spec.shape}")
        if not np.iscomplexobj(arr):
            arr = arr.astype(complex)
        arr = np.array(arr, copy=True)
        arr.flags.writeable = False
        self.spec = spec
        self.values = arr
        self.space = space

    def with_values(self, values, space: str | None = None) -> "GridField":
        return GridField(self.spec, values, self.space if space is None else space)

    def real(self) -> np.ndarray:
        return self.values.real

    def __add__(self, other: "GridField") -> "GridField":
        _check_same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridField") -> "GridField":
        _check_same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c) -> "GridField":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"GridField(n={self.spec.n}, N={self.spec.N}, L={self.spec.L}, space={self.space})"


def _check_same(a: GridField, b: GridField):
    if a.spec != b.spec or a.space != b.space:
        raise ValueError("fields live on different grids or spaces")


def from_function(spec: GridSpec, f: Callable, centered: bool = False) -> GridField:
    """Sample ``f`` at the lattice points.

    ``f`` is called once with ``n`` broadcastable coordinate arrays
    ``f(x1, ..., xn)`` and must return an array broadcastable to the grid.
    With ``centered=True`` the coordinates are minimum-image values in
    ``[-L/2, L/2)`` instead of ``[0, L)``.
    """
    ax = spec.centered_axis() if centered else spec.axis()
    vals = f(*spec.open_axes(ax))
    vals = np.broadcast_to(np.asarray(vals), spec.shape)
    return GridField(spec, vals)


def forward(f: GridField) -> GridField:
    """Unitary DFT, physical to frequency."""
    if f.space != "physical":
        raise ValueError("forward expects a physical-space field")
    return GridField(f.spec, np.fft.fftn(f.values, norm="ortho"), "frequency")


def inverse(F: GridField) -> GridField:
    """Unitary inverse DFT, frequency to physical."""
    if F.space != "frequency":
        raise ValueError("inverse expects a frequency-space field")
    return GridField(F.spec, np.fft.ifftn(F.values, norm="ortho"), "physical")


def lp_norm(f: GridField, p: float) -> float:
    """Riemann-sum ``L^p`` norm ``(sum |f|^p h^n)^{1/p}`` for ``1 < p < inf``."""
    if f.space != "physical":
        raise ValueError("lp_norm expects a physical-space field")
    p = float(p)
    if not (math.isfinite(p) and p > 1):
        raise ValueError(f"p must be finite and > 1, got {p}")
    a = np.abs(f.values)
    scale = a.max()
    if scale == 0:
        return 0.0
    s = np.sum((a / scale) ** p) * f.spec.h ** f.spec.n
    return float(scale * s ** (1.0 / p))


def periodized_gaussian(spec: GridSpec, a: float = 1.0, center=None, images: int = 2) -> GridField:
    """``sum_m exp(-a |x - x0 + L m|^2)`` over image offsets ``|m_i| <= images``.

    The Gaussian factorizes over axes, so the image sum is done per axis.
    ``center`` defaults to the box center ``(L/2, ..., L/2)``.
    """
    if center is None:
        center = np.full(spec.n, spec.L / 2)
    center = np.broadcast_to(np.asarray(center, dtype=float), (spec.n,))
    x = spec.axis()
    out = None
    for i in range(spec.n):
        shifts = np.arange(-images, images + 1) * spec.L
        g = np.exp(-a * (x[:, None] - center[i] + shifts[None, :]) ** 2).sum(axis=1)
        g = g.reshape([-1 if b == i else 1 for b in range(spec.n)])
        out = g if out is None else out * g
    return GridField(spec, np.broadcast_to(out, spec.shape))


def single_mode(spec: GridSpec, m: Sequence[int]) -> GridField:
    """Plane wave ``exp(2 pi i m.x / L)``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (spec.n,):
        raise ValueError("mode must have one entry per axis")
    phase = 0.0
    for i, ax in enumerate(spec.open_axes(spec.axis())):
        phase = phase + m[i] * ax
    return GridField(spec, np.broadcast_to(np.exp(2j * np.pi * phase / spec.L), spec.shape))


def band_mask(spec: GridSpec, band: float) -> np.ndarray:
    """Boolean mask of frequency indices with Euclidean ``|m| <= band``.

    A ball of modes is invariant under rotations, which keeps rotated
    band-limited fields inside the same band.
    """
    return np.broadcast_to(spec.mode_norm2() <= band * band, spec.shape)


def random_bandlimited(spec: GridSpec, seed: int, band: int | None = None,
                       real: bool = True) -> GridField:
    """Gaussian random coefficients on modes ``|m| <= band`` (default ``N/8``).

    The zero mode is removed. With ``real=True`` the coefficients are
    Hermitian-symmetrized so the field is real.
    """
    if band is None:
        band = spec.N // 8
    rng = np.random.default_rng(np.random.SeedSequence([seed, spec.n, spec.N]))
    coef = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    coef = coef * band_mask(spec, band)
    coef[(0,) * spec.n] = 0.0
    vals = np.fft.ifftn(coef, norm="ortho")
    if real:
        vals = vals.real
    vals = vals / np.sqrt(np.mean(np.abs(vals) ** 2))
    return GridField(spec, vals)


def dump_field(f: GridField, path) -> None:
    """Write the 32-byte header (magic, n, N, L) and little-endian (re, im) pairs."""
    head = _HEADER.pack(_MAGIC, f.spec.n, f.spec.N, float(f.spec.L))
    head = head.ljust(_HEADER_SIZE, b"\0")
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(body)


def load_field(path, space: str = "physical") -> GridField:
    """Read a field written by :func:`dump_field`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_SIZE)
        magic, n, N, L = _HEADER.unpack(head[:_HEADER.size])
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field dump")
        spec = GridSpec(n, N, L)
        vals = np.frombuffer(fh.read(), dtype="<c16")
    if vals.size != spec.size:
        raise ValueError(f"{path}: truncated payload")
    return GridField(spec, vals.reshape(spec.shape), space)
