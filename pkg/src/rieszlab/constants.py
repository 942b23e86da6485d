"""Gamma-function constants of the higher-order Riesz transforms.

Every constant is evaluated in the log domain and returned as a
:class:`ConstantValue` carrying the value, the log of its magnitude, and the
sign, so dimensions well past the double-precision overflow of ``Gamma``
(around ``d = 170``) are handled. Independent quadrature and Monte Carlo
oracles live next to each closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import integrate_half_line
from .special import lgamma

__all__ = [
    "DimOrder",
    "ConstantValue",
    "surface_area",
    "gamma_k",
    "beta_radial_integral",
    "sphere_moment",
    "complex_sphere_moment",
    "index_count",
    "averaging_constant",
    "rotation_prefactor",
    "rotation_prefactor_ratio",
    "domination_constant",
    "sample_sphere",
    "sphere_moment_mc",
    "complex_sphere_moment_mc",
    "gamma_quadrature",
    "surface_area_quadrature",
    "gamma_k_quadrature",
    "beta_radial_quadrature",
    "stirling_relative_error",
]

_LOG_PI = math.log(math.pi)
_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class DimOrder:
    """Ambient dimension ``d`` and Riesz order ``k`` with ``1 <= k <= d``."""

    d: int
    k: int

    def __post_init__(self):
        for name in ("d", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise TypeError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.k < 1 or self.d < 1:
            raise ValueError(f"d and k must be positive, got d={self.d}, k={self.k}")
        if self.k > self.d:
            raise ValueError(f"order k={self.k} exceeds dimension d={self.d}")


@dataclass(frozen=True)
class ConstantValue:
    """A real constant stored as ``sign * exp(log_value)``.

    ``value`` is the double-precision number (``inf`` when it overflows,
    ``0.0`` when it underflows); ``log_value`` is always finite unless the
    constant is exactly zero.
    """

    value: float
    log_value: float
    sign: int

    @classmethod
    def from_log(cls, log_value: float, sign: int = 1) -> "ConstantValue":
        log_value = float(log_value)
        if sign == 0:
            return cls(0.0, -math.inf, 0)
        try:
            value = sign * math.exp(log_value)
        except OverflowError:
            value = sign * math.inf
        return cls(value, log_value, int(sign))

    def __float__(self) -> float:
        return self.value


def _as_dk(dk) -> DimOrder:
    if isinstance(dk, DimOrder):
        return dk
    d, k = dk
    return DimOrder(d, k)


def surface_area(d: int) -> ConstantValue:
    """Unnormalized surface area ``S_{d-1} = 2 pi^{d/2} / Gamma(d/2)``."""
    if d < 1:
        raise ValueError("surface area needs d >= 1")
    return ConstantValue.from_log(math.log(2.0) + 0.5 * d * _LOG_PI - lgamma(0.5 * d))


def gamma_k(dk, ambient: str = "real_d") -> ConstantValue:
    """Kernel normalization of the order-``k`` Riesz transform.

    Parameters
    ----------
    dk : DimOrder or (d, k)
    ambient : {"real_d", "complex_2d"}
        ``real_d`` gives ``Gamma((k+d)/2) / (pi^{d/2} Gamma(k/2))``;
        ``complex_2d`` gives the same constant in dimension ``2d``, that is
        ``Gamma(d+k/2) / (pi^d Gamma(k/2))``.
    """
    dk = _as_dk(dk)
    d, k = dk.d, dk.k
    if ambient == "real_d":
        lv = lgamma(0.5 * (k + d)) - 0.5 * d * _LOG_PI - lgamma(0.5 * k)
    elif ambient == "complex_2d":
        lv = lgamma(d + 0.5 * k) - d * _LOG_PI - lgamma(0.5 * k)
    else:
        raise ValueError(f"unknown ambient {ambient!r}")
    return ConstantValue.from_log(lv)


def beta_radial_integral(d: int, alpha: float) -> ConstantValue:
    """``B(d/2, d/2 + alpha) = 2 int_0^inf r^{d-1} (1+r^2)^{-d-alpha} dr``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not alpha >= 0:
        raise ValueError("alpha must be nonnegative")
    a, b = 0.5 * d, 0.5 * d + alpha
    return ConstantValue.from_log(lgamma(a) + lgamma(b) - lgamma(a + b))


def sphere_moment(dk) -> ConstantValue:
    """Normalized sphere average of ``w_1^2 ... w_k^2`` over ``S^{d-1}``.

    Closed form ``Gamma(d/2) / (2^k Gamma(k + d/2))`` from the Gaussian
    integral of ``x_1^2 ... x_k^2``.
    """
    dk = _as_dk(dk)
    d, k = dk.d, dk.k
    return ConstantValue.from_log(lgamma(0.5 * d) - k * math.log(2.0) - lgamma(k + 0.5 * d))


def complex_sphere_moment(dk) -> ConstantValue:
    """Normalized average of ``|z_{j1} ... z_{jk}|^2`` over ``S^{2d-1}``.

    Equals ``Gamma(d) / Gamma(d+k)`` for any index with distinct entries.
    """
    dk = _as_dk(dk)
    return ConstantValue.from_log(lgamma(float(dk.d)) - lgamma(float(dk.d + dk.k)))


def index_count(dk) -> int:
    """Number of ordered distinct-index tuples, ``d! / (d-k)!``.

    Raises
    ------
    OverflowError
        When the count does not fit in a signed 64-bit integer.
    """
    dk = _as_dk(dk)
    n = math.perm(dk.d, dk.k)
    if n > _INT64_MAX:
        raise OverflowError(f"d!/(d-k)! for d={dk.d}, k={dk.k} exceeds int64")
    return n


def _log_index_count(dk: DimOrder) -> float:
    return lgamma(dk.d + 1.0) - lgamma(dk.d - dk.k + 1.0)


def averaging_constant(dk) -> ConstantValue:
    """``C(d,k) = 1 / ((-1)^k |I| m(d,k))`` with ``m`` the sphere moment."""
    dk = _as_dk(dk)
    lv = -(_log_index_count(dk) + sphere_moment(dk).log_value)
    return ConstantValue.from_log(lv, -1 if dk.k % 2 else 1)


def rotation_prefactor(dk) -> ConstantValue:
    """``Gamma(d+k/2) / (pi Gamma(d) Gamma(k/2))``, the prefactor of the
    method-of-rotations identity in complex space."""
    dk = _as_dk(dk)
    d, k = dk.d, dk.k
    return ConstantValue.from_log(lgamma(d + 0.5 * k) - _LOG_PI - lgamma(float(d)) - lgamma(0.5 * k))


def rotation_prefactor_ratio(dk) -> float:
    """``rotation_prefactor(d, k) / d^{k/2}``; bounded in ``d`` for fixed ``k``."""
    dk = _as_dk(dk)
    return math.exp(rotation_prefactor(dk).log_value - 0.5 * dk.k * math.log(dk.d))


def domination_constant(dk) -> ConstantValue:
    """Gamma-ratio bound of the directional domination estimate.

    ``[Gamma(d+k/2) / Gamma(d+(k-1)/2)] * [Gamma((d+k-1)/2) / Gamma((d+k)/2)]``.
    Tends to ``sqrt(2)`` as ``d`` grows with ``k`` fixed.
    """
    dk = _as_dk(dk)
    d, k = float(dk.d), float(dk.k)
    lv = (lgamma(d + 0.5 * k) - lgamma(d + 0.5 * (k - 1))
          + lgamma(0.5 * (d + k - 1)) - lgamma(0.5 * (d + k)))
    return ConstantValue.from_log(lv)


# ----------------------------------------------------------------------------
# oracles

def sample_sphere(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform points on ``S^{dim-1}`` (rows), by normalizing Gaussians."""
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x


def _mc_chunks(samples: int, chunk: int):
    start = 0
    idx = 0
    while start < samples:
        size = min(chunk, samples - start)
        yield idx, size
        start += size
        idx += 1


def _mc_mean(fn, dim, samples, seed, chunk=100_000):
    """Chunked MC mean and standard error; chunk i uses seed (seed, i)."""
    if samples < 2:
        raise ValueError("need at least two samples")
    s1 = 0.0
    s2 = 0.0
    for idx, size in _mc_chunks(samples, chunk):
        rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
        vals = fn(sample_sphere(dim, size, rng))
        s1 += math.fsum(vals)
        s2 += math.fsum(vals * vals)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


def sphere_moment_mc(dk, samples: int = 1_000_000, seed: int = 0):
    """Monte Carlo estimate of :func:`sphere_moment`; returns (mean, stderr)."""
    dk = _as_dk(dk)
    return _mc_mean(lambda w: np.prod(w[:, :dk.k] ** 2, axis=1), dk.d, samples, seed)


def complex_sphere_moment_mc(dk, samples: int = 1_000_000, seed: int = 0, index=None):
    """Monte Carlo estimate of :func:`complex_sphere_moment`.

    ``index`` is a 1-based distinct-index tuple (default ``(1, ..., k)``).
    Points of ``S^{2d-1}`` are read as ``z_i = w_i + i w_{d+i}``.
    """
    dk = _as_dk(dk)
    idx = np.asarray(index if index is not None else range(1, dk.k + 1)) - 1
    d = dk.d

    def fn(w):
        mod2 = w[:, :d] ** 2 + w[:, d:] ** 2
        return np.prod(mod2[:, idx], axis=1)

    return _mc_mean(fn, 2 * d, samples, seed)


def gamma_quadrature(s: float) -> float:
    """``Gamma(s) = 2 int_0^inf u^{2s-1} e^{-u^2} du`` by adaptive quadrature."""
    if s < 0.5:
        raise ValueError("quadrature oracle needs s >= 1/2")
    val, _ = integrate_half_line(lambda u: 2.0 * u ** (2 * s - 1) * np.exp(-u * u),
                                 abs_tol=1e-14, rel_tol=1e-12)
    return val


def surface_area_quadrature(d: int) -> float:
    """``S_{d-1} = pi^{d/2} / int_0^inf r^{d-1} e^{-r^2} dr``."""
    radial, _ = integrate_half_line(lambda r: r ** (d - 1) * np.exp(-r * r),
                                    abs_tol=1e-14, rel_tol=1e-12)
    return math.pi ** (0.5 * d) / radial


def gamma_k_quadrature(dk, ambient: str = "real_d") -> float:
    """Gamma-constant from quadrature values of Gamma (no lgamma involved)."""
    dk = _as_dk(dk)
    d, k = dk.d, dk.k
    if ambient == "real_d":
        return gamma_quadrature(0.5 * (k + d)) / (math.pi ** (0.5 * d) * gamma_quadrature(0.5 * k))
    return gamma_quadrature(d + 0.5 * k) / (math.pi ** d * gamma_quadrature(0.5 * k))


def beta_radial_quadrature(d: int, alpha: float) -> float:
    """``2 int_0^inf r^{d-1} (1+r^2)^{-d-alpha} dr`` by adaptive quadrature."""
    val, _ = integrate_half_line(
        lambda r: 2.0 * r ** (d - 1) * (1.0 + r * r) ** (-d - alpha),
        abs_tol=1e-15, rel_tol=1e-12)
    return val


def stirling_relative_error(s) -> np.ndarray:
    """``|Gamma(s) / (sqrt(2 pi) s^{s-1/2} e^{-s}) - 1|`` evaluated in logs."""
    s = np.asarray(s, dtype=float)
    log_stirling = 0.5 * math.log(2 * math.pi) + (s - 0.5) * np.log(s) - s
    return np.abs(np.expm1(lgamma(s) - log_stirling))
