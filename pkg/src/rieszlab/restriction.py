"""Restricted and difference kernels on ``R^d`` and their directional operators.

The restricted kernel integrates the complex truncated kernel over the
imaginary directions. Outside the ball ``|x| < t`` it coincides with the
real truncated kernel; inside it is

    gamma~_k S_{d-1} x_j / |x|^{d+k} I^t(|x|),
    I^t(r) = int_{sqrt(t^2/r^2 - 1)}^inf s^{d-1} (1+s^2)^{-d-k/2} ds.

With ``u = 1/(1+s^2)`` the integral becomes an incomplete Beta integral,
and the further change ``u = 1 - w^2`` removes the endpoint singularity
that appears for ``d = 1``:

    I^t(r) = int_{sqrt(1 - r^2/t^2)}^1 w^{d-1} (1-w^2)^{(d+k)/2 - 1} dw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import digamma

from .constants import DimOrder, domination_constant, gamma_k, surface_area
from .fields import GridField, GridSpec, forward, inverse
from .quadrature import gauss_legendre_panels, integrate, integrate_half_line

__all__ = [
    "eval_It",
    "It_limit",
    "restricted_kernel",
    "difference_kernel",
    "SliceReport",
    "slice_integral_check",
    "ray_nodes",
    "directional_weight",
    "directional_constant",
    "directional_average",
    "directional_hl",
    "one_sided_average",
    "DominationReport",
    "check_domination",
]


def _dk(dk) -> DimOrder:
    return dk if isinstance(dk, DimOrder) else DimOrder(*dk)


def _monomial_value(j: Sequence[int], x: np.ndarray):
    idx = np.asarray(j, dtype=int) - 1
    return np.prod(x[..., idx], axis=-1)


def eval_It(r: float, t: float, dk, abs_tol: float = 1e-13) -> float:
    """``I^t(r)`` by adaptive quadrature; zero for ``r >= t``.

    Raises
    ------
    ValueError
        For nonpositive ``r`` or ``t``.
    """
    if not (r > 0 and t > 0):
        raise ValueError("r and t must be positive")
    if r >= t:
        return 0.0
    dk = _dk(dk)
    d, k = dk.d, dk.k
    a = 0.5 * (d + k) - 1.0
    q = r / t
    w0 = math.sqrt(max(0.0, (1.0 - q) * (1.0 + q)))

    def f(w):
        return w ** (d - 1) * (1.0 - w * w) ** a

    val, _ = integrate(f, w0, 1.0, abs_tol=abs_tol, rel_tol=1e-13)
    return val


def It_limit(dk) -> float:
    """``lim_{r -> t^-} I^t(r) = B(d/2, (d+k)/2) / 2``."""
    dk = _dk(dk)
    d, k = dk.d, dk.k
    return 0.5 * math.exp(math.lgamma(d / 2) + math.lgamma((d + k) / 2) - math.lgamma(d + k / 2))


def _norms(dk: DimOrder):
    g = gamma_k(dk).value
    gt = gamma_k(dk, ambient="complex_2d").value
    return g, gt, surface_area(dk.d).value


def restricted_kernel(j: Sequence[int], x, t: float, dk) -> float:
    """``K_j^t(x)`` for ``|x| >= t``, the smooth inner profile for ``|x| < t``.

    Raises
    ------
    ValueError
        At ``x = 0``.
    """
    dk = _dk(dk)
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0:
        raise ValueError("restricted kernel is undefined at x = 0")
    g, gt, S = _norms(dk)
    base = float(_monomial_value(j, x)) / r ** (dk.d + dk.k)
    if r >= t:
        return g * base
    return gt * S * base * eval_It(r, t, dk)


def difference_kernel(j: Sequence[int], x, t: float, dk) -> float:
    """``K_j^t - restricted kernel``: ``-restricted`` inside the ball, 0 outside."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0:
        raise ValueError("difference kernel is undefined at x = 0")
    if r >= t:
        return 0.0
    return -restricted_kernel(j, x, t, dk)


@dataclass
class SliceReport:
    lhs: float
    rhs: float
    rel_err: float
    method: str = "radial"


def _slice_radial(j, x, t, dk: DimOrder) -> float:
    d, k = dk.d, dk.k
    _, gt, S = _norms(dk)
    x2 = float(x @ x)
    r0 = math.sqrt(max(0.0, t * t - x2))
    e = d + 0.5 * k
    val, _ = integrate_half_line(lambda r: r ** (d - 1) / (x2 + r * r) ** e, a=r0,
                                 abs_tol=1e-16, rel_tol=1e-13)
    return gt * S * float(_monomial_value(j, x)) * val


def _slice_direct(j, x, t, dk: DimOrder) -> float:
    """Full ``y``-integral with the complex polynomial, for ``d <= 2``."""
    d, k = dk.d, dk.k
    _, gt, _ = _norms(dk)
    idx = np.asarray(j, dtype=int) - 1
    x2 = float(x @ x)
    r0 = math.sqrt(max(0.0, t * t - x2))
    e = d + 0.5 * k
    if d == 1:
        def f(r):
            # y = +r and y = -r together
            return 2.0 * (x[0] + 1j * r).real / (x2 + r * r) ** e
    elif d == 2:
        th, wt = gauss_legendre_panels(np.linspace(0, 2 * np.pi, 9), 8)
        om = np.stack([np.cos(th), np.sin(th)], axis=1)

        def f(r):
            z = x[None, None, :] + 1j * r[:, None, None] * om[None, :, :]
            p = np.prod(z[..., idx], axis=-1)
            return r * (p.real @ wt) / (x2 + r * r) ** e
    else:
        raise ValueError("direct slice integral is implemented for d <= 2")
    val, _ = integrate_half_line(f, a=r0, abs_tol=1e-16, rel_tol=1e-13)
    return gt * val


def slice_integral_check(j: Sequence[int], x, t: float, dk, method: str = "radial") -> SliceReport:
    """Compare the ``y``-slice integral of the complex kernel with the restricted kernel.

    ``method="radial"`` uses the reduction of the angular average to
    ``P_j(x)``; ``method="direct"`` (``d <= 2``) integrates the complex
    polynomial over all of ``R^d`` without that reduction.
    """
    dk = _dk(dk)
    x = np.asarray(x, dtype=float).reshape(dk.d)
    if method == "radial":
        lhs = _slice_radial(j, x, t, dk)
    elif method == "direct":
        lhs = _slice_direct(j, x, t, dk)
    else:
        raise ValueError(f"unknown method {method!r}")
    rhs = restricted_kernel(j, x, t, dk)
    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return SliceReport(float(lhs), float(rhs), float(rel), method)


# ----------------------------------------------------------------------------
# directional operators

def directional_weight(r, t: float, dk) -> np.ndarray:
    """``(gamma~_k / gamma_k) S_{d-1} I^t(r) / r`` on an array of radii."""
    dk = _dk(dk)
    g, gt, S = _norms(dk)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    I = np.array([eval_It(float(x), t, dk) if 0 < x < t else 0.0 for x in r])
    return gt / g * S * I / r


def directional_constant(dk) -> float:
    """``(gamma~/gamma) S_{d-1} int_0^t I^t(r)/r dr = (gamma~/gamma) S B(a,b)(psi(a+b)-psi(a))/4``.

    ``a = (d+k)/2``, ``b = d/2``; independent of ``t``.
    """
    dk = _dk(dk)
    g, gt, S = _norms(dk)
    a, b = 0.5 * (dk.d + dk.k), 0.5 * dk.d
    B = math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    return gt / g * S * 0.25 * B * (digamma(a + b) - digamma(a))


_node_cache: dict = {}


def ray_nodes(t: float, dk, panels: int = 128, order: int = 4):
    """Nodes and weights of ``int_0^t (.) I^t(r)/r dr`` scaled to the operator.

    Three quarters of the panels are geometric on ``[eps t, t/2]`` with
    ``eps^{d+k} = 1e-16``, after one panel on ``[0, eps t]``; the weight
    ``I^t(r)/r`` behaves like ``r^{d+k-1}`` near 0, so the geometric part
    alone would already carry the weighted integral to double precision.
    The rest are graded geometrically toward ``t``, where ``I^t`` has a
    square-root corner. Returns ``(r, q, w)`` with plain quadrature weights
    ``q`` and operator weights ``w = q * weight(r)``.
    """
    dk = _dk(dk)
    key = (float(t), dk, panels, order)
    if key not in _node_cache:
        eps = 1e-16 ** (1.0 / (dk.d + dk.k))
        n0 = (3 * panels) // 4
        n1 = panels - n0
        low = 0.5 * t * (2 * eps) ** (1.0 - np.arange(n0 + 1) / n0)
        high = t - 0.5 * t * 1e-10 ** (np.arange(1, n1 + 1) / n1)
        edges = np.concatenate([[0.0], low, high, [t]])
        r, q = gauss_legendre_panels(edges, order)
        w = q * directional_weight(r, t, dk)
        _node_cache[key] = (r, q, w)
    return _node_cache[key]


def _check_ray(spec: GridSpec, omega, t: float):
    om = np.asarray(omega, dtype=float).reshape(-1)
    if om.size != spec.n:
        raise ValueError("direction dimension does not match the grid")
    if abs(np.linalg.norm(om) - 1) > 1e-12:
        raise ValueError("omega must be a unit vector")
    if t > spec.L / 2:
        raise ValueError("t exceeds L/2")
    if t <= 0:
        raise ValueError("t must be positive")
    return om


def _phase(spec: GridSpec, om: np.ndarray):
    """``omega . xi`` on the frequency grid."""
    ax = spec.open_axes(spec.freq_axis())
    return sum(om[i] * ax[i] for i in range(spec.n))


def _shifted(F: np.ndarray, ph, r: float) -> np.ndarray:
    """Trigonometric interpolant evaluated at ``x - r omega``."""
    return np.fft.ifftn(F * np.exp(-2j * np.pi * r * ph), norm="ortho")


def directional_average(f: GridField, omega, t: float, dk,
                        panels: int = 128, order: int = 4) -> GridField:
    """``(gamma~/gamma) S_{d-1} int_0^t I^t(r) f(x - r omega) / r dr``.

    Linear in ``f``: the ray quadrature becomes the multiplier
    ``sum_i w_i exp(-2 pi i r_i omega.xi)``.
    """
    om = _check_ray(f.spec, omega, t)
    r, _, w = ray_nodes(t, dk, panels, order)
    ph = _phase(f.spec, om)
    M = np.zeros(np.broadcast_shapes(np.shape(ph)), dtype=complex)
    for ri, wi in zip(r, w):
        M = M + wi * np.exp(-2j * np.pi * ri * ph)
    F = forward(f).values
    return inverse(GridField(f.spec, F * M, "frequency"))


def directional_hl(f: GridField, omega, t: float, panels: int = 64, order: int = 4) -> GridField:
    """``(1/t) int_{-t}^{t} |f(x - r omega)| dr`` (value 2 on constants)."""
    om = _check_ray(f.spec, omega, t)
    r, q = gauss_legendre_panels(np.linspace(-t, t, panels + 1), order)
    ph = _phase(f.spec, om)
    F = forward(f).values
    acc = np.zeros(f.spec.shape)
    for ri, qi in zip(r, q):
        acc += qi * np.abs(_shifted(F, ph, ri))
    return f.with_values(acc / t)


def one_sided_average(f: GridField, omega, t: float, dk, panels: int = 128, order: int = 4):
    """``(1/t) int_0^t |f(x - r omega)| dr`` on the ray nodes, with the
    matching ``sum_i w_i |f(x - r_i omega)|``. Returns both arrays."""
    om = _check_ray(f.spec, omega, t)
    r, q, w = ray_nodes(t, dk, panels, order)
    ph = _phase(f.spec, om)
    F = forward(f).values
    avg = np.zeros(f.spec.shape)
    hab = np.zeros(f.spec.shape)
    for ri, qi, wi in zip(r, q, w):
        a = np.abs(_shifted(F, ph, ri))
        avg += qi * a
        hab += wi * a
    return avg / t, hab


@dataclass
class DominationReport:
    d: int
    k: int
    t: float
    bound: float
    max_ratio: float
    max_ratio_one_sided: float
    constant_ratio: float
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"d": self.d, "k": self.k, "t": self.t, "bound": self.bound,
                "max_ratio": self.max_ratio, "max_ratio_one_sided": self.max_ratio_one_sided,
                "constant_ratio": self.constant_ratio}


def check_domination(f: GridField, omega, t: float, dk, floor: float = 1e-3) -> DominationReport:
    """Pointwise ratios of ``H_omega^t |f|`` against averages of ``|f|``.

    ``max_ratio`` uses ``D (1/2) M_omega^t |f|`` as denominator, with ``D``
    the domination constant; ``max_ratio_one_sided`` uses ``D (1/t) int_0^t
    |f|``. Points where the denominator is below ``floor`` times its maximum
    are skipped (both sides are then at roundoff level).
    """
    dk = _dk(dk)
    g = f.with_values(np.abs(f.values))
    D = domination_constant(dk).value
    H = directional_average(g, omega, t, dk).values.real
    M = directional_hl(g, omega, t).values.real
    A1, _ = one_sided_average(g, omega, t, dk)
    eps = np.finfo(float).eps
    sym = D * 0.5 * M
    one = D * A1
    ok_s = sym > floor * sym.max()
    ok_o = one > floor * one.max()
    r_sym = float(np.max(H[ok_s] / (sym[ok_s] + eps)))
    r_one = float(np.max(H[ok_o] / (one[ok_o] + eps)))
    c_ratio = directional_constant(dk) / D
    return DominationReport(dk.d, dk.k, float(t), D, r_sym, r_one, c_ratio,
                            {"N": f.spec.N, "L": f.spec.L})
