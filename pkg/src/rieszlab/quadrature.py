"""Adaptive Gauss-Kronrod quadrature shared by every module.

The integrand must accept a 1-D numpy array and return an array of the same
shape (real or complex). Intervals are refined globally: the panel with the
largest error estimate is bisected until the summed estimate meets the
requested tolerance.
"""
from __future__ import annotations

import heapq
import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "gauss_kronrod",
    "integrate",
    "integrate_half_line",
    "integrate_panels",
    "gauss_legendre_panels",
]

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KRONROD_W = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (x_1, x_3, x_5, x_7 and mirrors).
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[7] = _WG[3]
_GAUSS_W[[9, 11, 13]] = _WG[2::-1]


class QuadratureError(RuntimeError):
    """Raised when the adaptive rule cannot reach the requested tolerance."""


def gauss_kronrod(f: Callable, a: float, b: float):
    """Single G7-K15 panel on [a, b]; returns (estimate, error_estimate)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * _NODES))
    k = half * np.dot(_KRONROD_W, vals)
    g = half * np.dot(_GAUSS_W, vals)
    return k, abs(k - g)


def integrate(
    f: Callable,
    a: float,
    b: float,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    max_panels: int = 4000,
    strict: bool = False,
):
    """Integrate ``f`` over the finite interval [a, b].

    Returns ``(value, error_estimate)``. With ``strict=True`` a
    :class:`QuadratureError` is raised when ``max_panels`` is exhausted before
    the tolerance is met; otherwise the best estimate is returned.
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    val, err = gauss_kronrod(f, a, b)
    heap = [(-err, a, b, val)]
    total, total_err = val, err
    n = 1
    while total_err > max(abs_tol, rel_tol * abs(total)):
        if n >= max_panels:
            if strict:
                raise QuadratureError(
                    f"tolerance not reached on [{a}, {b}]: err={total_err:.3e}")
            break
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # interval can no longer be split in floating point
            heapq.heappush(heap, (0.0, lo, hi, v))
            break
        v1, e1 = gauss_kronrod(f, lo, mid)
        v2, e2 = gauss_kronrod(f, mid, hi)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
    # re-sum to remove accumulated cancellation error in the running total
    total = sum(item[3] for item in heap)
    total_err = sum(-item[0] for item in heap)
    return sign * total, total_err


def integrate_panels(
    f: Callable,
    breakpoints: Sequence[float],
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
):
    """Integrate over consecutive panels ``[p_i, p_{i+1}]``.

    Used for oscillatory integrands: put the breakpoints at the zeros of the
    oscillating factor. Each panel gets an equal share of the absolute
    tolerance.
    """
    pts = np.asarray(breakpoints, dtype=float)
    if pts.size < 2:
        return 0.0, 0.0
    share = abs_tol / (pts.size - 1)
    total, err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = integrate(f, lo, hi, abs_tol=share, rel_tol=rel_tol)
        total += v
        err += e
    return total, err


def integrate_half_line(
    f: Callable,
    a: float = 0.0,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    max_panels: int = 4000,
):
    """Integrate ``f`` over [a, inf) via the map r = a + u/(1-u), u in [0, 1)."""

    def g(u):
        u = np.asarray(u, dtype=float)
        one_minus = 1.0 - u
        r = a + u / one_minus
        return f(r) / one_minus**2

    return integrate(g, 0.0, 1.0, abs_tol=abs_tol, rel_tol=rel_tol,
                     max_panels=max_panels)


def gauss_legendre_panels(edges: Iterable[float], order: int = 4):
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    edges = np.asarray(list(edges), dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x[None, :]
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()
