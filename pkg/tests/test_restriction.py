"""Restricted kernel, slice integral, directional operators and domination."""
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszlab.constants import DimOrder, domination_constant, gamma_k, surface_area
from rieszlab.fields import GridField, GridSpec, periodized_gaussian, random_bandlimited
from rieszlab.restriction import (It_limit, check_domination, difference_kernel,
                                  directional_average, directional_constant, directional_hl,
                                  directional_weight, eval_It, one_sided_average, ray_nodes,
                                  restricted_kernel, slice_integral_check)


def _It_mp(r, t, d, k):
    """The defining integral over s, evaluated in arbitrary precision."""
    lo = mpmath.sqrt(mpmath.mpf(t) ** 2 / mpmath.mpf(r) ** 2 - 1)
    return mpmath.quad(lambda s: s ** (d - 1) * (1 + s * s) ** (-d - mpmath.mpf(k) / 2),
                       [lo, lo + 1, mpmath.inf])


def _It_oracle(r, t, d, k):
    return float(_It_mp(r, t, d, k))


# ---------------------------------------------------------------------------
# I^t

@pytest.mark.parametrize("d,k", [(1, 1), (2, 1), (2, 2), (3, 2), (6, 4)])
def test_It_matches_defining_integral(d, k):
    for r in (0.05, 0.3, 0.7, 0.99):
        assert eval_It(r, 1.0, (d, k)) == pytest.approx(_It_oracle(r, 1.0, d, k), abs=1e-12, rel=1e-10)


def test_It_limits():
    assert eval_It(1.0, 1.0, (2, 2)) == 0.0 and eval_It(2.0, 1.0, (2, 2)) == 0.0
    assert It_limit((2, 2)) == pytest.approx(0.25, rel=1e-14)
    assert eval_It(1 - 1e-12, 1.0, (2, 2)) == pytest.approx(0.25, abs=1e-10)
    assert eval_It(1e-6, 1.0, (2, 1)) < 1e-11
    with pytest.raises(ValueError):
        eval_It(0.0, 1.0, (2, 1))
    with pytest.raises(ValueError):
        eval_It(0.5, -1.0, (2, 1))


@given(st.floats(0.01, 1.0), st.floats(1.0, 2.0), st.floats(1.0, 2.0))
@settings(max_examples=50)
def test_It_nonincreasing_in_t(r, a, b):
    t1, t2 = sorted((a, b))
    assert eval_It(r, t2 + 1e-9, (3, 1)) <= eval_It(r, t1 + 1e-9, (3, 1)) + 1e-14


# ---------------------------------------------------------------------------
# restricted and difference kernels

def test_restricted_kernel_example():
    assert restricted_kernel((1,), [1.0, 0.0], 2.0, (2, 1)) == pytest.approx(1 / (16 * math.pi),
                                                                             rel=1e-12)
    with pytest.raises(ValueError):
        restricted_kernel((1,), [0.0, 0.0], 1.0, (2, 1))


def test_restricted_kernel_outside_is_real_kernel():
    x = np.array([0.8, -1.1, 0.4])
    g = gamma_k((3, 2)).value
    r = np.linalg.norm(x)
    assert restricted_kernel((1, 2), x, 1.0, (3, 2)) == g * x[0] * x[1] / r ** 5


def test_restricted_kernel_small_t_limit():
    x = np.array([0.3, -0.5, 0.4])
    r = np.linalg.norm(x)
    full = gamma_k((3, 1)).value * x[0] / r ** 4
    assert abs(restricted_kernel((1,), x, 1e-3 * r, (3, 1)) / full - 1) < 1e-6


@pytest.mark.parametrize("d,k", [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (5, 3)])
def test_branches_meet_at_the_sphere(d, k):
    dk = DimOrder(d, k)
    # Gamma algebra: gamma_k = gamma~_k S_{d-1} B(d/2, (d+k)/2) / 2
    g = gamma_k(dk).value
    assert gamma_k(dk, ambient="complex_2d").value * surface_area(d).value * It_limit(dk) == \
        pytest.approx(g, rel=1e-13)
    # the inner branch approaches the outer one like (2 eps)^{d/2}
    x = np.ones(d) / math.sqrt(d)
    j = tuple(range(1, k + 1))
    for eps in (1e-6, 1e-10):
        y = x * (1 - eps)
        r = np.linalg.norm(y)
        outer = g * np.prod(y[:k]) / r ** (d + k)
        gap = abs(restricted_kernel(j, y, 1.0, dk) - outer) / abs(outer)
        assert gap <= 5 * (2 * eps) ** (d / 2) + 1e-12
        if d >= 3 and eps == 1e-6:
            assert gap < 1e-8


def test_difference_kernel_support():
    dk = (2, 1)
    assert difference_kernel((1,), [1.5, 0.0], 1.0, dk) == 0.0
    assert difference_kernel((1,), [1.0, 0.0], 1.0, dk) == 0.0
    x = [0.3, 0.2]
    assert difference_kernel((1,), x, 1.0, dk) == -restricted_kernel((1,), x, 1.0, dk)
    with pytest.raises(ValueError):
        difference_kernel((1,), [0.0, 0.0], 1.0, dk)


# ---------------------------------------------------------------------------
# slice integral

def test_slice_worked_value():
    rep = slice_integral_check((1,), [0.5], 1.0, (1, 1))
    ref = (1 - math.sqrt(0.75)) / (math.pi / 2)
    assert rep.lhs == pytest.approx(ref, rel=1e-10)
    assert rep.rhs == pytest.approx(0.085290, abs=1e-6)
    assert rep.rel_err < 1e-6


@pytest.mark.parametrize("d,k", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_slice_integral_five_points(d, k):
    rng = np.random.default_rng(d * 10 + k)
    j = tuple(range(1, k + 1))
    for c in (0.25, 0.5, 0.75, 1.25, 2.0):
        u = rng.standard_normal(d)
        x = c * u / np.linalg.norm(u)
        assert slice_integral_check(j, x, 1.0, (d, k)).rel_err < 1e-6


@pytest.mark.parametrize("d,k", [(1, 1), (2, 1), (2, 2)])
def test_slice_direct_route_agrees(d, k):
    j = tuple(range(1, k + 1))
    for x in ([0.4, 0.3][:d], [1.3, -0.6][:d]):
        a = slice_integral_check(j, x, 1.0, (d, k), method="radial")
        b = slice_integral_check(j, x, 1.0, (d, k), method="direct")
        assert b.rel_err < 1e-6 and a.lhs == pytest.approx(b.lhs, rel=1e-8)
    with pytest.raises(ValueError):
        slice_integral_check((1,), [1.0, 0, 0], 1.0, (3, 1), method="direct")
    with pytest.raises(ValueError):
        slice_integral_check((1,), [1.0], 1.0, (1, 1), method="nope")


def test_slice_outside_ball_is_full_kernel():
    x = np.array([1.2, 0.7])
    rep = slice_integral_check((1,), x, 1.0, (2, 1))
    assert rep.lhs == pytest.approx(gamma_k((2, 1)).value * x[0] / np.linalg.norm(x) ** 3, rel=1e-6)


def test_slice_parity():
    x = np.array([0.4, -0.3, 0.2])
    a = slice_integral_check((1, 2), x, 1.0, (3, 2))
    b = slice_integral_check((1, 2), x * [-1, 1, 1], 1.0, (3, 2))
    assert b.lhs == pytest.approx(-a.lhs, rel=1e-12) and b.rhs == pytest.approx(-a.rhs, rel=1e-12)


# ---------------------------------------------------------------------------
# directional operators

SPEC3 = GridSpec(3, 32, 16.0)
OMEGA = np.array([2.0, -1.0, 2.0]) / 3.0


@pytest.mark.parametrize("d,k", [(1, 1), (3, 1), (3, 2), (6, 3)])
def test_directional_constant_matches_quadrature(d, k):
    g = gamma_k((d, k)).value
    gt = gamma_k((d, k), ambient="complex_2d").value
    S = surface_area(d).value
    val = mpmath.quad(lambda r: _It_mp(r, 1, d, k) / r, [0, 0.5, 0.9, 1])
    assert directional_constant((d, k)) == pytest.approx(gt / g * S * float(val), rel=1e-7)
    r, q, w = ray_nodes(1.7, (d, k))
    # 128 panels of order 4 resolve the corner at r = t to about 1e-7
    assert np.sum(w) == pytest.approx(directional_constant((d, k)), rel=1e-6)
    assert np.sum(q) == pytest.approx(1.7, rel=1e-13)
    assert np.all(r > 0) and np.all(r <= 1.7)


def test_directional_weight_vanishes_outside():
    assert np.all(directional_weight([1.0, 1.5], 1.0, (3, 1)) == 0)


def test_directional_average_constant_field():
    c = GridField(SPEC3, np.full(SPEC3.shape, 1.5))
    out = directional_average(c, OMEGA, 1.0, (3, 1)).values
    assert np.allclose(out, 1.5 * directional_constant((3, 1)), rtol=1e-6)


@given(st.integers(0, 2 ** 31))
@settings(max_examples=5, deadline=None)
def test_directional_average_linearity(seed):
    f, g = random_bandlimited(SPEC3, seed, band=4), random_bandlimited(SPEC3, seed + 1, band=4)
    A = lambda u: directional_average(u, OMEGA, 1.0, (3, 1)).values
    lhs, rhs = A(2 * f + g), 2 * A(f) + A(g)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_directional_average_translation_equivariant():
    f = random_bandlimited(SPEC3, 5, band=4)
    om = np.array([1.0, 0.0, 0.0])
    A = directional_average(f, om, 1.0, (3, 1)).values
    shifted = GridField(SPEC3, np.roll(f.values, 3, axis=0))
    B = directional_average(shifted, om, 1.0, (3, 1)).values
    assert np.allclose(B, np.roll(A, 3, axis=0), atol=1e-12)


def test_directional_operators_reject_bad_input():
    f = random_bandlimited(SPEC3, 0, band=4)
    with pytest.raises(ValueError):
        directional_average(f, OMEGA, 9.0, (3, 1))
    with pytest.raises(ValueError):
        directional_average(f, [1.0, 1.0, 0.0], 1.0, (3, 1))
    with pytest.raises(ValueError):
        directional_hl(f, [1.0, 0.0], 1.0)


def test_directional_hl_constant_is_two():
    c = GridField(SPEC3, np.ones(SPEC3.shape))
    assert np.allclose(directional_hl(c, OMEGA, 1.3).values, 2.0, rtol=1e-12)


def test_directional_hl_monotone():
    f = random_bandlimited(SPEC3, 1, band=4)
    g = f.with_values(np.abs(f.values) + 0.5)
    assert np.all(directional_hl(f, OMEGA, 1.0).values <= directional_hl(g, OMEGA, 1.0).values + 1e-12)


def test_directional_hl_support():
    spec = GridSpec(1, 256, 32.0)
    f = periodized_gaussian(spec, a=4.0, center=(8.0,))  # resolved by the grid
    out = directional_hl(f, [1.0], 1.0).values
    x = spec.axis()
    far = np.abs(x - 8.0) > 1.0 + 3.5  # exp(-4 x^2) < 1e-21 beyond 3.5
    assert np.max(out[far]) < 1e-12
    assert np.max(out) > 0.1


# ---------------------------------------------------------------------------
# domination

def test_domination_constant_field():
    c = GridField(SPEC3, np.ones(SPEC3.shape))
    rep = check_domination(c, OMEGA, 1.0, (3, 1))
    assert rep.constant_ratio <= 1
    assert rep.max_ratio == pytest.approx(rep.constant_ratio, rel=1e-6)
    assert rep.bound == domination_constant((3, 1)).value


@pytest.mark.parametrize("seed", range(5))
def test_domination_random_fields_d3(seed):
    f = random_bandlimited(SPEC3, seed, band=4)
    rng = np.random.default_rng(seed)
    om = rng.standard_normal(3)
    rep = check_domination(f, om / np.linalg.norm(om), 1.0, (3, 1))
    assert rep.max_ratio <= 1.05
    assert rep.max_ratio_one_sided <= 1.05


def test_domination_dilation_invariance():
    f = random_bandlimited(SPEC3, 2, band=4)
    # the same samples on a grid twice as long are f(x/2)
    g = GridField(GridSpec(3, 32, 32.0), f.values)
    a = check_domination(f, OMEGA, 1.0, (3, 1))
    b = check_domination(g, OMEGA, 2.0, (3, 1))
    assert b.max_ratio == pytest.approx(a.max_ratio, rel=0.02)
    assert set(a.row()) >= {"d", "k", "t", "bound", "max_ratio", "constant_ratio"}


def test_one_sided_average_of_constant():
    c = GridField(SPEC3, np.full(SPEC3.shape, 2.0))
    avg, hab = one_sided_average(c, OMEGA, 1.0, (3, 1))
    assert np.allclose(avg, 2.0, rtol=1e-12)
    assert np.allclose(hab, 2.0 * directional_constant((3, 1)), rtol=1e-6)
