"""Complex-space kernels, directional Hilbert transforms and the rotation identity."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszlab.constants import DimOrder, complex_sphere_moment, gamma_k
from rieszlab.fields import GridField, GridSpec, lp_norm, random_bandlimited
from rieszlab.harmonics import monomial, parse_harmonic
from rieszlab.riesz import TruncationGrid
from rieszlab.rotations import (ComplexDirection, LambdaQuadrature, complex_kernel,
                                direct_complex_truncated, directional_hilbert,
                                hilbert_profile, hilbert_profile_bessel,
                                maximal_directional_hilbert, reconstruct_truncated,
                                zeta_cross_moment_mc, zeta_moment_mc)

SPEC1 = GridSpec(2, 128, 16.0)   # C^1
SPEC2 = GridSpec(4, 32, 16.0)    # C^2
Z1 = monomial((1,), 1)
ONE = ComplexDirection(np.array([1.0 + 0j]))


# ---------------------------------------------------------------------------
# kernel

def test_complex_kernel_examples():
    assert complex_kernel(Z1, np.array([1.0 + 0j]), 0.5) == pytest.approx(1 / (2 * math.pi))
    assert complex_kernel(Z1, np.array([0.2j]), 0.5) == 0
    with pytest.raises(ValueError):
        complex_kernel(Z1, np.array([0j]), 0.5)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.2, 5))
@settings(max_examples=50)
def test_complex_kernel_parity_and_homogeneity(w, lam):
    z = np.array([w[0] + 1j * w[1], w[2] + 1j * w[3]])
    r = float(np.linalg.norm(z))
    if r < 1e-2:
        return
    t = 0.5 * r
    P = monomial((1,), 2)
    Q = monomial((1, 2), 2)
    assert complex_kernel(P, -z, t) == pytest.approx(-complex_kernel(P, z, t), rel=1e-12)
    assert complex_kernel(Q, -z, t) == pytest.approx(complex_kernel(Q, z, t), rel=1e-12)
    for R in (P, Q):
        assert complex_kernel(R, lam * z, lam * t) == pytest.approx(
            lam ** -4 * complex_kernel(R, z, t), rel=1e-10)


def test_complex_kernel_uses_complex_argument():
    # P = z1^2 - z2^2 is harmonic and its complex value differs from |z|-based forms
    P = parse_harmonic("1 2 0\n-1 0 2")
    z = np.array([1j, 0.0])
    g = gamma_k(DimOrder(2, 2), ambient="complex_2d").value
    assert complex_kernel(P, z, 0.1) == pytest.approx(-g)


# ---------------------------------------------------------------------------
# directional transform

def test_lambda_quadrature_validation():
    with pytest.raises(ValueError):
        LambdaQuadrature(1.0, 0.5)
    with pytest.raises(ValueError):
        LambdaQuadrature(1.0, 2.0, k=3, n_a=16)
    with pytest.raises(ValueError):
        LambdaQuadrature(1.0, 2.0, k=0)
    assert LambdaQuadrature.default(1.0, 4.0, 3).n_a >= 24


@pytest.mark.parametrize("k", [1, 2, 3])
def test_hilbert_profile_matches_bessel(k):
    for s in (0.05, 0.3, 1.0, 2.5):
        q = LambdaQuadrature.default(1.0, 4.0, k, s)
        val = hilbert_profile(q, s)[0]
        assert val == pytest.approx(hilbert_profile_bessel(k, 1.0, 4.0, s), abs=1e-8)


def test_directional_hilbert_kills_constants():
    c = GridField(SPEC1, np.full(SPEC1.shape, 2.5))
    for k in (1, 2):
        assert np.max(np.abs(directional_hilbert(c, ONE, 1.0, k).values)) < 1e-10


@given(st.integers(0, 2 ** 31))
@settings(max_examples=5, deadline=None)
def test_directional_hilbert_linearity(seed):
    f = random_bandlimited(SPEC1, seed, band=8)
    g = random_bandlimited(SPEC1, seed + 1, band=8)
    zeta = ComplexDirection.sample(1, seed)
    lhs = directional_hilbert(3.0 * f - g, zeta, 1.0, 1).values
    rhs = 3.0 * directional_hilbert(f, zeta, 1.0, 1).values - directional_hilbert(g, zeta, 1.0, 1).values
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_directional_hilbert_d1_matches_direct_convolution():
    # for d=1 and zeta=1 the complex kernel is gamma~ times the directional kernel
    f = random_bandlimited(SPEC1, 0, band=8)
    g = gamma_k(DimOrder(1, 1), ambient="complex_2d").value
    direct = direct_complex_truncated(f, Z1, 1.0).values
    H = directional_hilbert(f, ONE, 1.0, 1).values
    assert np.linalg.norm(direct - g * H) <= 0.02 * np.linalg.norm(direct)


def test_directional_hilbert_rejects_bad_input():
    f = random_bandlimited(SPEC1, 0, band=8)
    with pytest.raises(ValueError):
        directional_hilbert(f, ONE, 1.0, 1, lam_max=9.0)
    with pytest.raises(ValueError):
        directional_hilbert(f, ONE, SPEC1.h, 1)
    with pytest.raises(ValueError):
        directional_hilbert(f, ComplexDirection.sample(2, 0), 1.0, 1)
    with pytest.raises(ValueError):
        ComplexDirection(np.array([1.0, 1.0]))


def test_maximal_singleton_and_dominance():
    f = random_bandlimited(SPEC1, 2, band=8)
    zeta = ComplexDirection.sample(1, 3)
    single = maximal_directional_hilbert(f, zeta, [1.0], 1).values
    assert np.array_equal(single, np.abs(directional_hilbert(f, zeta, 1.0, 1).values))
    tg = TruncationGrid(0.5, 4.0)
    m = maximal_directional_hilbert(f, zeta, tg, 1).values
    for t in tg.values:
        assert np.all(m >= np.abs(directional_hilbert(f, zeta, t, 1).values))
    with pytest.raises(ValueError):
        maximal_directional_hilbert(f, zeta, [], 1)


def test_maximal_ratio_stable_across_directions():
    spec = GridSpec(2, 64, 16.0)
    f = random_bandlimited(spec, 4, band=8)
    tg = TruncationGrid(0.5, 4.0)
    norm = lp_norm(f, 2)
    ratios = np.array([lp_norm(maximal_directional_hilbert(f, ComplexDirection.sample(1, 0, i),
                                                           tg, 1), 2) / norm for i in range(20)])
    assert np.all(np.isfinite(ratios))
    assert np.max(np.abs(ratios / ratios.mean() - 1)) <= 0.10


# ---------------------------------------------------------------------------
# rotation identity

def test_reconstruct_d1_exact_angular_rule():
    f = random_bandlimited(SPEC1, 0, band=8)
    rep = reconstruct_truncated(f, Z1, 1.0, 16, 0)
    assert rep.rel_err < 0.02 and rep.std_err == 0.0
    assert set(rep.row()) == {"d", "k", "t", "samples", "seed", "rel_err", "std_err"}


def test_reconstruct_zero_field():
    z = GridField(SPEC1, np.zeros(SPEC1.shape))
    assert reconstruct_truncated(z, Z1, 1.0, 16, 0).rel_err == 0.0


def test_reconstruct_d2_k1():
    f = random_bandlimited(SPEC2, 0, band=4)
    rep = reconstruct_truncated(f, monomial((1,), 2), 2.0, 4000, 0, threads=4)
    assert rep.rel_err < 0.05


def test_reconstruct_clt_slope_d2_k1():
    f = random_bandlimited(SPEC2, 0, band=4)
    counts = [250, 1000, 4000]
    errs = []
    for seed in range(4):
        rep = reconstruct_truncated(f, monomial((1,), 2), 2.0, 4000, seed, counts=counts, threads=4)
        errs.append([c[1] for c in rep.meta["curve"]])
    rms = np.sqrt(np.mean(np.array(errs) ** 2, axis=0))
    slope = np.polyfit(np.log(counts), np.log(rms), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_reconstruct_rejects_large_d():
    with pytest.raises(ValueError):
        reconstruct_truncated(random_bandlimited(GridSpec(6, 8, 16.0), 0, band=2),
                              monomial((1,), 3), 2.0, 4, 0)


# ---------------------------------------------------------------------------
# zeta moments

@pytest.mark.parametrize("d,k,j", [(3, 1, (1,)), (2, 2, (1, 2)), (4, 2, (2, 4))])
def test_zeta_moment_matches_closed_form(d, k, j):
    mean, se = zeta_moment_mc((d, k), j, 200_000, 1)
    exact = complex_sphere_moment(DimOrder(d, k)).value
    assert exact == pytest.approx(math.gamma(d) / math.gamma(d + k), rel=1e-12)
    assert abs(mean - exact) <= 4 * se


def test_zeta_cross_moment_vanishes():
    mean, se = zeta_cross_moment_mc(3, (1,), (2,), 200_000, 2)
    assert abs(mean) <= 4 * se
    mean, se = zeta_cross_moment_mc(3, (1, 2), (2, 3), 200_000, 3)
    assert abs(mean) <= 4 * se


@pytest.mark.parametrize("d", [2, 4, 8])
def test_zeta_moment_times_d_is_one(d):
    mean, _ = zeta_moment_mc((d, 1), (1,), 100_000, 0)
    assert 0.9 <= d * mean <= 1.1


def test_zeta_moment_rejects_bad_index():
    with pytest.raises(ValueError):
        zeta_moment_mc((3, 2), (1, 1), 10)
