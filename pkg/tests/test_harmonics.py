"""Solid harmonics, exact Laplacian and the Riesz symbol."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszlab.constants import index_count
from rieszlab.harmonics import (HarmonicityError, Polynomial, SolidHarmonic, enumerate_distinct,
                                evaluate, format_harmonic, laplacian, monomial, multiplier_on_grid,
                                multiplier_value, parse_harmonic)


def test_monomial_examples():
    P = monomial((1,), 2)
    assert P.terms == {(1, 0): 1}
    Q = monomial((1, 2), 3)
    assert Q.terms == {(1, 1, 0): 1} and Q.degree == 2
    with pytest.raises(ValueError):
        monomial((1, 1), 2)
    with pytest.raises(ValueError):
        monomial((3,), 2)


def test_evaluate_examples():
    assert evaluate(monomial((1, 2), 2), (2.0, 3.0)) == pytest.approx(6.0)
    assert evaluate(monomial((1,), 3), (0.0, 5.0, -1.0)) == 0.0
    with pytest.raises(ValueError):
        evaluate(monomial((1,), 3), (1.0, 2.0))


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(0.1, 5))
def test_homogeneity(x, lam):
    P = parse_harmonic("1 2 0 0\n-1 0 2 0\n3 0 1 1")
    lhs = evaluate(P, lam * np.array(x))
    rhs = lam ** 2 * evaluate(P, np.array(x))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_laplacian_examples():
    assert laplacian(monomial((1, 2), 2)).is_zero()
    P = parse_harmonic("1 2 0\n-1 0 2")
    assert laplacian(P).is_zero()
    lap = laplacian(Polynomial(2, {(2, 0): 1}))
    assert lap.terms == {(0, 0): 2}
    with pytest.raises(HarmonicityError):
        SolidHarmonic(2, 2, {(2, 0): 1})


def test_rejections():
    with pytest.raises(HarmonicityError):
        SolidHarmonic(2, 1, {})
    with pytest.raises(HarmonicityError):
        SolidHarmonic(2, 2, {(1, 1): 1, (1, 0): 1})
    with pytest.raises(HarmonicityError):
        parse_harmonic("1 1 0\n1 2 0")


@pytest.mark.parametrize("d,k", [(1, 1), (3, 2), (4, 3), (5, 5)])
def test_monomials_are_harmonic(d, k):
    for j in enumerate_distinct(d, k):
        assert laplacian(monomial(j, d)).is_zero()


def test_multiplier_examples():
    assert multiplier_value(monomial((1,), 2), (3.0, 4.0)) == pytest.approx(-0.6j)
    assert multiplier_value(monomial((1, 2), 2), (1.0, 1.0)) == pytest.approx(-0.5)
    assert multiplier_value(monomial((1,), 2), (0.0, 0.0)) == 0


def test_enumerate_examples():
    assert enumerate_distinct(2, 1) == [(1,), (2,)]
    assert enumerate_distinct(2, 2) == [(1, 2), (2, 1)]
    assert len(enumerate_distinct(3, 2)) == index_count((3, 2)) == 6
    with pytest.warns(RuntimeWarning):
        assert enumerate_distinct(2, 3) == []


def _random_harmonic(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    k = int(rng.integers(1, d + 1))
    j = tuple(int(i) + 1 for i in rng.permutation(d)[:k])
    return monomial(j, d)


@given(st.integers(0, 10 ** 6), st.floats(0.01, 100))
@settings(max_examples=100)
def test_multiplier_degree_zero_and_conjugate_symmetric(seed, lam):
    P = _random_harmonic(seed)
    xi = np.random.default_rng(seed + 1).standard_normal(P.d)
    m = multiplier_value(P, xi)
    assert multiplier_value(P, lam * xi) == pytest.approx(m, rel=1e-12, abs=1e-14)
    assert multiplier_value(P, -xi) == pytest.approx(np.conj(m), rel=1e-12, abs=1e-14)


def test_multiplier_bounded_by_sphere_max():
    P = parse_harmonic("1 2 0 0\n-1 0 2 0\n1 1 1 0")
    rng = np.random.default_rng(0)
    s = rng.standard_normal((100_000, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    bound = np.max(np.abs(evaluate(P, s)))
    xi = rng.standard_normal((2000, 3)) * 7
    assert np.all(np.abs(multiplier_value(P, xi)) <= bound + 1e-9)


def test_multiplier_on_grid_matches_pointwise():
    P = monomial((1, 2), 2)
    f = np.fft.fftfreq(8, 1 / 8)
    grid = multiplier_on_grid(P, [f, f])
    X, Y = np.meshgrid(f, f, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    assert np.allclose(grid, multiplier_value(P, pts), atol=1e-15)


def test_parse_format_round_trip():
    text = "1/2 2 0 0\n-1/2 0 2 0\n0.25 0 1 1"
    P = parse_harmonic(text)
    assert P.terms[(2, 0, 0)] == Fraction(1, 2)
    Q = parse_harmonic(format_harmonic(P))
    assert Q == P
    with pytest.raises(ValueError):
        parse_harmonic("# nothing\n")
    with pytest.raises(ValueError):
        parse_harmonic("1 1 0\n1 1", d=2)


def test_harmonic_is_hashable_and_callable():
    P = monomial((2,), 3)
    assert {P: 1}[monomial((2,), 3)] == 1
    assert P((1.0, math.pi, 2.0)) == pytest.approx(math.pi)
