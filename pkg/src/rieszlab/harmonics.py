"""Solid spherical harmonics as exact coefficient maps.

A :class:`SolidHarmonic` of degree ``k`` in ``d`` variables is stored as a
dict from exponent tuples (length ``d``, summing to ``k``) to coefficients.
Rational inputs stay :class:`fractions.Fraction` so the Laplacian of a
harmonic polynomial is exactly the zero polynomial.
"""
from __future__ import annotations

import itertools
import warnings
from fractions import Fraction
from numbers import Rational
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "MultiIndex",
    "Polynomial",
    "SolidHarmonic",
    "HarmonicityError",
    "monomial",
    "evaluate",
    "evaluate_axes",
    "laplacian",
    "multiplier_value",
    "multiplier_on_grid",
    "enumerate_distinct",
    "parse_harmonic",
    "format_harmonic",
    "minus_i_power",
]

Exponent = Tuple[int, ...]
MultiIndex = Tuple[int, ...]


def minus_i_power(k: int) -> complex:
    """``(-i)^k`` without rounding noise."""
    return (1 + 0j, -1j, -1 + 0j, 1j)[k % 4]


class HarmonicityError(ValueError):
    """The polynomial is not harmonic (or not homogeneous)."""


def _coerce(c):
    if isinstance(c, (Fraction, Rational)) and not isinstance(c, bool):
        return Fraction(c)
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    return float(c)


class Polynomial:
    """Plain homogeneous-or-not polynomial in ``d`` real variables.

    Zero coefficients are dropped, so the zero polynomial has no terms.
    """

    def __init__(self, dimension: int, terms: Mapping[Exponent, object]):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        clean: Dict[Exponent, object] = {}
        for exp, c in terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.dimension or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp} for dimension {dimension}")
            c = _coerce(c)
            if c != 0:
                clean[exp] = clean.get(exp, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self):
        return {sum(e) for e in self.terms}

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return f"{type(self).__name__}(d={self.dimension}, 0)"
        parts = []
        for exp, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
                            for i, e in enumerate(exp) if e)
            parts.append(f"{c}*{mono}" if mono else f"{c}")
        return f"{type(self).__name__}(d={self.dimension}, {' + '.join(parts)})"


class SolidHarmonic(Polynomial):
    """Homogeneous harmonic polynomial of degree ``degree`` in ``d`` variables.

    Construction validates homogeneity and exact harmonicity.

    Raises
    ------
    HarmonicityError
        If some term has the wrong degree, or the Laplacian is nonzero, or
        the polynomial is identically zero.
    """

    def __init__(self, dimension: int, degree: int, terms: Mapping[Exponent, object]):
        super().__init__(dimension, terms)
        self.degree = int(degree)
        if self.is_zero():
            raise HarmonicityError("the zero polynomial is not accepted")
        bad = [e for e in self.terms if sum(e) != self.degree]
        if bad:
            raise HarmonicityError(f"terms {bad} are not of degree {self.degree}")
        lap = laplacian(self)
        if not _numerically_zero(lap, self):
            raise HarmonicityError(f"laplacian is {lap!r}, not zero")

    @property
    def d(self) -> int:
        return self.dimension

    @property
    def k(self) -> int:
        return self.degree

    def __call__(self, x):
        return evaluate(self, x)

    def __hash__(self):
        return hash((self.dimension, self.degree, tuple(sorted(self.terms.items()))))


def _numerically_zero(lap: Polynomial, P: Polynomial) -> bool:
    if lap.is_zero():
        return True
    exact = all(isinstance(c, Fraction) for c in P.terms.values())
    if exact:
        return False
    scale = max(abs(float(c)) for c in P.terms.values())
    return all(abs(float(c)) <= 1e-12 * scale for c in lap.terms.values())


def monomial(j: Sequence[int], d: int) -> SolidHarmonic:
    """Distinct-index monomial ``x_{j1} x_{j2} ... x_{jk}`` (1-based indices).

    Raises
    ------
    ValueError
        On repeated or out-of-range entries; a repeated variable is in
        general not harmonic.
    """
    j = tuple(int(i) for i in j)
    if not j:
        raise ValueError("empty multi-index")
    if len(set(j)) != len(j):
        raise ValueError(f"multi-index {j} has repeated entries")
    if any(i < 1 or i > d for i in j):
        raise ValueError(f"multi-index {j} out of range for d={d}")
    exp = [0] * d
    for i in j:
        exp[i - 1] = 1
    return SolidHarmonic(d, len(j), {tuple(exp): Fraction(1)})


def laplacian(P: Polynomial) -> Polynomial:
    """Exact Laplacian of a polynomial in coefficient form."""
    out: Dict[Exponent, object] = {}
    for exp, c in P.terms.items():
        for i, e in enumerate(exp):
            if e >= 2:
                new = list(exp)
                new[i] -= 2
                new = tuple(new)
                out[new] = out.get(new, 0) + c * e * (e - 1)
    return Polynomial(P.dimension, out)


def evaluate(P: Polynomial, x):
    """Evaluate ``P`` at one point or a stack of points.

    ``x`` has shape ``(d,)`` or ``(..., d)``; complex entries are allowed
    (used by the complex-space kernel). Returns a scalar or an array of
    shape ``x.shape[:-1]``.
    """
    x = np.asarray(x)
    if x.shape[-1] != P.dimension:
        raise ValueError(f"point has dimension {x.shape[-1]}, polynomial has {P.dimension}")
    dtype = np.result_type(x.dtype, float)
    total = np.zeros(x.shape[:-1], dtype=dtype)
    for exp, c in P.terms.items():
        term = np.full(x.shape[:-1], float(c), dtype=dtype)
        for i, e in enumerate(exp):
            if e:
                term = term * x[..., i] ** e
        total = total + term
    if total.ndim == 0:
        return total.item()
    return total


def evaluate_axes(P: Polynomial, axes: Sequence[np.ndarray]):
    """Evaluate ``P`` on broadcastable per-coordinate arrays ``axes[i] = x_i``.

    Avoids stacking coordinates along a trailing axis, which matters for
    large grids.
    """
    if len(axes) != P.dimension:
        raise ValueError(f"got {len(axes)} coordinate arrays, polynomial has {P.dimension}")
    total = 0.0
    for exp, c in P.terms.items():
        term = float(c)
        for i, e in enumerate(exp):
            if e:
                term = term * axes[i] ** e
        total = total + term
    return np.broadcast_to(total, np.broadcast_shapes(*[np.shape(a) for a in axes]))


def multiplier_value(P: SolidHarmonic, xi):
    """Riesz symbol ``(-i)^k P(xi/|xi|)``, with the value 0 at ``xi = 0``.

    Vectorized over leading axes of ``xi``.
    """
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    unit = xi / safe[..., None]
    val = minus_i_power(P.degree) * evaluate(P, unit)
    val = np.where(norm > 0, val, 0.0)
    if np.ndim(val) == 0:
        return complex(val)
    return val


def multiplier_on_grid(P: SolidHarmonic, freqs: Sequence[np.ndarray]) -> np.ndarray:
    """``m_P`` on the tensor grid spanned by 1-D frequency vectors.

    Built term by term with broadcasting to avoid materializing a ``(..., d)``
    coordinate stack.
    """
    d = P.dimension
    if len(freqs) != d:
        raise ValueError("need one frequency axis per dimension")
    axes = [np.asarray(f, dtype=float).reshape([-1 if a == i else 1 for a in range(d)])
            for i, f in enumerate(freqs)]
    r2 = sum(a * a for a in axes)
    poly = evaluate_axes(P, axes)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(r2 > 0, poly / np.sqrt(r2) ** P.degree, 0.0)
    return minus_i_power(P.degree) * val


def enumerate_distinct(d: int, k: int) -> list:
    """All ordered ``k``-tuples of distinct indices in ``1..d``, lexicographic.

    Returns an empty list (with a warning) when ``k > d``.
    """
    if k > d:
        warnings.warn(f"no distinct-index tuples of length {k} in {d} dimensions",
                      RuntimeWarning, stacklevel=2)
        return []
    return list(itertools.permutations(range(1, d + 1), k))


def parse_harmonic(text: str, d: int | None = None) -> SolidHarmonic:
    """Read the line format ``coeff e1 e2 ... ed`` (one term per line).

    Blank lines and ``#`` comments are ignored. Coefficients are parsed as
    exact fractions when possible (``3``, ``-1/2``, ``0.25``).
    """
    terms: Dict[Exponent, object] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            coeff = Fraction(fields[0])
        except ValueError:
            coeff = float(fields[0])
        exp = tuple(int(e) for e in fields[1:])
        if d is None:
            d = len(exp)
        if len(exp) != d:
            raise ValueError(f"line {raw!r}: expected {d} exponents")
        terms[exp] = terms.get(exp, 0) + coeff
    if not terms:
        raise ValueError("no terms")
    degrees = {sum(e) for e in terms}
    if len(degrees) != 1:
        raise HarmonicityError(f"mixed degrees {sorted(degrees)}")
    return SolidHarmonic(d, degrees.pop(), terms)


def format_harmonic(P: Polynomial) -> str:
    """Inverse of :func:`parse_harmonic`."""
    lines = []
    for exp, c in sorted(P.terms.items(), reverse=True):
        lines.append(" ".join([str(c)] + [str(e) for e in exp]))
    return "\n".join(lines) + "\n"

