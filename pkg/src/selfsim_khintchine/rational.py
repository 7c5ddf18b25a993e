"""Exact rational scalars and small dense rational matrices.

Scalars are :class:`fractions.Fraction`.  :class:`RationalMatrix` is an
immutable row-major matrix of fractions with just the linear algebra the
package needs: products, determinants, inverses and the projective
normal form used to compare elements of PGL.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError

RationalLike = Union[int, Fraction, str]

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def to_fraction(value) -> Fraction:
    """Convert ints, fractions and ``"num/den"`` strings to a Fraction.

    Floats are converted exactly (every double is a dyadic rational).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def parse_rational(text: str) -> Fraction:
    """Parse an exact rational literal: an integer or ``num/den``.

    Decimal literals such as ``0.666`` are rejected because they usually
    stand for a rounded value rather than the intended rational.
    """
    m = _RATIONAL_RE.match(text)
    if m is None:
        raise DomainError(f"not an exact rational literal: {text!r} (use num/den)")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise DomainError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def prime_factors(n: int) -> set[int]:
    """Prime divisors of a nonzero integer, by trial division."""
    n = abs(int(n))
    if n == 0:
        raise DomainError("zero has no finite prime factorisation")
    out = set()
    f = 2
    while f * f <= n:
        while n % f == 0:
            out.add(f)
            n //= f
        f += 1 if f == 2 else 2
    if n > 1:
        out.add(n)
    return out


def is_prime(n: int) -> bool:
    n = int(n)
    if n < 2:
        return False
    return prime_factors(n) == {n}


def valuation(x, p: int) -> int:
    """p-adic valuation of a nonzero rational."""
    x = to_fraction(x)
    if x == 0:
        raise DomainError("valuation of zero is infinite")
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


class RationalMatrix:
    """Immutable dense matrix with Fraction entries."""

    __slots__ = ("rows", "_hash")

    def __init__(self, rows: Iterable[Iterable[RationalLike]]):
        data = tuple(tuple(to_fraction(v) for v in row) for row in rows)
        if not data or any(len(r) != len(data[0]) for r in data) or not data[0]:
            raise DomainError("matrix rows must be nonempty and of equal length")
        self.rows = data
        self._hash = None

    # -- construction -------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def diag(cls, values: Sequence[RationalLike]) -> "RationalMatrix":
        n = len(values)
        return cls([[values[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def _raw(cls, rows) -> "RationalMatrix":
        m = object.__new__(cls)
        m.rows = rows
        m._hash = None
        return m

    # -- basic protocol -----------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.rows)
        return self._hash

    def __repr__(self) -> str:
        body = "; ".join(" ".join(format_rational(v) for v in r) for r in self.rows)
        return f"RationalMatrix[{body}]"

    def tolist(self) -> list[list[Fraction]]:
        return [list(r) for r in self.rows]

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.rows], dtype=float)

    # -- arithmetic ---------------------------------------------------
    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise DomainError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = list(zip(*other.rows))
        return RationalMatrix._raw(
            tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in self.rows)
        )

    def apply(self, vec: Sequence[Fraction]) -> tuple[Fraction, ...]:
        if len(vec) != self.shape[1]:
            raise DomainError("vector length does not match matrix")
        return tuple(sum(a * b for a, b in zip(row, vec)) for row in self.rows)

    def scale(self, c) -> "RationalMatrix":
        c = to_fraction(c)
        return RationalMatrix._raw(tuple(tuple(c * v for v in r) for r in self.rows))

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix._raw(tuple(zip(*self.rows)))

    def det(self) -> Fraction:
        n, m = self.shape
        if n != m:
            raise DomainError("determinant of a non-square matrix")
        a = [list(r) for r in self.rows]
        sign = 1
        det = Fraction(1)
        for c in range(n):
            piv = next((r for r in range(c, n) if a[r][c] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != c:
                a[c], a[piv] = a[piv], a[c]
                sign = -sign
            det *= a[c][c]
            inv = 1 / a[c][c]
            for r in range(c + 1, n):
                f = a[r][c] * inv
                if f:
                    for k in range(c, n):
                        a[r][k] -= f * a[c][k]
        return sign * det

    def inverse(self) -> "RationalMatrix":
        n, m = self.shape
        if n != m:
            raise DomainError("inverse of a non-square matrix")
        a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.rows)]
        for c in range(n):
            piv = next((r for r in range(c, n) if a[r][c] != 0), None)
            if piv is None:
                raise DomainError("matrix is singular")
            a[c], a[piv] = a[piv], a[c]
            inv = 1 / a[c][c]
            a[c] = [v * inv for v in a[c]]
            for r in range(n):
                if r != c and a[r][c] != 0:
                    f = a[r][c]
                    a[r] = [x - f * y for x, y in zip(a[r], a[c])]
        return RationalMatrix._raw(tuple(tuple(r[n:]) for r in a))

    def entries(self) -> Iterable[Fraction]:
        for r in self.rows:
            yield from r

    def is_identity(self) -> bool:
        n, m = self.shape
        return n == m and all(v == (i == j) for i, r in enumerate(self.rows) for j, v in enumerate(r))

    def is_orthogonal(self) -> bool:
        n, m = self.shape
        return n == m and (self.transpose() @ self).is_identity()

    # -- projective normal form ---------------------------------------
    def projective_normal_form(self) -> tuple[tuple[int, ...], ...]:
        """Canonical integer representative of the line through this matrix.

        Clears denominators, divides by the gcd of all entries and makes the
        first nonzero entry positive.  Two nonzero matrices differ by a
        nonzero scalar iff their normal forms coincide.
        """
        den = reduce(lcm, (v.denominator for v in self.entries()), 1)
        ints = [[int(v * den) for v in r] for r in self.rows]
        g = reduce(math.gcd, (abs(v) for r in ints for v in r), 0)
        if g == 0:
            raise DomainError("zero matrix has no projective class")
        first = next(v for r in ints for v in r if v != 0)
        s = g if first > 0 else -g
        return tuple(tuple(v // s for v in r) for r in ints)

    def projectively_equal(self, other: "RationalMatrix") -> bool:
        return self.projective_normal_form() == other.projective_normal_form()


def block_diag_with_one(block: RationalMatrix) -> RationalMatrix:
    """diag(block, 1)."""
    n = block.shape[0]
    rows = [list(r) + [Fraction(0)] for r in block.rows]
    rows.append([Fraction(0)] * n + [Fraction(1)])
    return RationalMatrix(rows)


def unipotent(x: Sequence[RationalLike]) -> RationalMatrix:
    """The matrix u(x) = [[Id, x], [0, 1]] with x in the last column."""
    d = len(x)
    rows = [[Fraction(int(i == j)) for j in range(d)] + [to_fraction(x[i])] for i in range(d)]
    rows.append([Fraction(0)] * d + [Fraction(1)])
    return RationalMatrix(rows)
