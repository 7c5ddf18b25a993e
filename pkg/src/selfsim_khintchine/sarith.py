"""S-arithmetic matrix tools: p-adic norms, Cartan exponents, gamma elements.

An :class:`SElement` is a pair of rational matrices (real component, finite
component) taken modulo scalars on each side.  The finite component stands
for the diagonal image in every p-adic place p in S at once, since a
rational matrix has a well defined p-adic norm for each prime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, EnumerationLimitError
from .ifs import RationalIfs, Word, compose_word
from .rational import (
    RationalMatrix,
    format_rational,
    is_prime,
    lcm,
    prime_factors,
    to_fraction,
    unipotent,
    valuation,
)

MEMBERSHIP_CAP = 10**6


def _check_prime(p: int) -> int:
    if not is_prime(p):
        raise DomainError(f"{p} is not a prime")
    return int(p)


def padic_valuation(x, p: int):
    """v_p(x), with math.inf for x = 0."""
    _check_prime(p)
    x = to_fraction(x)
    return math.inf if x == 0 else valuation(x, p)


def padic_norm(obj, p: int) -> Fraction:
    """|x|_p = p^{-v_p(x)} for rationals; entrywise max for matrices.

    Zero has norm 0 (its valuation is the infinite sentinel, see
    :func:`padic_valuation`).  A zero matrix is rejected.
    """
    _check_prime(p)
    if isinstance(obj, RationalMatrix):
        vals = [v for v in obj.entries() if v != 0]
        if not vals:
            raise DomainError("the zero matrix has no p-adic norm here")
        return max(padic_norm(v, p) for v in vals)
    x = to_fraction(obj)
    if x == 0:
        return Fraction(0)
    return Fraction(p) ** (-valuation(x, p))


# -- Cartan (KAK) exponents --------------------------------------------------

@dataclass(frozen=True)
class KakExponents:
    """n_1 >= ... >= n_{d+1} = 0 with M in K diag(p^{-n_i}) K (up to scalar)."""

    exps: tuple

    def __post_init__(self):
        e = tuple(int(v) for v in self.exps)
        if list(e) != sorted(e, reverse=True) or (e and e[-1] != 0):
            raise DomainError("KAK exponents must be non-increasing with minimum 0")
        object.__setattr__(self, "exps", e)

    @property
    def top(self) -> int:
        return self.exps[0]

    @classmethod
    def from_valuations(cls, vals: Sequence[int]) -> "KakExponents":
        n = sorted((-v for v in vals), reverse=True)
        return cls(tuple(v - n[-1] for v in n))


def _integral_scaling(m: RationalMatrix):
    den = reduce(lcm, (v.denominator for v in m.entries()), 1)
    return [[int(v * den) for v in row] for row in m.rows], den


def elementary_valuations_snf(m: RationalMatrix, p: int) -> list[int]:
    """v_p of the elementary divisors of m, via the Smith normal form over Z."""
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import smith_normal_form

    ints, den = _integral_scaling(m)
    snf = smith_normal_form(Matrix(ints), domain=ZZ)
    k = m.shape[0]
    diag = [int(snf[i, i]) for i in range(k)]
    if any(v == 0 for v in diag):
        raise DomainError("matrix is singular")
    vden = valuation(den, p)
    return [valuation(v, p) - vden for v in diag]


def elementary_valuations_pivot(m: RationalMatrix, p: int) -> list[int]:
    """Same valuations by p-adic full pivoting.

    At each step the entry of least valuation in the remaining block is
    moved to the pivot position; all elimination multipliers then have
    nonnegative valuation, so the row and column operations lie in GL(Z_p).
    """
    a = [list(r) for r in m.rows]
    k = len(a)
    out = []
    for c in range(k):
        best = None
        for i in range(c, k):
            for j in range(c, k):
                if a[i][j] != 0:
                    v = valuation(a[i][j], p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
        if best is None:
            raise DomainError("matrix is singular")
        v, i, j = best
        a[c], a[i] = a[i], a[c]
        for row in a:
            row[c], row[j] = row[j], row[c]
        piv = a[c][c]
        for i in range(c + 1, k):
            f = a[i][c] / piv
            if f:
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
        for j in range(c + 1, k):
            f = a[c][j] / piv
            if f:
                for row in a:
                    row[j] -= f * row[c]
        out.append(v)
    return out


def kak_exponents(m: RationalMatrix, p: int, method: str = "snf") -> KakExponents:
    """Normalised p-adic Cartan exponents of an invertible rational matrix."""
    _check_prime(p)
    if m.shape[0] != m.shape[1]:
        raise DomainError("KAK exponents need a square matrix")
    if m.det() == 0:
        raise DomainError("matrix is singular")
    if method == "snf":
        vals = elementary_valuations_snf(m, p)
    elif method == "pivot":
        vals = elementary_valuations_pivot(m, p)
    else:
        raise DomainError(f"unknown method {method!r}")
    return KakExponents.from_valuations(vals)


def _trace_zero_basis(k: int) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of the trace-zero k x k matrices."""
    basis = []
    for i in range(k):
        for j in range(k):
            if i != j:
                e = np.zeros((k, k))
                e[i, j] = 1.0
                basis.append(e)
    for j in range(1, k):
        h = np.zeros((k, k))
        h[:j, :j] = np.eye(j)
        h[j, j] = -j
        basis.append(h / math.sqrt(j * (j + 1)))
    return basis


def adjoint_norm(m: RationalMatrix, place) -> float | Fraction:
    """Operator norm of X -> m X m^{-1} on trace-zero matrices.

    At a prime p this is p^{n_1} (exact); at ``"inf"`` it is the largest
    singular value of the adjoint map in an orthonormal basis.
    """
    if place in ("inf", "infinity", math.inf):
        if m.det() == 0:
            raise DomainError("matrix is singular")
        a = m.to_numpy()
        ainv = m.inverse().to_numpy()
        basis = _trace_zero_basis(a.shape[0])
        cols = [(a @ e @ ainv) for e in basis]
        mat = np.array([[float(np.sum(b * c)) for c in cols] for b in basis])
        return float(np.linalg.svd(mat, compute_uv=False)[0])
    p = _check_prime(int(place))
    return Fraction(p) ** kak_exponents(m, p).top


# -- S-elements -------------------------------------------------------------

@dataclass(frozen=True)
class SElement:
    """(real component, finite component) modulo scalars, with prime set S."""

    arch: RationalMatrix
    fin: RationalMatrix
    primes: frozenset = field(default=frozenset())

    def __post_init__(self):
        if self.arch.shape != self.fin.shape or self.arch.shape[0] != self.arch.shape[1]:
            raise DomainError("components must be square of the same size")
        if self.arch.det() == 0 or self.fin.det() == 0:
            raise DomainError("components must be invertible")
        object.__setattr__(self, "primes", frozenset(self.primes))

    @classmethod
    def identity(cls, k: int, primes=()) -> "SElement":
        one = RationalMatrix.identity(k)
        return cls(one, one, frozenset(primes))

    @classmethod
    def diagonal(cls, m: RationalMatrix, primes=()) -> "SElement":
        """The diagonal embedding of a single rational matrix."""
        return cls(m, m, frozenset(primes))

    def __matmul__(self, other: "SElement") -> "SElement":
        return SElement(self.arch @ other.arch, self.fin @ other.fin, self.primes | other.primes)

    def inverse(self) -> "SElement":
        return SElement(self.arch.inverse(), self.fin.inverse(), self.primes)

    def normal_form(self):
        return self.arch.projective_normal_form(), self.fin.projective_normal_form()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SElement):
            return NotImplemented
        return self.normal_form() == other.normal_form()

    def __hash__(self) -> int:
        return hash(self.normal_form())

    def to_text(self) -> str:
        def rows(m):
            return " ; ".join(" ".join(format_rational(v) for v in r) for r in m.rows)

        return f"arch: {rows(self.arch)}\nfin: {rows(self.fin)}"

    @classmethod
    def from_text(cls, text: str, primes=()) -> "SElement":
        parts = {}
        for line in text.strip().splitlines():
            key, _, body = line.partition(":")
            parts[key.strip()] = RationalMatrix(
                [r.split() for r in body.split(";")])
        if set(parts) != {"arch", "fin"}:
            raise DomainError("expected 'arch:' and 'fin:' lines")
        return cls(parts["arch"], parts["fin"], frozenset(primes))


def _affine_block(rho, rot: RationalMatrix, shift) -> RationalMatrix:
    d = rot.shape[0]
    rows = [[rho * rot[i, j] for j in range(d)] + [to_fraction(shift[i])] for i in range(d)]
    rows.append([Fraction(0)] * d + [Fraction(1)])
    return RationalMatrix(rows)


def gamma_element(ifs: RationalIfs, w: Word) -> SElement:
    """gamma_w: real part diag(rho_w O_w, 1), finite part [[rho_w O_w, -b_w], [0, 1]]."""
    f = compose_word(ifs, w)
    d = ifs.dim
    arch = _affine_block(f.rho, f.rot, [0] * d)
    fin = _affine_block(f.rho, f.rot, [-v for v in f.shift])
    return SElement(arch, fin, ifs.primes)


def gamma_tilde(ifs: RationalIfs, w: Word) -> SElement:
    """u(-b_w, 0) gamma_w: the diagonal image of [[rho_w O_w, -b_w], [0, 1]]."""
    g = gamma_element(ifs, w)
    return SElement(g.fin, g.fin, g.primes)


def verify_key_identity(ifs: RationalIfs, w: Word, x) -> bool:
    """gamma_w u(x, 0) gamma_w^{-1} u(b_w, 0) == u(f_w(x), 0), projectively."""
    xs = tuple(to_fraction(v) for v in (x if isinstance(x, (tuple, list)) else (x,)))
    if len(xs) != ifs.dim:
        raise DomainError("x must have one coordinate per dimension")
    f = compose_word(ifs, w)
    g = gamma_element(ifs, w)
    k = ifs.dim + 1
    one = RationalMatrix.identity(k)
    ux = SElement(unipotent(xs), one)
    ub = SElement(unipotent(f.shift), one)
    lhs = g @ ux @ g.inverse() @ ub
    rhs = SElement(unipotent(f(xs)), one)
    return lhs == rhs


# Projective checks on integer representatives.  Clearing denominators and
# dividing by the content gives the same normal form as the Fraction route
# but keeps every product in machine-friendly integers.

def _int_rep(m: RationalMatrix) -> tuple:
    den = reduce(lcm, (v.denominator for v in m.entries()), 1)
    return tuple(tuple(int(v * den) for v in r) for r in m.rows)


def _imul(a: tuple, b: tuple) -> tuple:
    cols = tuple(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(r, c)) for c in cols) for r in a)


def _inormal(a: tuple) -> tuple:
    g = reduce(math.gcd, (abs(v) for r in a for v in r), 0)
    if g == 0:
        raise DomainError("zero matrix has no projective class")
    first = next(v for r in a for v in r if v != 0)
    s = g if first > 0 else -g
    return tuple(tuple(v // s for v in r) for r in a)


def _idet(a: tuple) -> int:
    """Bareiss fraction-free determinant."""
    m = [list(r) for r in a]
    n = len(m)
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _strip_primes(n: int, primes) -> int:
    n = abs(n)
    for p in primes:
        while n and n % p == 0:
            n //= p
    return n


def _int_unipotent(ys) -> tuple:
    """Integer representative of u(y)."""
    den = reduce(lcm, (y.denominator for y in ys), 1)
    k = len(ys) + 1
    rows = [[den if i == j else 0 for j in range(k)] for i in range(k)]
    for i, y in enumerate(ys):
        rows[i][k - 1] = y.numerator * (den // y.denominator)
    return tuple(tuple(r) for r in rows)


def verify_key_identity_points(ifs: RationalIfs, w: Word, points) -> list[bool]:
    """verify_key_identity for many points, sharing the word-dependent products."""
    f = compose_word(ifs, w)
    g = gamma_element(ifs, w)
    k = ifs.dim + 1
    left = _int_rep(g.arch)
    right = _imul(_int_rep(g.arch.inverse()), _int_unipotent(f.shift))
    fin_ok = _inormal(_imul(_int_rep(g.fin), _int_rep(g.fin.inverse()))) == \
        _inormal(_int_rep(RationalMatrix.identity(k)))
    out = []
    for x in points:
        xs = tuple(to_fraction(v) for v in (x if isinstance(x, (tuple, list)) else (x,)))
        if len(xs) != ifs.dim:
            raise DomainError("x must have one coordinate per dimension")
        lhs = _inormal(_imul(_imul(left, _int_unipotent(xs)), right))
        out.append(fin_ok and lhs == _inormal(_int_unipotent(f(xs))))
    return out


def _is_s_unit(n: int, primes: frozenset) -> bool:
    return n != 0 and (abs(n) == 1 or prime_factors(n) <= set(primes))


def s_integral_representative(m: RationalMatrix, primes: frozenset):
    """Integer representative of the projective class of m if its determinant
    is an S-unit (then it lies in GL(Z[S^-1])), else None."""
    rep = RationalMatrix(m.projective_normal_form())
    return rep if _is_s_unit(int(rep.det()), primes) else None


@dataclass
class MembershipReport:
    depth: int
    words_checked: int
    membership_ok: bool
    failures: list
    injective: bool
    collisions: list


def lattice_membership_and_freeness(ifs: RationalIfs, n: int) -> MembershipReport:
    """Check gamma-tilde_w in Gamma_S for |w| <= n and injectivity on words of length n.

    The finite component is built as a product of single-letter matrices
    along the word tree; the real component is u(-b_w) diag(rho_w O_w, 1)
    from the composed similarity.  Membership asks that both agree
    projectively and that the integer normal form has an S-unit determinant.
    """
    if n < 0:
        raise DomainError("depth must be nonnegative")
    total = sum(ifs.size**k for k in range(n + 1))
    if ifs.size**n > MEMBERSHIP_CAP:
        raise EnumerationLimitError(f"{ifs.size}^{n} words exceed the cap {MEMBERSHIP_CAP}")
    d = ifs.dim
    primes = sorted(ifs.primes)
    letters = [_int_rep(gamma_element(ifs, (a,)).fin) for a in ifs.alphabet]
    failures, seen, collisions = [], {}, []
    maps = [ifs.map_of(a) for a in ifs.alphabet]
    level = {(): (_inormal(_int_rep(RationalMatrix.identity(d + 1))), compose_word(ifs, ()))}
    for k in range(n + 1):
        if k:
            level = {w + (a,): (_inormal(_imul(m, letters[i])), f.compose(maps[i]))
                     for w, (m, f) in level.items() for i, a in enumerate(ifs.alphabet)}
        for w, (fin, f) in level.items():
            arch = _inormal(_imul(_int_rep(unipotent([-v for v in f.shift])),
                                  _int_rep(_affine_block(f.rho, f.rot, [0] * d))))
            if arch != fin or _strip_primes(_idet(fin), primes) != 1:
                failures.append(w)
            if k == n:
                if fin in seen:
                    collisions.append((seen[fin], w))
                else:
                    seen[fin] = w
    return MembershipReport(n, total, not failures, failures, not collisions, collisions)


# -- congruence index ---------------------------------------------------------

def sl_order(d: int, p: int, nu: int) -> int:
    """|SL_{d+1}(Z/p^nu Z)| = p^{(d^2+2d) nu} prod_{k=2}^{d+1} (1 - p^{-k})."""
    _check_prime(p)
    if nu < 0:
        raise DomainError("nu must be nonnegative")
    if d < 1:
        raise DomainError("d must be positive")
    if nu == 0:
        return 1
    val = Fraction(p) ** ((d * d + 2 * d) * nu)
    for k in range(2, d + 2):
        val *= 1 - Fraction(1, p**k)
    assert val.denominator == 1
    return int(val)


@dataclass(frozen=True)
class IndexBound:
    value: object
    A: object
    L: object
    per_prime: dict
    note: str = "explicit factor, valid up to an absolute constant"


def index_exponents(ifs: RationalIfs):
    """(A, L, per-prime (c_p, A_p, L_p)).

    c_p is the largest adjoint norm of a single-letter finite component.
    L_p = log c_p / log(1/rho_min), A_p = log c_p / log(1/rho_max); with
    D = d^2 + 2d, L = D sum L_p and A = 2 D sum A_p.  Missing-digit systems
    give exactly A = 6, L = 3 and are returned as integers.
    """
    d = ifs.dim
    D = d * d + 2 * d
    per = {}
    for p in sorted(ifs.primes):
        c = max(adjoint_norm(gamma_element(ifs, (a,)).fin, p) for a in ifs.alphabet)
        lc = math.log(c)
        per[p] = (c, lc / -math.log(ifs.rho_min), lc / -math.log(ifs.rho_max))
    if ifs.is_missing_digit():
        return 6, 3, per
    L = D * math.fsum(v[1] for v in per.values())
    A = 2 * D * math.fsum(v[2] for v in per.values())
    return A, L, per


def index_bound(ifs: RationalIfs, w: Word, n: int) -> IndexBound:
    """rho_w^{-A} rho_min^{-n L}; exact rational when A and L are integers."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    A, L, per = index_exponents(ifs)
    rho_w = compose_word(ifs, w).rho
    if isinstance(A, int) and isinstance(L, int):
        value = rho_w ** (-A) * ifs.rho_min ** (-n * L)
    else:
        value = float(rho_w) ** (-A) * float(ifs.rho_min) ** (-n * L)
    return IndexBound(value, A, L, per)


def gamma_norm_product(ifs: RationalIfs, w: Word) -> Fraction:
    """prod over p in S of the adjoint norm of the finite component of gamma_w."""
    fin = gamma_element(ifs, w).fin
    return reduce(lambda acc, p: acc * adjoint_norm(fin, p), sorted(ifs.primes), Fraction(1))


# -- modular character and shells -------------------------------------------------

def v_exponent(d: int) -> int:
    """v(d) = (floor(d/2) + 1) ceil(d/2)."""
    return (d // 2 + 1) * ((d + 1) // 2)


def shell_index_set(n: int, d: int) -> list[tuple]:
    """Tuples n = n_1 >= n_2 >= ... >= n_d >= 0 (the last exponent n_{d+1} = 0 is implicit)."""
    if n < 0 or d < 1:
        raise DomainError("need n >= 0 and d >= 1")

    def rec(prefix, remaining):
        if remaining == 0:
            yield tuple(prefix)
            return
        for v in range(prefix[-1], -1, -1):
            yield from rec(prefix + [v], remaining - 1)

    return list(rec([n], d - 1))


def modular_character(exps: Sequence[int], p: int, d: int) -> int:
    """delta_B(diag(p^{-n_i})) = p^{sum n_i (d + 2 - 2i)} over i = 1..d+1."""
    full = list(exps) + [0] * (d + 1 - len(exps))
    e = sum(v * (d + 2 - 2 * i) for i, v in enumerate(full, 1))
    return Fraction(p) ** e


@dataclass(frozen=True)
class ShellReport:
    index_set: tuple
    deltas: tuple
    total: object
    bracket: tuple

    @property
    def in_bracket(self) -> bool:
        return self.bracket[0] <= self.total <= self.bracket[1]


def shell_and_modular(p: int, n: int, d: int) -> ShellReport:
    _check_prime(p)
    idx = shell_index_set(n, d)
    assert len(idx) == comb(n + d - 1, d - 1)
    deltas = tuple(modular_character(e, p, d) for e in idx)
    total = sum(deltas, Fraction(0))
    base = Fraction(p) ** (v_exponent(d) * n)
    return ShellReport(tuple(idx), deltas, total, (base, len(idx) * base))
