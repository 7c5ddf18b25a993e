"""Unimodular lattices, shortest vectors, cusp sets and Siegel counts.

Lattices are given by a square basis matrix whose columns are the basis
vectors.  Exact (RationalMatrix) bases are handled with Fraction arithmetic
throughout; float bases use the same algorithms in double precision, and
batches of float bases go through numba kernels.

The norm on R^{d+1} is max(|x_1..x_d|, |x_{d+1}|) for a base norm on R^d
(max norm by default).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import zeta as _zeta

from ._accel import jit
from .errors import DomainError, UnsupportedDimensionError
from .rational import RationalMatrix, to_fraction, unipotent
from .transform import ApproxFunction, dyadic_profile

MAX_RANK = 4


@dataclass(frozen=True)
class NormSpec:
    """Norm max(base(x_1..x_d), |x_{d+1}|) on R^{d+1}."""

    d: int
    base: str = "max"

    def __post_init__(self):
        if self.base not in ("max", "euclidean"):
            raise DomainError("base norm must be 'max' or 'euclidean'")
        if self.d < 1:
            raise DomainError("d must be positive")

    def __call__(self, v):
        head, last = v[: self.d], v[self.d]
        if self.base == "max":
            return max(max(abs(a) for a in head), abs(last))
        s = sum(a * a for a in head)
        return max(math.sqrt(float(s)), abs(float(last)))

    @property
    def exact(self) -> bool:
        """Whether norms of rational vectors are rational."""
        return self.base == "max" or self.d == 1

    def unit_ball_volume(self) -> float:
        """Lebesgue volume of the unit ball in R^{d+1}."""
        if self.base == "max" or self.d == 1:
            return 2.0 ** (self.d + 1)
        ball_d = math.pi ** (self.d / 2) / _gamma_fn(self.d / 2 + 1)
        return 2.0 * ball_d


# -- translation matrices ---------------------------------------------------

def flow_matrix(d: int, t: float | None = None, scale=None):
    """g_t = diag(e^{t/d} Id_d, e^{-t}).

    Pass ``scale = e^{t/d}`` as a rational to get an exact RationalMatrix.
    """
    if scale is not None:
        s = to_fraction(scale)
        if s <= 0:
            raise DomainError("scale must be positive")
        return RationalMatrix.diag([s] * d + [s ** (-d)])
    if t is None:
        raise DomainError("give t or an exact scale")
    return np.diag([math.exp(t / d)] * d + [math.exp(-t)])


def horosphere_matrix(x):
    """u(x) with x in the last column; exact for rational x."""
    xs = list(x) if isinstance(x, (tuple, list, np.ndarray)) else [x]
    if all(isinstance(v, (int, Fraction)) for v in xs):
        return unipotent(xs)
    d = len(xs)
    m = np.eye(d + 1)
    m[:d, d] = np.asarray(xs, dtype=float)
    return m


def pgl_diag(t, d: int):
    """a(t) = diag(t Id_d, 1)."""
    if isinstance(t, (int, Fraction)):
        return RationalMatrix.diag([to_fraction(t)] * d + [1])
    return np.diag([float(t)] * d + [1.0])


def translate_matrix(kind: str, d: int, param=None, scale=None):
    """Dispatch on ``kind`` in {flow, horosphere, diag}."""
    if kind == "flow":
        return flow_matrix(d, param, scale)
    if kind == "horosphere":
        return horosphere_matrix(param)
    if kind == "diag":
        return pgl_diag(param, d)
    raise DomainError(f"unknown translate kind {kind!r}")


# -- reduction and enumeration (scalar path) ---------------------------------

def _columns(basis):
    if isinstance(basis, RationalMatrix):
        n, m = basis.shape
        if n != m:
            raise DomainError("basis must be square")
        return [list(c) for c in zip(*basis.rows)], True
    a = np.asarray(basis, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("basis must be square")
    return [list(map(float, a[:, j])) for j in range(a.shape[1])], False


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _gram_schmidt(b):
    n = len(b)
    bstar, mu = [], [[0] * n for _ in range(n)]
    for i in range(n):
        v = list(b[i])
        for j in range(i):
            mu[i][j] = _dot(b[i], bstar[j]) / _dot(bstar[j], bstar[j])
            v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
        bstar.append(v)
    return bstar, mu


def lll_reduce(cols, delta=Fraction(3, 4)):
    """LLL-reduce a list of basis columns (Euclidean), exact for Fractions."""
    b = [list(c) for c in cols]
    n = len(b)
    if n <= 1:
        return b
    exact = isinstance(b[0][0], Fraction)
    if not exact:
        delta = float(delta)
    k = 1
    bstar, mu = _gram_schmidt(b)
    guard = 0
    while k < n:
        guard += 1
        if guard > 100000:  # pragma: no cover - float pathologies only
            break
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                bstar, mu = _gram_schmidt(b)
        lhs = _dot(bstar[k], bstar[k])
        rhs = (delta - mu[k][k - 1] ** 2) * _dot(bstar[k - 1], bstar[k - 1])
        if lhs >= rhs:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            bstar, mu = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b


def _inverse_rows(cols, exact):
    n = len(cols)
    if exact:
        m = RationalMatrix([list(r) for r in zip(*cols)])
        if m.det() == 0:
            raise DomainError("basis is singular")
        return [list(r) for r in m.inverse().rows]
    a = np.array(cols, dtype=float).T
    if abs(np.linalg.det(a)) < 1e-300 or not np.all(np.isfinite(a)):
        raise DomainError("basis is singular")
    return np.linalg.inv(a).tolist()


def coefficient_bounds(cols, halfwidths, exact):
    """Integer bounds |c_i| <= sum_j |Binv_ij| h_j for vectors in the box."""
    inv = _inverse_rows(cols, exact)
    out = []
    for row in inv:
        s = sum(abs(a) * h for a, h in zip(row, halfwidths))
        out.append(int(math.floor(s)) if exact else int(math.floor(float(s) * (1 + 1e-12) + 1e-12)))
    return out


def _combine(cols, c):
    n = len(cols)
    return [sum(c[j] * cols[j][i] for j in range(n)) for i in range(n)]


@dataclass(frozen=True)
class ShortestVector:
    vector: tuple
    length: object
    d1: object
    coefficients: tuple


def shortest_vector_and_d1(basis, norm: NormSpec | None = None) -> ShortestVector:
    """Exact shortest nonzero vector of the lattice spanned by the columns.

    LLL-reduces the basis, then enumerates every coefficient vector allowed
    by the inverse-basis bound at the length of the best reduced column.
    """
    cols, exact = _columns(basis)
    k = len(cols)
    if k > MAX_RANK:
        raise UnsupportedDimensionError("lattices of rank at most 4 are supported")
    if norm is None:
        norm = NormSpec(k - 1)
    if norm.d != k - 1:
        raise DomainError("norm dimension does not match the basis")
    exact = exact and norm.exact
    if not exact:
        cols = [[float(v) for v in c] for c in cols]
    _inverse_rows(cols, exact)  # singularity check
    red = lll_reduce(cols)
    best = min(red, key=norm)
    radius = norm(best)
    bounds = coefficient_bounds(red, [radius] * k, exact)
    best_len, best_vec, best_c = radius, best, None
    for c in itertools.product(*(range(-b, b + 1) for b in bounds)):
        if not any(c):
            continue
        v = _combine(red, c)
        ln = norm(v)
        if ln < best_len:
            best_len, best_vec = ln, v
    vec = _canonical_sign(best_vec)
    coeffs = _solve_coefficients(cols, vec, exact)
    d1 = (1 / best_len) if exact else 1.0 / float(best_len)
    return ShortestVector(tuple(vec), best_len, d1, coeffs)


def _canonical_sign(v):
    last = next((a for a in reversed(v) if a != 0), 0)
    return [-a for a in v] if last < 0 else list(v)


def _solve_coefficients(cols, v, exact):
    inv = _inverse_rows(cols, exact)
    c = [sum(a * b for a, b in zip(row, v)) for row in inv]
    return tuple(int(round(x)) for x in c)


def lattice_points_in_box(basis, halfwidths, primitive_only=True):
    """All (primitive) lattice vectors in the open box |v_j| < h_j.

    Returns a list of (vector, coefficient_gcd) pairs; the enumeration runs
    over an LLL-reduced basis, whose coefficient gcds match the original.
    """
    cols, exact = _columns(basis)
    k = len(cols)
    if k > MAX_RANK:
        raise UnsupportedDimensionError("lattices of rank at most 4 are supported")
    hs = [to_fraction(h) if exact else float(h) for h in halfwidths]
    if len(hs) != k:
        raise DomainError("box needs one half-width per coordinate")
    if any(not math.isfinite(float(h)) for h in hs):
        raise DomainError("box must be bounded")
    if any(h <= 0 for h in hs):
        return []
    _inverse_rows(cols, exact)
    red = lll_reduce(cols)
    bounds = coefficient_bounds(red, hs, exact)
    out = []
    for c in itertools.product(*(range(-b, b + 1) for b in bounds)):
        if not any(c):
            continue
        g = reduce(math.gcd, (abs(x) for x in c))
        if primitive_only and g != 1:
            continue
        v = _combine(red, c)
        if all(abs(a) < h for a, h in zip(v, hs)):
            out.append((tuple(v), g))
    return out


def siegel_count(basis, halfwidths) -> int:
    """Number of primitive lattice vectors in the centred open box."""
    return len(lattice_points_in_box(basis, halfwidths, primitive_only=True))


# -- cusp measure -------------------------------------------------------------

def cusp_constant(norm: NormSpec) -> float:
    """C_d = c_{d+1} / (2 zeta(d+1))."""
    return norm.unit_ball_volume() / (2.0 * float(_zeta(norm.d + 1)))


def cusp_haar_bracket(eps: float, norm: NormSpec, c_prime: float = 0.0) -> tuple[float, float]:
    """(C_d eps^{d+1} - C'_d eps^{2(d+1)}, C_d eps^{d+1}) for 0 < eps < 1."""
    eps = float(eps)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if c_prime < 0:
        raise DomainError("C'_d must be nonnegative")
    c = cusp_constant(norm)
    e = eps ** (norm.d + 1)
    return c * e - c_prime * e * e, c * e


def in_cusp(basis, eps, norm: NormSpec | None = None) -> bool:
    """Whether d_1 > 1/eps, i.e. some nonzero vector is shorter than eps."""
    sv = shortest_vector_and_d1(basis, norm)
    return sv.length < eps


# -- A_n* membership -------------------------------------------------------

def _two_product(a, b):
    """Exact a*b = hi + lo for doubles (Dekker/Veltkamp)."""
    hi = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    lo = ((ah * bh - hi) + ah * bl + al * bh) + al * bl
    return hi, lo


def _residual(q, x, p):
    """q*x - p with one final rounding (q, p integers below 2^53)."""
    hi, lo = _two_product(float(q), x)
    return (hi - float(p)) + lo


_residual_jit = jit(_residual)
_two_product_jit = jit(_two_product)


def _exact_thresholds(xf, delta):
    """Per coordinate (a, b, K): |q a/b - p| < delta  <=>  |q a - p b| <= K."""
    out = []
    dl = Fraction(delta)
    for x in xf:
        a, b = x.numerator, x.denominator
        t = dl * b
        out.append((a, b, -((-t.numerator) // t.denominator) - 1))
    return out


def _exact_hit(q, p, thr):
    return all(abs(q * a - pj * b) <= k for pj, (a, b, k) in zip(p, thr))


def _coerce_point(x, d):
    """Float coordinates plus exact Fractions when x is rational."""
    vals = list(x) if isinstance(x, (tuple, list, np.ndarray)) else [x]
    if len(vals) != d:
        raise DomainError(f"x must have {d} coordinates")
    exact = None
    if all(isinstance(v, (int, Fraction, np.integer)) for v in vals):
        exact = [Fraction(int(v)) if not isinstance(v, Fraction) else v for v in vals]
    elif all(isinstance(v, (int, Fraction, str, np.integer)) for v in vals):
        exact = [to_fraction(v) for v in vals]
    xv = np.array([float(v) for v in (exact if exact is not None else vals)], dtype=float)
    if not np.all(np.isfinite(xv)):
        raise DomainError("x must be finite")
    return xv, exact


def _an_star_direct(xv, xf, psi: ApproxFunction, n: int):
    """Scan q in [2^{n-1}, 2^n) upward; for each q try every p near q x."""
    delta = psi(2.0**n)
    d = xv.size
    thr = _exact_thresholds(xf, delta) if xf is not None else None
    for q in range(2 ** (n - 1), 2**n):
        ranges = []
        for j in range(d):
            if thr is not None:
                a, b, k = thr[j]
                lo, hi = -((k - q * a) // b), (q * a + k) // b
            else:
                c = q * xv[j]
                lo, hi = int(math.floor(c - delta)) - 1, int(math.ceil(c + delta)) + 1
            if lo > hi:
                break
            ranges.append(range(lo, hi + 1))
        else:
            for p in itertools.product(*ranges):
                if thr is not None:
                    ok = _exact_hit(q, p, thr)
                else:
                    ok = all(abs(_residual(q, xv[j], p[j])) < delta for j in range(d))
                if ok and reduce(math.gcd, [abs(v) for v in p], q) == 1:
                    return (p[0] if d == 1 else tuple(p)), q
    return None


def an_star_lattice_basis(xs, psi: ApproxFunction, n: int):
    """Profile data and the basis of g_{t_n} u(x) Z^{d+1} as floats.

    e^{t_n/d} and e^{-t_n} are assembled as (2^n e^{r})^{1/d} and
    e^{-r} 2^{-n} so that powers of two stay exact.
    """
    prof = dyadic_profile(psi, n)
    d = psi.d
    xv = np.asarray(xs, dtype=float).reshape(-1)
    expand = (2.0**n * math.exp(prof.r)) ** (1.0 / d)
    box = math.exp(-prof.r)
    basis = np.zeros((d + 1, d + 1))
    basis[:d, :d] = expand * np.eye(d)
    basis[:d, d] = expand * xv
    basis[d, d] = box * 2.0 ** (-n)
    return prof, expand, box, basis


def _an_star_lattice(xv, xf, psi: ApproxFunction, n: int):
    """Primitive vectors of g_{t_n}u(x)Z^{d+1} with |w_head| < e^{-r} and
    e^{-r}/2 <= |w_last| < e^{-r}.

    The last-coordinate window is exactly 2^{n-1} <= q < 2^n, so it is
    tested on the integer q.  For rational x the head condition is
    confirmed in exact arithmetic; the enumeration box is slightly
    inflated so that no boundary candidate is lost.
    """
    d = psi.d
    prof, expand, box, _ = an_star_lattice_basis(xv, psi, n)
    cols = _reduce_tracked(xv, expand, box * 2.0 ** (-n), d)
    hs = [box * (1 + 1e-9)] * (d + 1)
    bounds = coefficient_bounds([c[1] for c in cols], hs, False)
    thr = _exact_thresholds(xf, psi(2.0**n)) if xf is not None else None
    qlo, qhi = 2 ** (n - 1), 2**n
    best = None
    for c in itertools.product(*(range(-b, b + 1) for b in bounds)):
        if not any(c):
            continue
        coef = [sum(c[j] * cols[j][0][i] for j in range(d + 1)) for i in range(d + 1)]
        p, q = [-v for v in coef[:d]], coef[d]
        if q < 0:
            p, q = [-v for v in p], -q
        if not qlo <= q < qhi:
            continue
        if reduce(math.gcd, (abs(v) for v in coef)) != 1:
            continue
        if thr is not None:
            ok = _exact_hit(q, p, thr)
        else:
            ok = all(abs(expand * _residual(q, xv[j], p[j])) < box for j in range(d))
        if ok:
            key = (q, tuple(p))
            if best is None or key < best:
                best = key
    if best is None:
        return None
    q, p = best
    return (p[0] if d == 1 else tuple(p)), q


def _reduce_tracked(xv, expand, contract, d):
    """LLL on g u(x) Z^{d+1} keeping integer coefficient columns.

    Coordinates are recomputed from the integer coefficients after every
    change, with accurate residuals q x_j - p_j, so cancellation in the
    float basis never accumulates.
    """

    def coords(c):
        q = c[d]
        return [expand * _residual(q, xv[j], -c[j]) for j in range(d)] + [contract * q]

    coefs = [[int(i == j) for i in range(d + 1)] for j in range(d + 1)]
    k = 1
    guard = 0
    while k < d + 1 and guard < 10000:
        guard += 1
        b = [coords(c) for c in coefs]
        bstar, mu = _gram_schmidt(b)
        for j in range(k - 1, -1, -1):
            qj = round(mu[k][j])
            if qj:
                coefs[k] = [x - qj * y for x, y in zip(coefs[k], coefs[j])]
                b = [coords(c) for c in coefs]
                bstar, mu = _gram_schmidt(b)
        if _dot(bstar[k], bstar[k]) >= (0.75 - mu[k][k - 1] ** 2) * _dot(bstar[k - 1], bstar[k - 1]):
            k += 1
        else:
            coefs[k], coefs[k - 1] = coefs[k - 1], coefs[k]
            k = max(k - 1, 1)
    return [(c, coords(c)) for c in coefs]


def an_star_test(x, psi: ApproxFunction, n: int, mode: str = "direct"):
    """Witness (p, q) of x in A_n*, or None.

    A_n* asks for primitive (p, q) with 2^{n-1} <= q < 2^n and
    |q x - p| < psi(2^n).  ``direct`` scans q; ``lattice`` enumerates
    primitive vectors of g_{t_n} u(x) Z^{d+1} in the box from the dyadic
    profile.  Both return the witness with the smallest q (then smallest p).
    Rational x (ints, Fractions or "a/b" strings) is decided exactly.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if psi.d > 3:
        raise UnsupportedDimensionError("A_n* tests support d <= 3")
    xv, xf = _coerce_point(x, psi.d)
    if mode == "direct":
        return _an_star_direct(xv, xf, psi, n)
    if mode == "lattice":
        return _an_star_lattice(xv, xf, psi, n)
    raise DomainError(f"unknown mode {mode!r}")


# -- batched float kernels ----------------------------------------------------

@jit
def _gso_float(b, bstar, mu, bb):
    k = b.shape[0]
    for i in range(k):
        for r in range(k):
            bstar[i, r] = b[i, r]
        for j in range(i):
            s = 0.0
            for r in range(k):
                s += b[i, r] * bstar[j, r]
            mu[i, j] = s / bb[j]
            for r in range(k):
                bstar[i, r] -= mu[i, j] * bstar[j, r]
        s = 0.0
        for r in range(k):
            s += bstar[i, r] * bstar[i, r]
        bb[i] = s


@jit
def _lll_rows(b):
    """In-place LLL of the rows of b (delta = 3/4)."""
    k = b.shape[0]
    bstar = np.empty_like(b)
    mu = np.zeros((k, k))
    bb = np.empty(k)
    _gso_float(b, bstar, mu, bb)
    i = 1
    guard = 0
    while i < k and guard < 10000:
        guard += 1
        for j in range(i - 1, -1, -1):
            q = np.rint(mu[i, j])
            if q != 0.0:
                for r in range(k):
                    b[i, r] -= q * b[j, r]
                _gso_float(b, bstar, mu, bb)
        if bb[i] >= (0.75 - mu[i, i - 1] ** 2) * bb[i - 1]:
            i += 1
        else:
            for r in range(k):
                tmp = b[i, r]
                b[i, r] = b[i - 1, r]
                b[i - 1, r] = tmp
            _gso_float(b, bstar, mu, bb)
            i = max(i - 1, 1)


@jit
def _inv_small(a):
    k = a.shape[0]
    m = np.zeros((k, 2 * k))
    for i in range(k):
        for j in range(k):
            m[i, j] = a[i, j]
        m[i, k + i] = 1.0
    for c in range(k):
        piv = c
        for r in range(c + 1, k):
            if abs(m[r, c]) > abs(m[piv, c]):
                piv = r
        if piv != c:
            for j in range(2 * k):
                tmp = m[c, j]
                m[c, j] = m[piv, j]
                m[piv, j] = tmp
        p = m[c, c]
        for j in range(2 * k):
            m[c, j] /= p
        for r in range(k):
            if r != c:
                f = m[r, c]
                if f != 0.0:
                    for j in range(2 * k):
                        m[r, j] -= f * m[c, j]
    return m[:, k:].copy()


@jit
def _norm_vec(v, d, euclid):
    last = abs(v[d])
    if euclid:
        s = 0.0
        for i in range(d):
            s += v[i] * v[i]
        head = np.sqrt(s)
    else:
        head = 0.0
        for i in range(d):
            if abs(v[i]) > head:
                head = abs(v[i])
    return head if head > last else last


@jit
def shortest_lengths(bases, euclid=False):
    """Shortest nonzero vector length for each basis in an (N, k, k) array.

    Columns are basis vectors.  Each lattice is LLL-reduced and the
    coefficient cube allowed by the reduced inverse is enumerated.
    """
    n = bases.shape[0]
    k = bases.shape[1]
    d = k - 1
    out = np.empty(n)
    rows = np.empty((k, k))
    v = np.empty(k)
    cnt = np.empty(k, dtype=np.int64)
    bnd = np.empty(k, dtype=np.int64)
    for s in range(n):
        for i in range(k):
            for j in range(k):
                rows[i, j] = bases[s, j, i]
        _lll_rows(rows)
        best = np.inf
        for i in range(k):
            ln = _norm_vec(rows[i], d, euclid)
            if ln < best:
                best = ln
        inv = _inv_small(rows.T.copy())
        for i in range(k):
            acc = 0.0
            for j in range(k):
                acc += abs(inv[i, j])
            bnd[i] = np.int64(np.floor(acc * best * (1.0 + 1e-12)))
            cnt[i] = -bnd[i]
        while True:
            nonzero = False
            for i in range(k):
                if cnt[i] != 0:
                    nonzero = True
            if nonzero:
                for r in range(k):
                    acc = 0.0
                    for i in range(k):
                        acc += cnt[i] * rows[i, r]
                    v[r] = acc
                ln = _norm_vec(v, d, euclid)
                if ln < best:
                    best = ln
            pos = 0
            while pos < k:
                if cnt[pos] < bnd[pos]:
                    cnt[pos] += 1
                    break
                cnt[pos] = -bnd[pos]
                pos += 1
            if pos == k:
                break
        out[s] = best
    return out


@jit
def _gcd(a, b):
    a = abs(a)
    b = abs(b)
    while b:
        a, b = b, a % b
    return a


@jit
def an_star_d1_batch(xs, ns, deltas, expands, boxes):
    """A_n* membership for many points and dyadic levels, d = 1.

    For each level index j (n = ns[j], psi(2^n) = deltas[j], e^{t_n} =
    expands[j], e^{-r(t_n)} = boxes[j]) and each point x, Gauss-reduce the
    lattice g_{t_n}u(x)Z^2 with integer bookkeeping and enumerate the
    reduced coefficient box.  Returns hit flags and the smallest-q witness.
    """
    m = xs.shape[0]
    L = ns.shape[0]
    hit = np.zeros((m, L), dtype=np.bool_)
    wp = np.zeros((m, L), dtype=np.int64)
    wq = np.zeros((m, L), dtype=np.int64)
    for j in range(L):
        n = ns[j]
        e = expands[j]
        box = boxes[j]
        scale_q = box * 2.0 ** (-n)
        qmax = np.int64(1) << n
        for i in range(m):
            x = xs[i]
            # basis coefficient pairs (p, q): lattice vector (e*(q x - p), scale_q*q)
            p1, q1 = np.int64(-1), np.int64(0)
            p2, q2 = np.int64(0), np.int64(1)
            for _ in range(400):
                hi, lo = _two_product_jit(float(q1), x)
                a1 = e * ((hi - float(p1)) + lo)
                b1 = scale_q * q1
                hi, lo = _two_product_jit(float(q2), x)
                a2 = e * ((hi - float(p2)) + lo)
                b2 = scale_q * q2
                n1 = a1 * a1 + b1 * b1
                n2 = a2 * a2 + b2 * b2
                if n2 < n1:
                    p1, q1, p2, q2 = p2, q2, p1, q1
                    a1, b1, a2, b2 = a2, b2, a1, b1
                    n1, n2 = n2, n1
                mu = np.rint((a1 * a2 + b1 * b2) / n1)
                if mu == 0.0:
                    break
                k = np.int64(mu)
                p2 -= k * p1
                q2 -= k * q1
            hi, lo = _two_product_jit(float(q1), x)
            a1 = e * ((hi - float(p1)) + lo)
            b1 = scale_q * q1
            hi, lo = _two_product_jit(float(q2), x)
            a2 = e * ((hi - float(p2)) + lo)
            b2 = scale_q * q2
            det = a1 * b2 - a2 * b1
            c1b = np.int64(np.floor(box * (abs(b2) + abs(a2)) / abs(det) * (1 + 1e-9) + 1e-9))
            c2b = np.int64(np.floor(box * (abs(b1) + abs(a1)) / abs(det) * (1 + 1e-9) + 1e-9))
            bestq = np.int64(-1)
            bestp = np.int64(0)
            for c1 in range(-c1b, c1b + 1):
                for c2 in range(-c2b, c2b + 1):
                    p = c1 * p1 + c2 * p2
                    q = c1 * q1 + c2 * q2
                    if q <= 0:
                        continue
                    if 2 * q < qmax or q >= qmax:
                        continue
                    if _gcd(p, q) != 1:
                        continue
                    hi, lo = _two_product_jit(float(q), x)
                    if abs(e * ((hi - float(p)) + lo)) < box:
                        if bestq < 0 or q < bestq or (q == bestq and p < bestp):
                            bestq = q
                            bestp = p
            if bestq > 0:
                hit[i, j] = True
                wp[i, j] = bestp
                wq[i, j] = bestq
    return hit, wp, wq


def an_star_levels(psi: ApproxFunction, ns: Sequence[int]):
    """Per-level arrays (ns, psi(2^n), e^{t_n}, e^{-r(t_n)}) for the batch kernel."""
    if psi.d != 1:
        raise UnsupportedDimensionError("the batch kernel handles d = 1")
    ns = np.asarray(list(ns), dtype=np.int64)
    if np.any(ns < 1) or np.any(ns > 60):
        raise DomainError("levels must lie in 1..60")
    deltas, expands, boxes = [], [], []
    for n in ns:
        prof = dyadic_profile(psi, int(n))
        deltas.append(psi(2.0 ** int(n)))
        expands.append(2.0 ** int(n) * math.exp(prof.r))
        boxes.append(math.exp(-prof.r))
    return ns, np.array(deltas), np.array(expands), np.array(boxes)


def an_star_batch(xs, psi: ApproxFunction, ns: Sequence[int]):
    """Hit matrix (points x levels) and witnesses via the lattice kernel, d = 1."""
    ns, deltas, expands, boxes = an_star_levels(psi, ns)
    xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1))
    return an_star_d1_batch(xs, ns, deltas, expands, boxes)
