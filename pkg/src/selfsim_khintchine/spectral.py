"""Explicit constants of the equidistribution argument.

Every constant is returned exactly (as a Fraction) whenever its defining
formula is rational in exact inputs; ``eps = 0`` is accepted everywhere as
the exact eps -> 0 limit.  Constants defined through logarithms are floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError
from .ifs import RationalIfs, moran_dimension
from .rational import is_prime, to_fraction

DEFAULT_EPS = 1e-6
STATED_DIMENSION_THRESHOLD = Fraction(9992, 10000)
BRUTE_FORCE_PAIR_CAP = 10**8


def _scalar(eps):
    """Exact Fraction for ints/Fractions/rational strings, else float."""
    if isinstance(eps, (int, Fraction, str)):
        return to_fraction(eps)
    return float(eps)


# -- structural constants ---------------------------------------------------

def v_exponent(d: int) -> int:
    return (d // 2 + 1) * ((d + 1) // 2)


@dataclass(frozen=True)
class StructuralConstants:
    d: int
    eps: object
    ell: int
    eps_d: Fraction
    v_d: int
    p: int
    kappa_prime: Fraction
    kappa: object
    cap: int

    def rows(self):
        return [("d", self.d), ("eps", self.eps), ("ell", self.ell), ("eps(d)", self.eps_d),
                ("v(d)", self.v_d), ("p", self.p), ("kappa'", self.kappa_prime),
                ("kappa", self.kappa), ("kappa cap d(d+1)", self.cap)]


def kappa_denominator(d: int) -> int:
    ell = d * (d + 1) // 2
    return 2 + 2 * d + 6 * ell + d * d


def structural_constants(d: int, eps=DEFAULT_EPS) -> StructuralConstants:
    """ell = d(d+1)/2, eps(d), v(d), p = 2 v(d), kappa', kappa(eps) = (kappa' - eps)/(2+2d+6 ell+d^2)."""
    if d < 1:
        raise DomainError("d must be at least 1")
    eps = _scalar(eps)
    kprime = Fraction(25, 64) if d == 1 else Fraction(1, 2)
    if not 0 <= eps < kprime:
        raise DomainError(f"eps must lie in [0, {kprime})")
    ell = d * (d + 1) // 2
    v = v_exponent(d)
    kappa = (kprime - eps) / kappa_denominator(d)
    sc = StructuralConstants(d, eps, ell, Fraction(1, 2) if d == 1 else Fraction(1), v, 2 * v,
                             kprime, kappa, d * (d + 1))
    assert sc.kappa <= sc.cap
    return sc


# -- rate constants ----------------------------------------------------------

@dataclass(frozen=True)
class RateConstants:
    sigma: float
    o_eps: float
    upsilon: float
    q_eps: object
    theta_eps: object
    r: Fraction
    L: object
    A: object


def holder_exponents(d: int, eps=DEFAULT_EPS):
    """(theta_eps, q_eps): 1/theta + eps(d)/(p + eps) = 1 and q = 2 theta/(theta + 1)."""
    sc = structural_constants(d, eps)
    pe = sc.p + sc.eps
    theta = pe / (pe - sc.eps_d)
    return theta, 2 * theta / (theta + 1)


def mass_term_base(ifs: RationalIfs, d: int | None = None) -> Fraction:
    """sum_i lambda_i^2 rho_i^{-d}, exactly."""
    d = ifs.dim if d is None else d
    return sum((w * w / m.rho**d for w, m in zip(ifs.weights, ifs.maps)), Fraction(0))


def mass_term(ifs: RationalIfs, m: int, d: int | None = None, verify: bool = False) -> Fraction:
    """sum over words of length m of lambda_w^2 rho_w^{-d} = (base)^m."""
    d = ifs.dim if d is None else d
    val = mass_term_base(ifs, d) ** m
    if verify:
        from .ifs import compose_word, cylinder_measure
        brute = sum((cylinder_measure(ifs, w) ** 2 / compose_word(ifs, w).rho ** d
                     for w in ifs.words(m)), Fraction(0))
        if brute != val:
            raise AssertionError("mass term factorisation failed")
    return val


def jensen_equality(ifs: RationalIfs, d: int | None = None) -> bool:
    """Whether lambda_i = rho_i^d for all i (the equality case sigma = 0)."""
    d = ifs.dim if d is None else d
    return all(w == m.rho**d for w, m in zip(ifs.weights, ifs.maps))


def average_ratio(ifs: RationalIfs) -> Fraction:
    """r = sum_i lambda_i rho_i."""
    return sum((w * m.rho for w, m in zip(ifs.weights, ifs.maps)), Fraction(0))


def rate_constants(ifs: RationalIfs, d: int | None = None, eps=DEFAULT_EPS, L=None) -> RateConstants:
    """sigma, o_eps, upsilon from

    r^{-sigma} = (sum lambda_i^2 rho_i^{-d})^{1/2},
    r^{o_eps} = (sum lambda_i^{q_eps})^{1/q_eps},
    r^{-upsilon} = rho_min^{-L/4} sum lambda_i rho_i^{-ell}.
    L defaults to the index exponent of the IFS.
    """
    from .sarith import index_exponents

    d = ifs.dim if d is None else d
    if ifs.size < 2:
        raise DomainError("rate constants need at least two maps")
    sc = structural_constants(d, eps)
    theta, q = holder_exponents(d, eps)
    A = None
    if L is None:
        A, L, _ = index_exponents(ifs)
    r = average_ratio(ifs)
    log_inv_r = -math.log(r)
    sigma = 0.5 * math.log(mass_term_base(ifs, d)) / log_inv_r
    if jensen_equality(ifs, d):
        sigma = 0.0
    qf = float(q)
    lq = math.log(math.fsum(float(w) ** qf for w in ifs.weights)) / qf
    o_eps = lq / -log_inv_r
    ups_arg = math.fsum(float(w) * float(m.rho) ** (-sc.ell) for w, m in zip(ifs.weights, ifs.maps))
    upsilon = (float(L) / 4 * -math.log(ifs.rho_min) + math.log(ups_arg)) / log_inv_r
    return RateConstants(sigma, o_eps, upsilon, q, theta, r, L, A)


def spectral_bound_factor(ifs: RationalIfs, k: int, eps=DEFAULT_EPS, d: int | None = None) -> float:
    """(sum lambda_i^{q_eps})^{2k/q_eps}; the remaining factor is a finite but unevaluated constant."""
    d = ifs.dim if d is None else d
    _, q = holder_exponents(d, eps)
    qf = float(q)
    return math.fsum(float(w) ** qf for w in ifs.weights) ** (2 * k / qf)


# -- thresholds and hypotheses ------------------------------------------------

@dataclass(frozen=True)
class Threshold:
    eps0: object
    s_star: object

    @property
    def within_stated(self) -> bool:
        return self.s_star <= STATED_DIMENSION_THRESHOLD


def threshold_main(d: int, L, eps=DEFAULT_EPS) -> Threshold:
    """eps0 = min{1, kappa eps(d) / (d eps(d) + (4 ell + L) p)} and s* = 1/(1 + eps0)."""
    L = _scalar(L)
    if L <= 0:
        raise DomainError("L must be positive")
    sc = structural_constants(d, eps)
    eps0 = sc.kappa * sc.eps_d / (d * sc.eps_d + (4 * sc.ell + L) * sc.p)
    eps0 = min(eps0, 1) if not isinstance(eps0, Fraction) else min(eps0, Fraction(1))
    return Threshold(eps0, 1 / (1 + eps0))


def theorem_a_lhs(ifs: RationalIfs, d: int | None = None) -> float:
    """(d log rho_min / log lambda_max - 1) log lambda_min / (s log rho_max)."""
    d = ifs.dim if d is None else d
    s = moran_dimension(ifs)
    lmax, lmin = max(ifs.weights), min(ifs.weights)
    if lmax == 1:
        raise DomainError("the thickness quantity needs at least two maps")
    return ((d * math.log(ifs.rho_min) / math.log(lmax) - 1)
            * math.log(lmin) / (s * math.log(ifs.rho_max)))


@dataclass(frozen=True)
class GapHypothesis:
    passes: bool
    lhs: float
    kappa: float
    margin: float
    thickness_lhs: float
    eps0: object
    thickness_passes: bool
    rates: RateConstants


def gap_lhs(sigma: float, o: float, upsilon: float) -> float:
    """2 sigma (o + upsilon) / (o + sigma)."""
    if sigma == 0:
        return 0.0
    return 2 * sigma * (o + upsilon) / (o + sigma)


def gap_hypothesis(ifs: RationalIfs, d: int | None = None, eps=DEFAULT_EPS, L=None) -> GapHypothesis:
    d = ifs.dim if d is None else d
    rc = rate_constants(ifs, d, eps, L)
    kappa = float(structural_constants(d, eps).kappa)
    lhs = gap_lhs(rc.sigma, rc.o_eps, rc.upsilon)
    th = threshold_main(d, rc.L, eps)
    t_lhs = theorem_a_lhs(ifs, d)
    return GapHypothesis(lhs < kappa, lhs, kappa, kappa - lhs, t_lhs, th.eps0,
                         t_lhs < float(th.eps0), rc)


@dataclass(frozen=True)
class Schedule:
    n: int
    m: int
    delta: float
    tau: float
    holds: bool


def balancing_schedule(sigma, o, upsilon, kappa, t, r) -> Schedule:
    """n = floor(kappa tau / (2(o+upsilon))), m = floor((tau + (o-1) n)/(1+sigma)), t = r^{-tau}."""
    if not 0 < float(r) < 1:
        raise DomainError("r must lie in (0, 1)")
    if t <= 0:
        raise DomainError("t must be positive")
    tau = math.log(t) / -math.log(float(r))
    c = kappa / (2 * (o + upsilon))
    n = math.floor(c * tau)
    m = math.floor((tau + (o - 1) * n) / (1 + sigma))
    delta = c + (1 + (o - 1) * c) / (1 + sigma) - 1
    return Schedule(n, m, delta, tau, delta > 0)


# -- missing-digit refinements ---------------------------------------------

@dataclass(frozen=True)
class GapSum:
    closed: object
    brute: object
    brute_force_skipped: bool

    @property
    def agree(self) -> bool:
        return self.brute is None or self.brute == self.closed


def _power(p: int, e):
    """p^e, exact for integer e, 50-digit mpmath otherwise."""
    if isinstance(e, (int, Fraction)) and Fraction(e).denominator == 1:
        return Fraction(p) ** int(e)
    import mpmath

    e = Fraction(e) if isinstance(e, (int, Fraction)) else e
    with mpmath.workdps(50):
        if isinstance(e, Fraction):
            return mpmath.mpf(p) ** (mpmath.mpf(e.numerator) / e.denominator)
        return mpmath.mpf(p) ** mpmath.mpf(e)


def _times(c: Fraction, v):
    """c * v for an exact coefficient and an exact or mpmath power."""
    if isinstance(v, Fraction):
        return c * v
    import mpmath

    with mpmath.workdps(50):
        return mpmath.mpf(c.numerator) / c.denominator * v


def _cantor_args(p, digits, n):
    if not is_prime(p):
        raise DomainError("p must be prime")
    digits = sorted(set(int(i) for i in digits))
    if len(digits) < 2 or not all(0 <= i < p for i in digits):
        raise DomainError("need at least two distinct digits in [0, p)")
    if n < 1:
        raise DomainError("n must be positive")
    return digits


def cantor_gap_closed_form(p: int, digits: Sequence[int], n: int, delta):
    """sum_{j=1}^n p^{-delta j} k^{j-n-1} (k-1) with k = |digits| and uniform weights."""
    k = len(_cantor_args(p, digits, n))
    delta = _scalar(delta) if not isinstance(delta, float) or not delta.is_integer() else int(delta)
    total = 0
    for j in range(1, n + 1):
        total += _times(Fraction(k) ** (j - n - 1) * (k - 1), _power(p, -delta * j))
    return total


def cantor_gap_brute_force(p: int, digits: Sequence[int], n: int, delta):
    """Enumerate all ordered pairs of distinct words, weighting p^{-delta d(eta, omega)}
    with d the last index at which the words differ."""
    digits = _cantor_args(p, digits, n)
    k = len(digits)
    words = np.array(np.meshgrid(*([np.arange(k)] * n), indexing="ij")).reshape(n, -1).T
    size = words.shape[0]
    counts = np.zeros(n + 1, dtype=np.int64)
    block = max(1, 2_000_000 // max(size * n, 1))
    idx = np.arange(1, n + 1)
    for start in range(0, size, block):
        diff = words[start:start + block, None, :] != words[None, :, :]
        last = np.max(np.where(diff, idx, 0), axis=2)
        counts += np.bincount(last.ravel(), minlength=n + 1)
    delta = _scalar(delta) if not isinstance(delta, float) or not delta.is_integer() else int(delta)
    weight = Fraction(1, k) ** (2 * n)
    total = 0
    for j in range(1, n + 1):
        total += _times(int(counts[j]) * weight, _power(p, -delta * j))
    return total


def cantor_gap_sum(p: int, digits: Sequence[int], n: int, delta, brute_force: bool = False) -> GapSum:
    """Closed form of the word-pair gap sum, optionally checked by enumeration."""
    closed = cantor_gap_closed_form(p, digits, n, delta)
    if not brute_force:
        return GapSum(closed, None, False)
    k = len(set(digits))
    if k ** (2 * n) > BRUTE_FORCE_PAIR_CAP:
        return GapSum(closed, None, True)
    return GapSum(closed, cantor_gap_brute_force(p, digits, n, delta), False)


@dataclass(frozen=True)
class CantorCutoffs:
    delta_eps: object
    o_eps: object
    kappa: Fraction
    dimension_cutoff: object
    bq_eps: float | None
    rho0: float | None


def cantor_cutoffs(eps=0, sigma_prime=None, ell: int = 1) -> CantorCutoffs:
    """delta_eps = 25/32 - 2 eps, and the s solving (1 - s)(o + 3/2) = 2 kappa o
    with kappa = 25/64, 2 o = 25/32 - eps.  With a rational-points rate
    sigma', also eps' = (o' - sqrt(o'^2 - 4 sigma'))/2, o' = 3 ell + 2 + sigma',
    and rho0 = (1/2 - eps') eps' / (1 - eps')."""
    eps = _scalar(eps)
    if not 0 <= eps < Fraction(25, 32):
        raise DomainError("eps must lie in [0, 25/32)")
    kappa = Fraction(25, 64)
    o = (Fraction(25, 32) - eps) / 2
    one_minus_s = 2 * kappa * o / (o + Fraction(3, 2))
    cutoff = 1 - one_minus_s
    # the cutoff must sit above 25/32 for min{25/32, s} = 25/32 to be the active branch
    assert cutoff >= Fraction(25, 32) - eps
    bq = rho0 = None
    if sigma_prime is not None:
        sp = float(sigma_prime)
        if sp <= 0:
            raise DomainError("sigma' must be positive")
        op = 3 * ell + 2 + sp
        disc = op * op - 4 * sp
        bq = (op - math.sqrt(disc)) / 2
        rho0 = (0.5 - bq) * bq / (1 - bq)
    return CantorCutoffs(Fraction(25, 32) - 2 * eps, o, kappa, cutoff, bq, rho0)


def cantor_condition(s, eps=0) -> bool:
    """(1 - s)(o + 3/2) < 2 kappa o with 2 o = min{25/32, s} - eps, kappa = 25/64."""
    s = _scalar(s)
    eps = _scalar(eps)
    o = (min(Fraction(25, 32), s) - eps) / 2
    return (1 - s) * (o + Fraction(3, 2)) < 2 * Fraction(25, 64) * o


def constants_table(d: int = 1, eps=DEFAULT_EPS, L=3):
    """Labelled (name, value, exact) rows for the constants report."""
    sc = structural_constants(d, eps)
    th = threshold_main(d, L, eps)
    th0 = threshold_main(d, L, 0)
    theta, q = holder_exponents(d, eps)
    cc = cantor_cutoffs(0)
    rows = list(sc.rows())
    rows += [("theta_eps", theta), ("q_eps", q), ("L", L), ("eps0", th.eps0), ("s*", th.s_star),
             ("eps0 (eps->0)", th0.eps0), ("s* (eps->0)", th0.s_star),
             ("stated threshold", STATED_DIMENSION_THRESHOLD),
             ("cantor cutoff (eps->0)", cc.dimension_cutoff)]
    return [(name, value, isinstance(value, (int, Fraction))) for name, value in rows]
