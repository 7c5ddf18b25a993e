"""Approximation functions and their translation into flow times.

For a non-increasing psi on [1, inf) and dimension d, the profile at time t
is the unique r = r(t) with psi(e^{t - r})^d = e^{-(t + d r)}; the derived
quantities are lam = t - r and L = t + d r.  At the dyadic times t_n, where
e^{lam(t_n)} = 2^n, everything has a closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedDimensionError

LOG2 = math.log(2.0)
LOG_TINY = math.log(1e-300)


@dataclass(frozen=True)
class ApproxFunction:
    """A positive non-increasing function psi on [1, inf).

    Built-ins: ``power`` psi(q) = q^(-tau - 1/d), ``recip`` psi(q) = 1/q,
    ``log`` psi(q) = 1/(q * max(log q, 1)^a), and ``table`` (linear
    interpolation of tabulated values, constant beyond the table).
    """

    kind: str
    d: int = 1
    params: tuple = ()
    table_q: tuple = field(default=(), repr=False)
    table_v: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("dimension must be positive")
        if self.kind not in ("power", "recip", "log", "table"):
            raise DomainError(f"unknown psi family {self.kind!r}")

    # -- constructors -------------------------------------------------
    @classmethod
    def power(cls, tau: float, d: int = 1) -> "ApproxFunction":
        return cls("power", d, (float(tau),))

    @classmethod
    def recip(cls, d: int = 1) -> "ApproxFunction":
        return cls("recip", d)

    @classmethod
    def log(cls, a: float, d: int = 1) -> "ApproxFunction":
        return cls("log", d, (float(a),))

    @classmethod
    def table(cls, qs: Sequence[float], values: Sequence[float], d: int = 1,
              validate: bool = True) -> "ApproxFunction":
        qs = tuple(float(q) for q in qs)
        vs = tuple(float(v) for v in values)
        if len(qs) != len(vs) or len(qs) == 0:
            raise DomainError("table needs matching, nonempty q and psi columns")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise DomainError("table q values must be strictly increasing")
        if any(v <= 0 for v in vs):
            raise DomainError("psi must be positive")
        if validate and any(b > a for a, b in zip(vs, vs[1:])):
            raise DomainError("tabulated psi must be non-increasing")
        return cls("table", d, (), qs, vs)

    @property
    def exponent(self) -> float:
        """tau + 1/d for the power family."""
        return self.params[0] + 1.0 / self.d

    # -- evaluation ---------------------------------------------------
    def log_at_logq(self, logq: float) -> float:
        """log psi(q) given log q (q >= 1)."""
        if self.kind == "power":
            return -self.exponent * logq
        if self.kind == "recip":
            return -logq
        if self.kind == "log":
            return -logq - self.params[0] * math.log(max(logq, 1.0))
        return math.log(self(math.exp(logq)))

    def log_eval(self, q: float) -> float:
        if q < 1:
            raise DomainError("psi is defined on [1, inf)")
        return self.log_at_logq(math.log(q))

    def __call__(self, q):
        if self.kind == "table":
            return np.interp(q, self.table_q, self.table_v) if np.ndim(q) else float(
                np.interp(q, self.table_q, self.table_v))
        # direct formulas keep psi(2^n) exact for the power and 1/q families
        q = np.asarray(q, dtype=float) if np.ndim(q) else float(q)
        if self.kind == "recip":
            return 1.0 / q
        if self.kind == "power":
            return q ** (-self.exponent)
        v = 1.0 / (q * np.maximum(np.log(q), 1.0) ** self.params[0])
        return v if np.ndim(v) else float(v)

    def log_psi_one(self) -> float:
        return self.log_at_logq(0.0)

    def t0(self) -> float:
        """Smallest admissible time: -(d/(d+1)) log psi(1)."""
        return -(self.d / (self.d + 1)) * self.log_psi_one()

    def spec(self) -> str:
        if self.kind == "power":
            return f"power:tau={self.params[0]!r}"
        if self.kind == "recip":
            return "recip"
        if self.kind == "log":
            return f"log:a={self.params[0]!r}"
        return "table"


def parse_psi(text: str, d: int = 1) -> ApproxFunction:
    """Parse ``power:tau=<v>``, ``recip``, ``log:a=<v>`` or ``table:<file>``."""
    text = text.strip()
    if text.startswith("psi="):
        text = text[4:]
    kind, _, rest = text.partition(":")
    if kind == "recip":
        return ApproxFunction.recip(d)
    if kind in ("power", "log"):
        key, _, value = rest.partition("=")
        want = "tau" if kind == "power" else "a"
        if key.strip() != want:
            raise DomainError(f"psi={kind} needs {want}=<value>")
        try:
            v = float(value)
        except ValueError as exc:
            raise DomainError(f"bad numeric value in psi spec {text!r}") from exc
        return ApproxFunction.power(v, d) if kind == "power" else ApproxFunction.log(v, d)
    if kind == "table":
        try:
            data = np.loadtxt(rest, ndmin=2)
        except OSError as exc:
            raise DomainError(f"cannot read psi table {rest!r}") from exc
        return ApproxFunction.table(data[:, 0], data[:, 1], d)
    raise DomainError(f"unknown psi spec {text!r}")


@dataclass(frozen=True)
class DynamicalProfile:
    t: float
    r: float
    lam: float
    L: float
    d: int


def _check_log_psi(value: float) -> float:
    if not value > LOG_TINY:
        raise DomainError("psi value below 1e-300; profile is outside double range")
    return value


def dyadic_profile(psi: ApproxFunction, n: int) -> DynamicalProfile:
    """Profile at t_n: r = -log(2^n psi(2^n)^d)/(d+1), lam = n log 2, t = lam + r."""
    if n < 1:
        raise DomainError("n must be at least 1")
    d = psi.d
    lam = n * LOG2
    logpsi = _check_log_psi(psi.log_at_logq(lam))
    r = -(lam + d * logpsi) / (d + 1) + 0.0  # no negative zero
    t = lam + r
    return DynamicalProfile(t, r, lam, t + d * r, d)


def r_of_t(psi: ApproxFunction, t: float, tol: float = 1e-10) -> float:
    """Solve d log psi(e^{t-r}) + t + d r = 0 for r by bisection.

    The left side is strictly increasing in r; on [-t/d - log psi(1), t]
    it changes sign exactly when t >= t0.
    """
    d = psi.d
    t = float(t)
    if t < psi.t0() - 1e-12:
        raise DomainError(f"t = {t} is below t0 = {psi.t0()}")
    lp1 = psi.log_psi_one()

    def f(r):
        return d * _check_log_psi(psi.log_at_logq(max(t - r, 0.0))) + t + d * r

    lo, hi = -t / d - lp1, t
    if lo > hi:  # only possible by rounding at t == t0
        return hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if val == 0.0:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * 1e-3:
            break
    return 0.5 * (lo + hi)


def profile_at(psi: ApproxFunction, t: float) -> DynamicalProfile:
    r = r_of_t(psi, t)
    return DynamicalProfile(t, r, t - r, t + psi.d * r, psi.d)


@dataclass
class GrowthReport:
    ok: bool
    checked_pairs: int
    violations: list = field(default_factory=list)


def growth_checks(psi: ApproxFunction, t_pairs: Iterable[tuple[float, float]] | None = None,
                  n_max: int = 20, tol: float = 1e-9) -> GrowthReport:
    """Check the growth inequalities of r, lam and the dyadic times.

    r(t2) - r(t1) >= -(t2 - t1)/d, lam(t2) - lam(t1) <= ((d+1)/d)(t2 - t1),
    and t_n >= t0 + n d log 2/(d+1).  Pairs default to consecutive and
    non-consecutive dyadic times n = 1..n_max.  A tabulated psi is also
    checked for monotonicity at its knots.
    """
    d = psi.d
    violations = []
    if psi.kind == "table":
        vs = psi.table_v
        for i in range(len(vs) - 1):
            if vs[i + 1] > vs[i]:
                violations.append(("psi-monotone", psi.table_q[i], psi.table_q[i + 1]))
    profiles = [dyadic_profile(psi, n) for n in range(1, n_max + 1)]
    if t_pairs is None:
        ts = [p.t for p in profiles]
        t_pairs = [(a, b) for i, a in enumerate(ts) for b in ts[i + 1:]]
    count = 0
    for t1, t2 in t_pairs:
        if t2 < t1:
            t1, t2 = t2, t1
        r1, r2 = r_of_t(psi, t1), r_of_t(psi, t2)
        dt = t2 - t1
        count += 1
        if r2 - r1 < -dt / d - tol:
            violations.append(("r-growth", t1, t2))
        if (t2 - r2) - (t1 - r1) > (d + 1) / d * dt + tol:
            violations.append(("lam-growth", t1, t2))
    t0 = psi.t0()
    for n, p in enumerate(profiles, 1):
        if p.t < t0 + n * d * LOG2 / (d + 1) - tol:
            violations.append(("dyadic-time", n, p.t))
    return GrowthReport(not violations, count, violations)


def condensation_sums(psi: ApproxFunction, k_max: int) -> tuple[float, float, float]:
    """(sum_{q < 2^{k+1}} psi^d(q), sum_{n<=k} 2^n psi^d(2^n), half of the shifted dyadic sum).

    For non-increasing psi the direct sum lies between the last two, which
    ties divergence of the two series together.
    """
    d = psi.d
    q = np.arange(1, 2 ** (k_max + 1), dtype=float)
    direct = float(np.sum(np.asarray(psi(q), dtype=float) ** d))
    dyadic = math.fsum(2.0**n * psi(2.0**n) ** d for n in range(0, k_max + 1))
    lower = 0.5 * math.fsum(2.0**n * psi(2.0**n) ** d for n in range(1, k_max + 2))
    return direct, dyadic, lower


# -- Dirichlet witnesses ---------------------------------------------------

def continued_fraction_convergents(x: Fraction, q_max: int) -> list[tuple[int, int]]:
    """Convergents p/q of x with q <= q_max (exact)."""
    x = Fraction(x)
    out = []
    p0, q0, p1, q1 = 0, 1, 1, 0
    y = x
    while True:
        a = math.floor(y)
        p2, q2 = a * p1 + p0, a * q1 + q0
        if q2 > q_max:
            break
        out.append((p2, q2))
        p0, q0, p1, q1 = p1, q1, p2, q2
        frac = y - a
        if frac == 0:
            break
        y = 1 / frac
    return out


def dirichlet_witness(x, n: int, d: int = 1):
    """(p, q) with 1 <= q <= 2^n and |q x - p|_max <= 2^(-n/d).

    d = 1 uses continued fractions of the exact value of x; d = 2, 3 scan
    q = 1..2^n.  Returns p as an int for d = 1 and a tuple otherwise.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if d > 3 or d < 1:
        raise UnsupportedDimensionError("dirichlet_witness supports d = 1, 2, 3")
    Q = 2**n
    if d == 1:
        xv = x[0] if isinstance(x, (tuple, list, np.ndarray)) else x
        xf = Fraction(xv) if not isinstance(xv, Fraction) else xv
        p, q = continued_fraction_convergents(xf, Q)[-1]
        return p, q
    xs = np.asarray(x, dtype=float).reshape(-1)
    if xs.size != d:
        raise DomainError("x must have d coordinates")
    bound = 2.0 ** (-n / d)
    exact = [Fraction(float(v)) for v in xs]
    for start in range(1, Q + 1, 1 << 16):
        qs = np.arange(start, min(Q, start + (1 << 16) - 1) + 1, dtype=np.int64)
        prod = qs[:, None] * xs[None, :]
        ps = np.rint(prod)
        err = np.max(np.abs(prod - ps), axis=1)
        for i in np.nonzero(err <= bound + 1e-12)[0]:
            q = int(qs[i])
            p = tuple(int(v) for v in ps[i])
            if max(abs(q * e - pi) for e, pi in zip(exact, p)) <= Fraction(bound):
                return p, q
    raise AssertionError("Dirichlet's theorem guarantees a witness")  # pragma: no cover
