"""Converse Borel-Cantelli machinery and the simplex lemma.

Event families are given by their measures mu(E_n) and pair measures
mu(E_m & E_n).  Hypothesis checks are evaluated on a finite index window
[M, N]; the sparse selection of well separated index blocks and its
separation inequalities are computed in exact arithmetic.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .rational import to_fraction

# -- event families -------------------------------------------------------------


@dataclass
class EventFamily:
    """Measures mu(E_n) (n >= 1) and pair measures; ``pair=None`` means independent."""

    measure: Callable[[int], object]
    pair: Callable[[int, int], object] | None = None
    kind: str = "synthetic-closed-form"
    name: str = ""

    @property
    def independent(self) -> bool:
        return self.pair is None

    def mu(self, n: int):
        v = self.measure(n)
        if not 0 <= v <= 1:
            raise DomainError(f"mu(E_{n}) = {v} is not a probability")
        return v

    def pair_measure(self, m: int, n: int):
        if m > n:
            m, n = n, m
        if self.pair is None:
            return self.mu(m) if m == n else self.mu(m) * self.mu(n)
        if m == n:
            return self.mu(m)
        return self.pair(m, n)

    def mu_array(self, M: int, N: int) -> np.ndarray:
        return np.array([float(self.mu(n)) for n in range(M, N + 1)])

    def pair_matrix(self, M: int, N: int) -> np.ndarray:
        """Float matrix of mu(E_m & E_n) over [M, N]^2."""
        mus = self.mu_array(M, N)
        if self.pair is None:
            out = np.outer(mus, mus)
            np.fill_diagonal(out, mus)
            return out
        k = N - M + 1
        out = np.empty((k, k))
        for i in range(k):
            out[i, i] = mus[i]
            for j in range(i + 1, k):
                out[i, j] = out[j, i] = float(self.pair(M + i, M + j))
        return out


def constant_family(c) -> EventFamily:
    c = to_fraction(c)
    return EventFamily(lambda n: c, None, name=f"mu = {c}")


def harmonic_family(scale=1) -> EventFamily:
    s = to_fraction(scale)
    return EventFamily(lambda n: min(Fraction(1), s / n), None, name=f"mu = {s}/n")


# -- family description files ----------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt, "min": min, "max": max}


def _compile_expr(text: str, names: Sequence[str]) -> Callable:
    """Arithmetic expression in the given variables; integer literals and
    division stay exact, log/exp/sqrt produce floats."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"cannot parse expression {text!r}") from exc

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return Fraction(node.value) if isinstance(node.value, int) else node.value
        if isinstance(node, ast.Name) and node.id in env:
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            a, b = ev(node.left, env), ev(node.right, env)
            if isinstance(node.op, ast.Pow) and isinstance(b, Fraction) and b.denominator != 1:
                a, b = float(a), float(b)
            return _BINOPS[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and not node.keywords:
            args = [ev(a, env) for a in node.args]
            f = _FUNCS[node.func.id]
            return f(*args) if f in (min, max) else f(*(float(a) for a in args))
        raise DomainError(f"unsupported syntax in {text!r}")

    def fn(*vals):
        return ev(tree, dict(zip(names, (Fraction(v) for v in vals))))

    fn(*([2] * len(names)))  # fail early on bad syntax
    return fn


def parse_family_text(text: str) -> EventFamily:
    """``mu = <expr in n>`` and ``pair = independent | <expr in m, n>``."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in ("mu", "pair"):
            raise DomainError(f"line {lineno}: expected 'mu = ...' or 'pair = ...'")
        if key in entries:
            raise DomainError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    if "mu" not in entries:
        raise DomainError("family file needs a 'mu' line")
    mu = _compile_expr(entries["mu"], ["n"])
    pair_text = entries.get("pair", "independent")
    pair = None if pair_text == "independent" else _compile_expr(pair_text, ["m", "n"])
    return EventFamily(lambda n: mu(n), pair, name=f"mu = {entries['mu']}")


def family_from_file(path) -> EventFamily:
    p = Path(path)
    if not p.exists():
        raise DomainError(f"family file not found: {path}")
    return parse_family_text(p.read_text(encoding="utf-8"))


# -- Chung-Erdos ---------------------------------------------------------------

def _indices(M, N, indices):
    if indices is None:
        return list(range(M, N + 1))
    return sorted(i for i in set(indices) if M <= i <= N)


def double_sum(events: EventFamily, idx: Sequence[int]):
    """sum over r, s in idx of mu(F_r & F_s), diagonal included."""
    if events.independent:
        mus = [events.mu(i) for i in idx]
        s = sum(mus)
        return s * s - sum(m * m for m in mus) + s
    total = 0
    for a, r in enumerate(idx):
        total += events.mu(r)
        for s in idx[a + 1:]:
            total += 2 * events.pair_measure(r, s)
    return total


def chung_erdos(events: EventFamily, M: int, N: int, indices=None):
    """(sum mu)^2 / sum_{r,s} mu(F_r & F_s), a lower bound for the union measure."""
    idx = _indices(M, N, indices)
    s = sum((events.mu(i) for i in idx), 0)
    den = double_sum(events, idx)
    if den == 0:
        raise DomainError("all events in the window have measure zero")
    return s * s / den


def bernoulli_union(events: EventFamily, M: int, N: int, indices=None):
    """Exact measure of the union for independent events: 1 - prod(1 - mu)."""
    if not events.independent:
        raise DomainError("the product formula needs an independent family")
    out = 1
    for i in _indices(M, N, indices):
        out *= 1 - events.mu(i)
    return 1 - out


def simulate_union(events: EventFamily, indices: Sequence[int], samples: int, seed=None) -> float:
    """Monte Carlo union frequency on the Bernoulli product space (independent families)."""
    if not events.independent:
        raise DomainError("sampling backend needs an independent family")
    rng = np.random.default_rng(seed)
    mus = np.array([float(events.mu(i)) for i in indices])
    hits = np.zeros(samples, dtype=bool)
    for m in mus:
        hits |= rng.random(samples) < m
    return float(hits.mean())


# -- constants and sparse selection ------------------------------------------------

@dataclass(frozen=True)
class BcConstants:
    C_sharp: object = 1
    C_star: object = 2
    eps_star: object = 1
    D: object = 1
    sigma: float = 0.5
    a: float = 1.0

    def __post_init__(self):
        for name in ("C_sharp", "C_star", "eps_star", "D"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.C_sharp < 1 or self.C_star < 1 or self.D < 1:
            raise DomainError("C_sharp, C_star and D must be at least 1")
        if self.eps_star <= 0:
            raise DomainError("eps_star must be positive")
        if not 0 < self.sigma < 1:
            raise DomainError("sigma must lie in (0, 1)")
        if not 0 < self.a <= 1 / self.sigma:
            raise DomainError("a must lie in (0, 1/sigma]")

    def rounded(self):
        """(ell_*, C_*') with C_*' = (1 + eps_*)^{ell_*} the least such power >= C_*."""
        base = 1 + self.eps_star
        ell, c = 1, base
        while c < self.C_star:
            ell += 1
            c *= base
        return ell, c

    @property
    def K(self) -> int:
        return math.ceil(1 / (self.a * self.sigma))

    def f(self, mu) -> int:
        """f(m) = ceil(-a log mu(E_m))."""
        return math.ceil(-self.a * math.log(float(mu)))


@dataclass(frozen=True)
class Block:
    k: int
    ell: int
    start: int
    stop: int  # exclusive
    total: object


@dataclass
class SparseSelection:
    ell_star: int
    C_star: Fraction
    blocks: list
    parity: int
    J: list
    sum_even: object
    sum_odd: object
    total: object
    separation_long: bool
    separation_short: bool

    @property
    def sum_J(self):
        return self.sum_even if self.parity == 0 else self.sum_odd

    @property
    def divergence_retained(self) -> bool:
        return self.ell_star * (self.sum_even + self.sum_odd) >= self.total


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def sparse_select(events: EventFamily, constants: BcConstants, N_max: int, parity=None,
                  M: int = 1) -> SparseSelection:
    """Pick one (1+eps_*)-adic sub-block of largest mass inside every C_*-adic block.

    Block boundaries are rounded up to integers, so the C_*-adic blocks
    [ceil(C^k), ceil(C^{k+1})) for k >= 0 partition [1, N_max] and the
    sub-blocks partition each block.  Masses are summed over [M, N_max];
    the even or odd blocks (whichever has larger mass, unless ``parity`` is
    given) form J.
    """
    if not 1 <= M <= N_max:
        raise DomainError("need 1 <= M <= N_max")
    ell_star, C = constants.rounded()
    base = 1 + constants.eps_star
    blocks = []
    k = 0
    total = sum((events.mu(n) for n in range(M, N_max + 1)), 0)
    if total == 0:
        raise DomainError("all measures vanish")
    while _ceil(C**k) <= N_max:
        best = None
        for ell in range(ell_star):
            lo = _ceil(C**k * base**ell)
            hi = min(_ceil(C**k * base ** (ell + 1)), N_max + 1)
            s = sum((events.mu(n) for n in range(max(lo, M), hi)), 0)
            if best is None or s > best.total:
                best = Block(k, ell, lo, hi, s)
        blocks.append(best)
        k += 1
    sum_even = sum((b.total for b in blocks if b.k % 2 == 0), 0)
    sum_odd = sum((b.total for b in blocks if b.k % 2 == 1), 0)
    if parity is None:
        parity = 0 if sum_even >= sum_odd else 1
    chosen = [b for b in blocks if b.k % 2 == parity and b.stop > b.start]
    J = [n for b in chosen for n in range(b.start, b.stop)]
    # exact separation checks: n >= C m across chosen blocks, n < (1+eps) q within a block
    long_ok = all(later.start >= C * (earlier.stop - 1)
                  for i, earlier in enumerate(chosen) for later in chosen[i + 1:])
    short_ok = all((b.stop - 1) < base * b.start for b in chosen)
    return SparseSelection(ell_star, C, blocks, parity, J, sum_even, sum_odd, total, long_ok, short_ok)


# -- hypothesis verification -------------------------------------------------------

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    window: tuple
    holds: bool
    worst_pair: tuple | None
    margin: float


def _worst(margin: np.ndarray, mask: np.ndarray, M: int):
    if not mask.any():
        return None, math.inf
    m = np.where(mask, margin, np.inf)
    i, j = np.unravel_index(np.argmin(m), m.shape)
    return (int(M + i), int(M + j)), float(m[i, j])


def check_hypotheses(events: EventFamily, constants: BcConstants, M: int, N: int,
                     tol: float = 1e-12) -> list[HypothesisCheck]:
    """Evaluate the four hypotheses on the window M <= m <= n <= N."""
    if not 1 <= M <= N:
        raise DomainError("need 1 <= M <= N")
    mu = events.mu_array(M, N)
    pair = events.pair_matrix(M, N)
    idx = np.arange(M, N + 1)
    mm, nn = np.meshgrid(idx, idx, indexing="ij")
    upper = nn >= mm
    D, sig = float(constants.D), constants.sigma
    out = []
    pos = bool(np.all(mu > 0))
    worst = int(idx[np.argmin(mu)])
    out.append(HypothesisCheck("positive measures, divergent sum", (M, N), pos, (worst, worst),
                               float(mu.min())))
    # long range: n >= C_* m or m <= n <= (1 + eps_*) m
    C = float(constants.C_star)
    e = float(constants.eps_star)
    mask2 = upper & ((nn >= C * mm) | (nn <= (1 + e) * mm))
    mu_m, mu_n = mu[:, None], mu[None, :]
    rhs2 = float(constants.C_sharp) * mu_m * mu_n + D * (np.exp(-sig * mm) * mu_n + np.exp(-sig * (nn - mm)))
    wp, mg = _worst(rhs2 - pair, mask2, M)
    out.append(HypothesisCheck("long range independence", (M, N), mg >= -tol, wp, mg))
    rhs3 = D * mu_m * np.maximum(mu_n ** sig, 2.0 ** (-sig * (nn - mm)))
    wp, mg = _worst(rhs3 - pair, upper, M)
    out.append(HypothesisCheck("short range independence", (M, N), mg >= -tol, wp, mg))
    with np.errstate(divide="ignore"):
        fm = np.ceil(-constants.a * np.log(mu))
    mask4 = upper & (nn <= mm + fm[:, None])
    rhs4 = D * mu_m ** sig - mu_n
    wp, mg = _worst(rhs4 + 0 * pair, mask4, M)
    out.append(HypothesisCheck("weak monotonicity", (M, N), mg >= -tol, wp, mg))
    return out


@dataclass
class BcReport:
    hypotheses: list
    selection: SparseSelection
    window: tuple
    J_window: list
    sum_J: object
    double_sum_ratio: float
    chung_erdos: float
    exact_union: object | None
    lower_bound: float
    K: int
    schedule: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(h.holds for h in self.hypotheses)


def bc_verify_and_bound(events: EventFamily, constants: BcConstants, M: int, N: int,
                        parity=None) -> BcReport:
    """Check the hypotheses on [M, N], select J, and bound mu(union of E_n, n in J, M <= n <= N).

    The reported lower bound is the larger of the Chung-Erdos bound and, for
    independent families, the exact union measure of the Bernoulli backend.
    """
    hyps = check_hypotheses(events, constants, M, N)
    sel = sparse_select(events, constants, N, parity, M)
    Jw = [n for n in sel.J if n >= M]
    if not Jw:
        raise DomainError("the selected index set misses the window [M, N]")
    s = sum((events.mu(n) for n in Jw), 0)
    dsum = double_sum(events, Jw)
    ratio = float(dsum) / float(s) ** 2
    ce = float(s * s / dsum)
    exact = bernoulli_union(events, M, N, Jw) if events.independent else None
    lower = max(ce, float(exact)) if exact is not None else ce
    sched = {n: constants.f(events.mu(n)) for n in Jw if events.mu(n) > 0}
    return BcReport(hyps, sel, (M, N), Jw, s, ratio, ce, exact, lower, constants.K, sched)


def report_rows(report: BcReport):
    """Rows ``hypothesis,range,holds,worst_pair,margin`` for CSV output."""
    rows = []
    for h in report.hypotheses:
        wp = "" if h.worst_pair is None else f"{h.worst_pair[0]}:{h.worst_pair[1]}"
        rows.append((h.name, f"{h.window[0]}-{h.window[1]}", int(h.holds), wp, repr(h.margin)))
    sel = report.selection
    rows.append(("separation n >= C_* m", f"1-{report.window[1]}", int(sel.separation_long), "", ""))
    rows.append(("separation q < n < (1+eps_*) q", f"1-{report.window[1]}", int(sel.separation_short), "", ""))
    return rows


# -- simplex lemma -----------------------------------------------------------------

PI_UPPER = Fraction(314159266, 10**8)


def _ball_volume_upper(radius: Fraction, d: int) -> Fraction:
    if d == 1:
        return 2 * radius
    if d == 2:
        return PI_UPPER * radius * radius
    raise DomainError("simplex checks support d <= 2")


def simplex_precondition(radius, N: int, d: int) -> bool:
    """Vol(B) < 1/(d! N^{d+1}), decided with a rational upper bound for the volume."""
    r = to_fraction(radius)
    return _ball_volume_upper(r, d) < Fraction(1, math.factorial(d) * N ** (d + 1))


def rationals_in_ball(center, radius, N: int) -> list[tuple]:
    """Distinct points p/q (0 < q < N) in the open Euclidean ball, exactly."""
    c = [to_fraction(v) for v in center]
    r = to_fraction(radius)
    r2 = r * r
    pts = set()
    for q in range(1, N):
        ranges = [range(math.floor((ci - r) * q), math.ceil((ci + r) * q) + 1) for ci in c]
        for p in product(*ranges):
            x = tuple(Fraction(pi, q) for pi in p)
            if sum((xi - ci) ** 2 for xi, ci in zip(x, c)) < r2:
                pts.add(x)
    return sorted(pts)


def _rref(rows):
    a = [list(r) for r in rows]
    pivots = []
    r = 0
    ncol = len(a[0]) if a else 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def _det(rows):
    n = len(rows)
    a = [list(r) for r in rows]
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if a[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for i in range(c + 1, n):
            f = a[i][c] / a[c][c]
            a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return det


@dataclass
class SimplexResult:
    precondition: bool
    points: list
    hyperplane: tuple | None  # (normal a, offset b) with a . x = b
    counterexample: list | None


def simplex_check(center, radius, N: int, d: int | None = None) -> SimplexResult:
    """Find an affine hyperplane through all of Q(N) in the ball, or certify
    d + 1 affinely independent points (a nonzero determinant)."""
    center = [to_fraction(v) for v in center]
    d = len(center) if d is None else d
    if d != len(center) or d not in (1, 2):
        raise DomainError("simplex checks support d in {1, 2} with a matching center")
    if N < 1 or to_fraction(radius) <= 0:
        raise DomainError("need N >= 1 and a positive radius")
    pre = simplex_precondition(radius, N, d)
    pts = rationals_in_ball(center, radius, N)
    rows = [list(p) + [Fraction(1)] for p in pts]
    if not rows:
        return SimplexResult(pre, pts, (tuple([Fraction(1)] + [Fraction(0)] * (d - 1)), center[0]), None)
    red, pivots = _rref(rows)
    if len(pivots) == d + 1:
        # pick d + 1 affinely independent points greedily
        chosen = []
        for row in rows:
            trial = chosen + [row]
            if len(_rref(trial)[1]) == len(trial):
                chosen = trial
            if len(chosen) == d + 1:
                break
        assert _det(chosen) != 0
        return SimplexResult(pre, pts, None, [tuple(r[:d]) for r in chosen])
    # kernel vector v of rows (x_i, 1): x_i . v[:d] + v[d] = 0
    free = next(c for c in range(d + 1) if c not in pivots)
    v = [Fraction(0)] * (d + 1)
    v[free] = Fraction(1)
    for row, pc in zip(red, pivots):
        v[pc] = -row[free]
    normal = tuple(v[:d])
    if all(a == 0 for a in normal):  # pragma: no cover - impossible with a nonempty point set
        raise AssertionError("degenerate kernel")
    hp = (normal, -v[d])
    assert all(sum(a * x for a, x in zip(normal, p)) == hp[1] for p in pts)
    return SimplexResult(pre, pts, hp, None)
