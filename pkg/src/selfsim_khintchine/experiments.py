"""Monte Carlo and deterministic experiments on the space of lattices.

Everything runs on the SL side: a PGL element a(t) = diag(t Id_d, 1) is
replaced by diag(t^{1/(d+1)} Id_d, t^{-d/(d+1)}), and basepoints
rho^{-1}-scaled in PGL carry the factor rho^{d/(d+1)}.  Sampling is split
into fixed-size chunks whose seeds derive from (seed, chunk index), so the
results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .ifs import RationalIfs, compose_word, cylinder_measure, sample_points
from .lattice import (
    NormSpec,
    an_star_batch,
    an_star_test,
    cusp_constant,
    cusp_haar_bracket,
    shortest_lengths,
    shortest_vector_and_d1,
)
from .rational import RationalMatrix, unipotent
from .transform import ApproxFunction, dyadic_profile

CHUNK = 8192
WORD_ENUMERATION_CAP = 10**7
EXACT_WORD_CAP = 20000


@dataclass
class ExperimentConfig:
    """Inputs shared by the experiments.

    ``ifs=None`` means Lebesgue control samples on [0, 1)^d.  The constants
    C_F, kappa_star, delta and c_prime are unknown in closed form; bracket
    values computed from them are conditional on the supplied numbers.
    """

    ifs: RationalIfs | None = None
    psi: ApproxFunction | None = None
    d: int = 1
    t_values: Sequence[float] = (5.0,)
    n_range: tuple = (1, 10)
    samples: int = 10_000
    seed: int = 0
    eps_list: Sequence[float] = (0.2,)
    alpha: tuple = ()
    C_F: float = 1.0
    kappa_star: float = 0.05
    delta: float = 0.05
    c_prime: float = 0.0
    norm: str = "max"
    depth: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.ifs is not None:
            self.d = self.ifs.dim
        if self.psi is not None and self.psi.d != self.d:
            raise DomainError("psi dimension differs from the IFS dimension")
        if self.samples < 100:
            raise DomainError("samples must be at least 100")
        if not self.t_values or not self.eps_list:
            raise DomainError("t and eps lists must be nonempty")
        lo, hi = self.n_range
        if not 1 <= lo <= hi:
            raise DomainError("n range must satisfy 1 <= lo <= hi")
        if any(not 0 < e < 1 for e in self.eps_list):
            raise DomainError("eps values must lie in (0, 1)")
        if self.threads < 1:
            raise DomainError("threads must be positive")
        if self.alpha and self.ifs is None:
            raise DomainError("a basepoint word needs an IFS")

    @property
    def norm_spec(self) -> NormSpec:
        return NormSpec(self.d, self.norm)

    def sample_depth(self) -> int:
        if self.depth is not None:
            return self.depth
        r = float(self.ifs.rho_max)
        return min(64, max(8, math.ceil(math.log(1e-18) / math.log(r))))


# -- chunked sampling -------------------------------------------------------------

def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _chunks(total: int):
    return [(i, min(CHUNK, total - i * CHUNK)) for i in range((total + CHUNK - 1) // CHUNK)]


def _sample_chunk(cfg: ExperimentConfig, index: int, size: int) -> np.ndarray:
    rng = _chunk_rng(cfg.seed, index)
    if cfg.ifs is None:
        return rng.random((size, cfg.d))
    return sample_points(cfg.ifs, size, cfg.sample_depth(), seed=rng)


def _map_chunks(cfg: ExperimentConfig, work: Callable):
    """Apply ``work(index, points)`` per chunk; results come back in chunk order."""
    jobs = _chunks(cfg.samples)

    def run(job):
        i, size = job
        return work(i, _sample_chunk(cfg, i, size))

    if cfg.threads == 1 or len(jobs) == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(run, jobs))


def _stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


# -- basepoints -----------------------------------------------------------------

def _rational_root(x: Fraction, k: int):
    """Exact k-th root of a positive rational, or None."""
    out = []
    for v in (x.numerator, x.denominator):
        r = round(v ** (1.0 / k))
        for c in (r - 1, r, r + 1):
            if c > 0 and c**k == v:
                out.append(c)
                break
        else:
            return None
    return Fraction(out[0], out[1])


@dataclass(frozen=True)
class Basepoint:
    """SL lattice rho^{d/(d+1)} h Z^{d+1} with h = k^{-1} a(1/rho) u(b) rational."""

    h: RationalMatrix
    rho: Fraction
    d: int

    @property
    def scale_float(self) -> float:
        return float(self.rho) ** (self.d / (self.d + 1))

    def exact_scale(self):
        return _rational_root(self.rho**self.d, self.d + 1)

    def matrix(self) -> np.ndarray:
        return self.scale_float * self.h.to_numpy()

    def exact_matrix(self):
        c = self.exact_scale()
        return None if c is None else self.h.scale(c)

    def is_unimodular(self) -> bool:
        return self.h.det() * self.rho**self.d == 1


def identity_basepoint(d: int) -> Basepoint:
    return Basepoint(RationalMatrix.identity(d + 1), Fraction(1), d)


def basepoint(ifs: RationalIfs, alpha: Sequence) -> Basepoint:
    """x_alpha for the word alpha: h = k_alpha^{-1} a(1/rho_alpha) u(b_alpha)."""
    d = ifs.dim
    if not alpha:
        return identity_basepoint(d)
    f = compose_word(ifs, tuple(alpha))
    k_inv = f.rot.transpose()
    rows = [[Fraction(0)] * (d + 1) for _ in range(d + 1)]
    for i in range(d):
        for j in range(d):
            rows[i][j] = k_inv.rows[i][j] / f.rho
    rows[d][d] = Fraction(1)
    h = RationalMatrix(rows) @ unipotent(list(f.shift))
    bp = Basepoint(h, f.rho, d)
    assert bp.is_unimodular(), "basepoint is not unimodular"
    return bp


def sl_lift(t, d: int):
    """SL representative diag(t^{1/(d+1)} Id, t^{-d/(d+1)}) of a(t); exact when possible."""
    tf = Fraction(t) if isinstance(t, (int, Fraction)) else None
    if tf is not None:
        c = _rational_root(tf, d + 1)
        if c is not None:
            return RationalMatrix.diag([c] * d + [c ** (-d)])
    tv = float(t)
    c = tv ** (1.0 / (d + 1))
    return np.diag([c] * d + [tv ** (-d / (d + 1))])


def _flow_bases(xs: np.ndarray, t: float, base: np.ndarray) -> np.ndarray:
    """Stack of g_t u(x) B for points xs (N, d)."""
    N, d = xs.shape
    e_head, e_last = math.exp(t / d), math.exp(-t)
    u = np.broadcast_to(np.eye(d + 1), (N, d + 1, d + 1)).copy()
    u[:, :d, d] = xs
    m = u @ base
    m[:, :d, :] *= e_head
    m[:, d, :] *= e_last
    return np.ascontiguousarray(m)


# -- orbit statistics ----------------------------------------------------------------

@dataclass
class OrbitRow:
    t: float
    eps: float
    estimate: float
    stderr: float
    haar_lo: float
    haar_hi: float


def _basepoint_of(cfg: ExperimentConfig) -> Basepoint:
    return basepoint(cfg.ifs, cfg.alpha) if cfg.alpha else identity_basepoint(cfg.d)


def orbit_lengths(cfg: ExperimentConfig, ts: Sequence[float]):
    """Per chunk, the shortest-vector lengths of g_t u(x) x_alpha for each t."""
    base = _basepoint_of(cfg).matrix()
    euclid = cfg.norm == "euclidean"

    def work(i, xs):
        return np.stack([shortest_lengths(_flow_bases(xs, t, base), euclid) for t in ts])

    return _map_chunks(cfg, work)


def orbit_statistic(cfg: ExperimentConfig, test: str = "cusp"):
    """Empirical cusp frequencies (``test='cusp'``) or d_1 quantiles (``test='d1'``).

    Cusp rows carry the Haar bracket for comparison.
    """
    ts = [float(t) for t in cfg.t_values]
    chunks = orbit_lengths(cfg, ts)
    N = cfg.samples
    if test == "cusp":
        rows = []
        norm = cfg.norm_spec
        for a, t in enumerate(ts):
            for eps in cfg.eps_list:
                hits = sum(int(np.count_nonzero(c[a] < eps)) for c in chunks)
                p = hits / N
                lo, hi = cusp_haar_bracket(eps, norm, cfg.c_prime)
                rows.append(OrbitRow(t, float(eps), p, _stderr(p, N), lo, hi))
        return rows
    if test == "d1":
        allv = np.concatenate([c for c in chunks], axis=1)
        qs = (0.1, 0.25, 0.5, 0.75, 0.9)
        return [(t, q, float(np.quantile(1.0 / allv[a], q))) for a, t in enumerate(ts) for q in qs]
    raise DomainError(f"unknown test {test!r}; use 'cusp' or 'd1'")


def within_bracket(row: OrbitRow, n_sigma: float = 3.0, rel_slack: float = 0.15) -> bool:
    """estimate in [lo(1 - slack) - k se, hi(1 + slack) + k se]."""
    lo = row.haar_lo * (1 - rel_slack) - n_sigma * row.stderr
    hi = row.haar_hi * (1 + rel_slack) + n_sigma * row.stderr
    return lo <= row.estimate <= hi


def double_correlation(cfg: ExperimentConfig, t: float, s: float, eps1: float, eps2: float):
    """(E[chi_t chi_s], E[chi_t] E[chi_s], excess) for cusp indicators on one sample."""
    if t < s:
        raise DomainError("need t >= s")
    chunks = orbit_lengths(cfg, [float(t), float(s)])
    N = cfg.samples
    both = sum(int(np.count_nonzero((c[0] < eps1) & (c[1] < eps2))) for c in chunks)
    a = sum(int(np.count_nonzero(c[0] < eps1)) for c in chunks)
    b = sum(int(np.count_nonzero(c[1] < eps2)) for c in chunks)
    joint, prod = both / N, (a / N) * (b / N)
    return joint, prod, joint - prod


def correlation_decay(cfg: ExperimentConfig, s: float, gaps: Sequence[float], eps: float):
    """Rows (gap, joint, product, excess, stderr, exp(-delta gap)) along t = s + gap."""
    rows = []
    for g in gaps:
        joint, prod, ex = double_correlation(cfg, s + g, s, eps, eps)
        rows.append((g, joint, prod, ex, _stderr(joint, cfg.samples), math.exp(-cfg.delta * g)))
    return rows


# -- Khintchine scan -------------------------------------------------------------------

@dataclass
class KhintchineRow:
    n: int
    t_n: float
    r_tn: float
    mu_an_hat: float
    stderr: float
    bracket_lo: float
    bracket_hi: float
    in_g0: bool
    cum_hit: float


@dataclass
class KhintchineResult:
    rows: list
    prechecks: dict = field(default_factory=dict)


def psi_prechecks(psi: ApproxFunction, ns: Sequence[int]) -> dict:
    """Normalisation checks on the dyadic levels.

    ``dirichlet``: psi(2^n)^d <= 2^{-n}; ``lower``: psi(2^n) >= 1/(q log^{1.1} q) at q = 2^n.
    """
    d = psi.d
    dirichlet, lower = [], []
    for n in ns:
        q = 2.0**n
        lp = psi.log_eval(q)
        dirichlet.append(d * lp <= -n * math.log(2) + 1e-12)
        lower.append(lp >= -math.log(q) - 1.1 * math.log(math.log(q)) - 1e-12 if n > 1 else True)
    return {"dirichlet": all(dirichlet), "lower": all(lower),
            "dirichlet_fail": [n for n, ok in zip(ns, dirichlet) if not ok],
            "lower_fail": [n for n, ok in zip(ns, lower) if not ok]}


def brackets(cfg: ExperimentConfig, t_n: float, r: float, n: int):
    """Conditional (lo, hi, in_G0) for mu(A_n*) from the supplied constants."""
    d = cfg.d
    C = cusp_constant(cfg.norm_spec)
    e = math.exp(-(d + 1) * r)
    err_t = cfg.C_F * math.exp(-cfg.kappa_star * t_n)
    lo = C * e / 6 - cfg.c_prime * e * e - err_t
    hi = 4 * C * e
    dp = cfg.kappa_star * d * math.log(2) / (d + 1)
    in_g0 = C * e / 12 >= cfg.c_prime * e * e + err_t + cfg.C_F * math.exp(-dp * n)
    return lo, hi, in_g0


def _hits_for_points(xs: np.ndarray, psi: ApproxFunction, ns: list) -> np.ndarray:
    if psi.d == 1:
        hit, _, _ = an_star_batch(xs[:, 0], psi, ns)
        return hit
    out = np.zeros((xs.shape[0], len(ns)), dtype=bool)
    for i, x in enumerate(xs):
        for j, n in enumerate(ns):
            out[i, j] = an_star_test(tuple(float(v) for v in x), psi, n, mode="lattice") is not None
    return out


def khintchine_scan(cfg: ExperimentConfig) -> KhintchineResult:
    """Per dyadic level: empirical mu(A_n*), cumulative hit fraction from n_lo, brackets."""
    if cfg.psi is None:
        raise DomainError("khintchine_scan needs psi")
    ns = list(range(cfg.n_range[0], cfg.n_range[1] + 1))

    def work(i, xs):
        h = _hits_for_points(xs, cfg.psi, ns)
        cum = np.logical_or.accumulate(h, axis=1)
        return h.sum(axis=0).astype(np.int64), cum.sum(axis=0).astype(np.int64)

    parts = _map_chunks(cfg, work)
    hits = sum(p[0] for p in parts)
    cums = sum(p[1] for p in parts)
    N = cfg.samples
    rows = []
    for j, n in enumerate(ns):
        prof = dyadic_profile(cfg.psi, n)
        p = int(hits[j]) / N
        lo, hi, g0 = brackets(cfg, prof.t, prof.r, n)
        rows.append(KhintchineRow(n, prof.t, prof.r, p, _stderr(p, N), lo, hi, g0, int(cums[j]) / N))
    return KhintchineResult(rows, psi_prechecks(cfg.psi, ns))


# -- deterministic averages -------------------------------------------------------------

def make_test(spec: str, d: int, norm: str = "max"):
    """Test functions on lattices: ``one``, ``d1`` or ``cusp:<eps>``.

    Returns (exact_fn, float_fn): the first acts on a RationalMatrix basis,
    the second on an array of shortest lengths.
    """
    ns = NormSpec(d, norm)
    if spec == "one":
        return (lambda B: Fraction(1)), (lambda lens: np.ones_like(lens))
    if spec == "d1":
        return (lambda B: shortest_vector_and_d1(B, ns).d1), (lambda lens: 1.0 / lens)
    if spec.startswith("cusp:"):
        raw = spec[5:]
        try:
            eps = Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"bad cusp parameter {raw!r}") from exc
        if not 0 < eps:
            raise DomainError("cusp parameter must be positive")
        return ((lambda B: Fraction(int(shortest_vector_and_d1(B, ns).length < eps))),
                (lambda lens: (lens < float(eps)).astype(float)))
    raise DomainError(f"unknown test {spec!r}; use one, d1 or cusp:<eps>")


@dataclass(frozen=True)
class Average:
    value: object
    mode: str  # exact | enumerated | sampled
    terms: int


def _float_average(mats: np.ndarray, weights: np.ndarray, float_fn, euclid: bool) -> float:
    lens = shortest_lengths(np.ascontiguousarray(mats), euclid)
    return float(np.dot(weights, float_fn(lens)))


def walk_average(ifs: RationalIfs, n: int, test: str = "one", alpha: Sequence = (),
                 norm: str = "max", samples: int = 100_000, seed: int = 0) -> Average:
    """sum over words w of length n of lambda_w test(a(t_n) u(b_w) x_alpha), t_n = base^n.

    Exact when every matrix involved is rational and the word count is
    small; float enumeration up to 10^7 words; multinomial sampling beyond.
    """
    if not ifs.is_missing_digit():
        raise DomainError("walk_average needs a missing-digit IFS")
    if n < 0:
        raise DomainError("n must be nonnegative")
    d = ifs.dim
    base = int(1 / ifs.rho_max)
    bp = basepoint(ifs, alpha) if alpha else identity_basepoint(d)
    exact_fn, float_fn = make_test(test, d, norm)
    A = sl_lift(Fraction(base) ** n, d)
    count = ifs.size**n
    bpe = bp.exact_matrix()
    if isinstance(A, RationalMatrix) and bpe is not None and count <= EXACT_WORD_CAP and \
            (norm == "max" or d == 1 or test == "one"):
        total = Fraction(0)
        for w in ifs.words(n):
            b = compose_word(ifs, w).shift if n else (Fraction(0),) * d
            total += cylinder_measure(ifs, w) * exact_fn(A @ unipotent(list(b)) @ bpe)
        return Average(total, "exact", count)
    Af = A.to_numpy() if isinstance(A, RationalMatrix) else A
    B = bp.matrix()
    rho, rot, shift, lam = ifs.float_arrays()
    euclid = norm == "euclidean"
    if count <= WORD_ENUMERATION_CAP:
        # b_w = sum_k base^{-(k+1)} digit_k, enumerated in base-|Lambda| order
        idx = np.arange(count, dtype=np.int64)
        digits = np.zeros((count, d))
        weights = np.ones(count)
        for k in range(n):
            letter = (idx // ifs.size ** (n - 1 - k)) % ifs.size
            digits += shift[letter] * float(base) ** (-k)
            weights *= lam[letter]
        mode, terms = "enumerated", count
    else:
        rng = np.random.default_rng(seed)
        letters = rng.choice(ifs.size, size=(samples, n), p=lam)
        digits = np.zeros((samples, d))
        for k in range(n):
            digits += shift[letters[:, k]] * float(base) ** (-k)
        weights = np.full(samples, 1.0 / samples)
        mode, terms = "sampled", samples
    total = 0.0
    for start in range(0, len(weights), CHUNK * 8):
        sl = slice(start, start + CHUNK * 8)
        m = len(weights[sl])
        u = np.broadcast_to(np.eye(d + 1), (m, d + 1, d + 1)).copy()
        u[:, :d, d] = digits[sl]
        total += _float_average(Af @ u @ B, weights[sl], float_fn, euclid)
    return Average(total, mode, terms)


def rational_points_average(p: int, m: int, test: str = "one", basepoint_: Basepoint | None = None,
                            d: int = 1, norm: str = "max") -> Average:
    """p^{-md} sum over k in [0, p^m)^d of test(a(p^m) u(k p^{-m}) x)."""
    if p < 2 or m < 0:
        raise DomainError("need p >= 2 and m >= 0")
    bp = basepoint_ or identity_basepoint(d)
    d = bp.d
    count = p ** (m * d)
    if count > WORD_ENUMERATION_CAP:
        raise DomainError("p^(md) exceeds the enumeration cap 10^7")
    exact_fn, float_fn = make_test(test, d, norm)
    A = sl_lift(Fraction(p) ** m, d)
    bpe = bp.exact_matrix()
    den = p**m
    if isinstance(A, RationalMatrix) and bpe is not None and count <= EXACT_WORD_CAP and \
            (norm == "max" or d == 1 or test == "one"):
        total = Fraction(0)
        for k in np.ndindex(*([den] * d)):
            total += exact_fn(A @ unipotent([Fraction(int(v), den) for v in k]) @ bpe)
        return Average(total / count, "exact", count)
    Af = A.to_numpy() if isinstance(A, RationalMatrix) else A
    grid = np.stack(np.meshgrid(*([np.arange(den) / den] * d), indexing="ij"), axis=-1).reshape(-1, d)
    u = np.broadcast_to(np.eye(d + 1), (count, d + 1, d + 1)).copy()
    u[:, :d, d] = grid
    val = _float_average(Af @ u @ bp.matrix(), np.full(count, 1.0 / count), float_fn, norm == "euclidean")
    return Average(val, "enumerated", count)
