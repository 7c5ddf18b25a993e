"""Rational iterated function systems and their self-similar measures.

An IFS is a finite family of contracting similarities
``f_i(x) = rho_i * O_i x + b_i`` of R^d together with a probability vector
``lambda``.  Words are tuples of letters; the map of a word is the
composition ``f_{w_1} o ... o f_{w_k}``, so its translation part is the
image of the origin.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ._accel import jit
from .errors import AlphabetError, DomainError, EnumerationLimitError
from .rational import RationalMatrix, parse_rational, prime_factors, to_fraction

Word = tuple
Point = tuple  # tuple of Fractions

ENUMERATION_CAP = 10**7
DEFAULT_DEPTH = 64


@dataclass(frozen=True)
class SimilarityMap:
    """x -> rho * rot @ x + shift, with exact rational data."""

    rho: Fraction
    rot: RationalMatrix
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "rho", to_fraction(self.rho))
        object.__setattr__(self, "shift", tuple(to_fraction(v) for v in self.shift))
        d = len(self.shift)
        if self.rot.shape != (d, d):
            raise DomainError("rotation must be d x d for a d-dimensional shift")
        if not 0 < self.rho <= 1:
            raise DomainError(f"contraction ratio must lie in (0, 1], got {self.rho}")
        if not self.rot.is_orthogonal() or self.rot.det() != 1:
            raise DomainError("rotation must be an exact rational element of SO(d)")
        if self.rho == 1 and not (self.rot.is_identity() and all(v == 0 for v in self.shift)):
            raise DomainError("ratio 1 is only allowed for the identity map")

    @classmethod
    def identity(cls, d: int) -> "SimilarityMap":
        return cls(Fraction(1), RationalMatrix.identity(d), (Fraction(0),) * d)

    @property
    def dim(self) -> int:
        return len(self.shift)

    def __call__(self, x: Sequence) -> Point:
        y = self.rot.apply(tuple(to_fraction(v) for v in x))
        return tuple(self.rho * a + b for a, b in zip(y, self.shift))

    def compose(self, inner: "SimilarityMap") -> "SimilarityMap":
        """self o inner."""
        rot = self.rot @ inner.rot
        moved = self.rot.apply(inner.shift)
        shift = tuple(self.rho * a + b for a, b in zip(moved, self.shift))
        return SimilarityMap._unchecked(self.rho * inner.rho, rot, shift)

    @classmethod
    def _unchecked(cls, rho, rot, shift) -> "SimilarityMap":
        m = object.__new__(cls)
        object.__setattr__(m, "rho", rho)
        object.__setattr__(m, "rot", rot)
        object.__setattr__(m, "shift", tuple(shift))
        return m


@dataclass(frozen=True)
class RationalIfs:
    """A rational IFS with weights; ``primes`` is the set S of the IFS."""

    alphabet: tuple
    maps: tuple
    weights: tuple
    primes: frozenset = field(default=frozenset())

    def __post_init__(self):
        if len(self.alphabet) == 0:
            raise DomainError("the alphabet must be nonempty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise DomainError("alphabet letters must be distinct")
        if len(self.maps) != len(self.alphabet) or len(self.weights) != len(self.alphabet):
            raise DomainError("one map and one weight per letter are required")
        weights = tuple(to_fraction(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if any(w <= 0 for w in weights) or sum(weights) != 1:
            raise DomainError("weights must be positive and sum to 1 exactly")
        dims = {m.dim for m in self.maps}
        if len(dims) != 1:
            raise DomainError("all maps must act on the same dimension")
        if any(m.rho >= 1 for m in self.maps):
            raise DomainError("every map of an IFS must be a strict contraction")
        object.__setattr__(self, "primes", frozenset(self.primes) | _natural_primes(self.maps))
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(self.alphabet)})

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def rho_min(self) -> Fraction:
        return min(m.rho for m in self.maps)

    @property
    def rho_max(self) -> Fraction:
        return max(m.rho for m in self.maps)

    def index(self, letter) -> int:
        try:
            return self._index[letter]
        except (KeyError, TypeError):
            raise AlphabetError(f"letter {letter!r} is not in the alphabet {self.alphabet}") from None

    def map_of(self, letter) -> SimilarityMap:
        return self.maps[self.index(letter)]

    def weight_of(self, letter) -> Fraction:
        return self.weights[self.index(letter)]

    def words(self, n: int) -> Iterable[Word]:
        return itertools.product(self.alphabet, repeat=n)

    def is_missing_digit(self) -> bool:
        """True for f_i(x) = (x + i)/p with integer digits i in [0, p)."""
        if self.dim != 1:
            return False
        rhos = {m.rho for m in self.maps}
        if len(rhos) != 1:
            return False
        rho = next(iter(rhos))
        if rho.numerator != 1:
            return False
        base = rho.denominator
        for a, m in zip(self.alphabet, self.maps):
            if m.shift[0] * base != a or not isinstance(a, int) or not 0 <= a < base:
                return False
        return True

    def float_arrays(self):
        """(rho, rot, shift, weights) as float arrays for sampling kernels."""
        rho = np.array([float(m.rho) for m in self.maps])
        rot = np.array([m.rot.to_numpy() for m in self.maps])
        shift = np.array([[float(v) for v in m.shift] for m in self.maps])
        lam = np.array([float(w) for w in self.weights])
        return rho, rot, shift, lam


def _natural_primes(maps) -> frozenset:
    primes = set()
    for m in maps:
        primes |= prime_factors(m.rho.numerator) if m.rho.numerator != 1 else set()
        primes |= prime_factors(m.rho.denominator) if m.rho.denominator != 1 else set()
        for v in list(m.shift) + list(m.rot.entries()):
            if v.denominator != 1:
                primes |= prime_factors(v.denominator)
    return frozenset(primes)


def missing_digit_ifs(base: int, digits: Sequence[int], weights: Sequence | None = None) -> RationalIfs:
    """Maps f_i(x) = (x + i)/base for i in ``digits`` (uniform weights by default)."""
    base = int(base)
    digits = tuple(sorted(int(i) for i in digits))
    if base < 2:
        raise DomainError("base must be at least 2")
    if not digits or len(set(digits)) != len(digits) or not all(0 <= i < base for i in digits):
        raise DomainError(f"digits must be distinct integers in [0, {base})")
    rho = Fraction(1, base)
    one = RationalMatrix.identity(1)
    maps = tuple(SimilarityMap(rho, one, (Fraction(i, base),)) for i in digits)
    if weights is None:
        weights = (Fraction(1, len(digits)),) * len(digits)
    return RationalIfs(digits, maps, tuple(weights))


def make_ifs(rhos, shifts, weights=None, rots=None, alphabet=None) -> RationalIfs:
    """Convenience constructor from parallel lists."""
    k = len(rhos)
    shifts = [tuple(s) if isinstance(s, (tuple, list)) else (s,) for s in shifts]
    d = len(shifts[0])
    if rots is None:
        rots = [RationalMatrix.identity(d)] * k
    if weights is None:
        weights = [Fraction(1, k)] * k
    if alphabet is None:
        alphabet = tuple(range(k))
    maps = tuple(SimilarityMap(to_fraction(r), o, s) for r, o, s in zip(rhos, rots, shifts))
    return RationalIfs(tuple(alphabet), maps, tuple(weights))


# -- words ---------------------------------------------------------------

def compose_word(ifs: RationalIfs, w: Word) -> SimilarityMap:
    """f_w = f_{w_1} o ... o f_{w_k}; the empty word gives the identity."""
    out = SimilarityMap.identity(ifs.dim)
    for letter in w:
        out = out.compose(ifs.map_of(letter))
    return out


def cylinder_measure(ifs: RationalIfs, w: Word) -> Fraction:
    """mu(K_w) = lambda_w, valid when the IFS has null overlaps."""
    out = Fraction(1)
    for letter in w:
        out *= ifs.weight_of(letter)
    return out


def markov_iterate(ifs: RationalIfs, f: Callable, x: Sequence, k: int, *,
                   mode: str = "exact", samples: int = 10000, seed=None):
    """P^k f(x) = sum over words of length k of lambda_w f(f_w(x)).

    ``mode="exact"`` enumerates all |Lambda|^k words with exact arithmetic
    and refuses when that exceeds 10^7 terms.  ``mode="sample"`` returns a
    Monte-Carlo estimate over random words instead.
    """
    if k < 0:
        raise DomainError("number of iterations must be nonnegative")
    x = tuple(to_fraction(v) for v in (x if isinstance(x, (tuple, list)) else (x,)))
    if mode == "exact":
        if ifs.size ** k > ENUMERATION_CAP:
            raise EnumerationLimitError(
                f"{ifs.size}^{k} terms exceed the enumeration cap; use mode='sample'"
            )
        level = [(Fraction(1), x)]
        for _ in range(k):
            level = [(w * lam, m(y)) for w, y in level for m, lam in zip(ifs.maps, ifs.weights)]
        return sum((w * f(y if len(y) > 1 else y[0]) for w, y in level), Fraction(0))
    if mode == "sample":
        rng = np.random.default_rng(seed)
        rho, rot, shift, lam = ifs.float_arrays()
        letters = rng.choice(ifs.size, size=(samples, k), p=lam).astype(np.int64)
        start = np.tile(np.array([float(v) for v in x]), (samples, 1))
        pts = _apply_words(letters, rho, rot, shift, start)
        vals = np.array([f(p if len(p) > 1 else p[0]) for p in pts], dtype=float)
        return float(vals.mean())
    raise DomainError(f"unknown mode {mode!r}")


@jit
def _apply_words(letters, rho, rot, shift, start):
    """Row i: f_{w_1} o ... o f_{w_k} applied to start[i], w = letters[i]."""
    n, depth = letters.shape
    d = shift.shape[1]
    out = start.copy()
    tmp = np.empty(d)
    for i in range(n):
        for j in range(depth - 1, -1, -1):
            a = letters[i, j]
            for r in range(d):
                acc = 0.0
                for c in range(d):
                    acc += rot[a, r, c] * out[i, c]
                tmp[r] = rho[a] * acc + shift[a, r]
            for r in range(d):
                out[i, r] = tmp[r]
    return out


@dataclass(frozen=True)
class SampledPoint:
    word: Word
    point: Point
    bound: Fraction


def truncation_bound(ifs: RationalIfs, depth: int) -> Fraction:
    """Bound on |f_{a|k}(0) - pi(a)| valid for every infinite word a.

    Uses the contraction estimate with starting point 0:
    rho_max^k * max_i |b_i|_1 / (1 - rho_max).  The l1 norm of the shifts
    dominates the Euclidean and max norms, which keeps the bound rational
    when rotations are present.
    """
    beta = max(sum(abs(v) for v in m.shift) for m in ifs.maps)
    r = ifs.rho_max
    return r**depth * beta / (1 - r)


def sample_point(ifs: RationalIfs, depth: int = DEFAULT_DEPTH, seed=None, word: Word | None = None) -> SampledPoint:
    """Exact f_{a|k}(0) for a random (or given) word, with its truncation bound."""
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if word is None:
        rng = np.random.default_rng(seed)
        lam = np.array([float(w) for w in ifs.weights])
        idx = rng.choice(ifs.size, size=depth, p=lam)
        word = tuple(ifs.alphabet[i] for i in idx)
    else:
        word = tuple(word)[:depth]
        if len(word) < depth:
            raise DomainError("the supplied word is shorter than the requested depth")
    return SampledPoint(word, compose_word(ifs, word).shift, truncation_bound(ifs, depth))


def sample_points(ifs: RationalIfs, size: int, depth: int = DEFAULT_DEPTH, seed=None,
                  prefix: Word = ()) -> np.ndarray:
    """Float samples from mu (or from mu restricted to the cylinder of ``prefix``)."""
    if size < 0 or depth < 1:
        raise DomainError("size must be >= 0 and depth >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rho, rot, shift, lam = ifs.float_arrays()
    letters = rng.choice(ifs.size, size=(size, depth), p=lam).astype(np.int64)
    if prefix:
        pre = np.array([ifs.index(a) for a in prefix], dtype=np.int64)
        letters = np.concatenate([np.tile(pre, (size, 1)), letters], axis=1)
    start = np.zeros((size, ifs.dim))
    return _apply_words(letters, rho, rot, shift, start)


# -- prefix sets ---------------------------------------------------------

@dataclass(frozen=True)
class PrefixSet:
    words: tuple
    eps: Fraction

    def total_measure(self, ifs: RationalIfs) -> Fraction:
        return sum((cylinder_measure(ifs, w) for w in self.words), Fraction(0))

    def is_antichain(self) -> bool:
        ws = set(self.words)
        return not any(w[:i] in ws for w in self.words for i in range(len(w)))


def prefix_set(ifs: RationalIfs, eps) -> PrefixSet:
    """Minimal words with eps * rho_min <= rho_w < eps."""
    eps = to_fraction(eps)
    if eps <= 0 or eps > 1:
        raise DomainError("eps must lie in (0, 1]")
    out = []
    stack = [((), Fraction(1))]
    while stack:
        w, r = stack.pop()
        if r < eps:
            out.append(w)
            continue
        for a, m in zip(ifs.alphabet, ifs.maps):
            stack.append((w + (a,), r * m.rho))
    out.sort(key=lambda w: (len(w), tuple(ifs.index(a) for a in w)))
    return PrefixSet(tuple(out), eps)


# -- dimension and cocycles ----------------------------------------------

def moran_dimension(ifs: RationalIfs, tol: float = 1e-12) -> float:
    """The root s of sum_i rho_i^s = 1, found by bisection."""
    rhos = [float(m.rho) for m in ifs.maps]
    if len(rhos) == 1:
        return 0.0

    def g(s):
        return math.fsum(r**s for r in rhos) - 1.0

    lo, hi = 0.0, 1.0
    while g(hi) > 0:
        lo, hi = hi, 2 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cocycle_average(lam: Sequence, tau: Sequence, n: int, verify: bool = False) -> Fraction:
    """(sum_i lambda_i tau_i)^n, the lambda-average of tau_w over words of length n."""
    if len(lam) != len(tau):
        raise DomainError("lambda and tau must be indexed by the same alphabet")
    if n < 0:
        raise DomainError("n must be nonnegative")
    lam = [to_fraction(v) for v in lam]
    tau = [to_fraction(v) for v in tau]
    value = sum((a * b for a, b in zip(lam, tau)), Fraction(0)) ** n
    if verify:
        brute = Fraction(0)
        for w in itertools.product(range(len(lam)), repeat=n):
            term = Fraction(1)
            for i in w:
                term *= lam[i] * tau[i]
            brute += term
        if brute != value:
            raise AssertionError(f"cocycle average mismatch: {brute} != {value}")
    return value


# -- open set condition ----------------------------------------------------

def _image_box(m: SimilarityMap, box):
    """Interval hull of the image of an axis-parallel box."""
    out = []
    for r in range(m.dim):
        lo = hi = m.shift[r]
        for c in range(m.dim):
            a = m.rho * m.rot[r, c]
            lo += min(a * box[c][0], a * box[c][1])
            hi += max(a * box[c][0], a * box[c][1])
        out.append((lo, hi))
    return out


def verify_osc(ifs: RationalIfs, box) -> bool:
    """Certify the open set condition for the open box ``box``.

    ``box`` is a sequence of (lo, hi) pairs.  The check works with interval
    hulls of the images, so it is exact when every rotation is a signed
    permutation and otherwise sufficient (a True answer is always correct).
    """
    box = [(to_fraction(a), to_fraction(b)) for a, b in box]
    if len(box) != ifs.dim or any(a >= b for a, b in box):
        raise DomainError("box must be a nonempty open box of the right dimension")
    images = [_image_box(m, box) for m in ifs.maps]
    for img in images:
        if any(lo < b[0] or hi > b[1] for (lo, hi), b in zip(img, box)):
            return False
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            separated = any(
                a[1] <= b[0] or b[1] <= a[0] for a, b in zip(images[i], images[j])
            )
            if not separated:
                return False
    return True


# -- conditional densities -----------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    estimate: float
    stderr: float
    samples: int


def cylinder_density(ifs: RationalIfs, w: Word, predicate: Callable, samples: int, seed=None,
                     depth: int = DEFAULT_DEPTH) -> DensityEstimate:
    """Empirical mu(A & K_w) / mu(K_w).

    ``predicate`` receives an (samples, d) array of points of K_w and returns
    a boolean array.
    """
    if samples <= 0:
        raise DomainError("at least one sample is required")
    for a in w:
        ifs.index(a)
    pts = sample_points(ifs, samples, depth=depth, seed=seed, prefix=tuple(w))
    hits = np.asarray(predicate(pts), dtype=bool)
    p = float(hits.mean())
    return DensityEstimate(p, math.sqrt(p * (1 - p) / samples), samples)


# -- text format -------------------------------------------------------------

def _split_rationals(text: str) -> list[Fraction]:
    return [parse_rational(t) for t in text.replace(",", " ").split()]


def _parse_missing(body: str) -> RationalIfs:
    fields = {}
    for part in body.replace(";", " ").split():
        if "=" not in part:
            raise DomainError(f"malformed missing-digit field {part!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    try:
        base = int(fields["base"])
        digits = [int(t) for t in fields["digits"].split(",") if t]
    except (KeyError, ValueError) as exc:
        raise DomainError(f"missing-digit description needs base=<p> digits=<list>: {body!r}") from exc
    return missing_digit_ifs(base, digits)


def parse_ifs_text(text: str) -> RationalIfs:
    """Parse the key-value IFS description format.

    Keys: ``dim``, ``alphabet``, ``rho.<i>``, ``shift.<i>``, ``rot.<i>``
    (row-major), ``lambda.<i>``; or a single ``missing_digit: base=<p>
    digits=<list>`` line.
    """
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("missing_digit"):
            body = line[len("missing_digit"):].lstrip(" :=")
            return _parse_missing(body)
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise DomainError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        if key in entries:
            raise DomainError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)

    def get(key):
        if key not in entries:
            raise DomainError(f"missing key {key!r}")
        return entries[key][0]

    d = int(get("dim"))
    alphabet = tuple(int(t) for t in get("alphabet").replace(",", " ").split())
    known = {"dim", "alphabet"}
    rhos, shifts, rots, lams = [], [], [], []
    for a in alphabet:
        rhos.append(parse_rational(get(f"rho.{a}")))
        shift = _split_rationals(get(f"shift.{a}"))
        if len(shift) != d:
            raise DomainError(f"line {entries[f'shift.{a}'][1]}: shift.{a} needs {d} entries")
        shifts.append(tuple(shift))
        known |= {f"rho.{a}", f"shift.{a}"}
        if f"rot.{a}" in entries:
            vals = _split_rationals(get(f"rot.{a}"))
            if len(vals) != d * d:
                raise DomainError(f"line {entries[f'rot.{a}'][1]}: rot.{a} needs {d * d} entries")
            rots.append(RationalMatrix([vals[i * d:(i + 1) * d] for i in range(d)]))
            known.add(f"rot.{a}")
        else:
            rots.append(RationalMatrix.identity(d))
        if f"lambda.{a}" in entries:
            lams.append(parse_rational(get(f"lambda.{a}")))
            known.add(f"lambda.{a}")
    for key, (_, lineno) in entries.items():
        if key not in known:
            raise DomainError(f"line {lineno}: unknown key {key!r}")
    if lams and len(lams) != len(alphabet):
        raise DomainError("give lambda.<i> for every letter or for none")
    return make_ifs(rhos, shifts, lams or None, rots, alphabet)


def ifs_from_spec(spec: str) -> RationalIfs:
    """``missing:base=5,digits=0,1,2,3`` or a path to an IFS description file."""
    if spec.startswith("missing:"):
        body = spec[len("missing:"):]
        base_part, _, digits_part = body.partition("digits=")
        base = base_part.replace("base=", "").strip(" ,")
        return _parse_missing(f"base={base} digits={digits_part.strip()}")
    path = Path(spec)
    if not path.exists():
        raise DomainError(f"IFS file not found: {spec}")
    return parse_ifs_text(path.read_text(encoding="utf-8"))


def format_ifs(ifs: RationalIfs) -> str:
    """Serialise an IFS in the key-value format accepted by parse_ifs_text."""
    from .rational import format_rational as fr

    lines = [f"dim = {ifs.dim}", "alphabet = " + ",".join(str(a) for a in ifs.alphabet)]
    for a, m, w in zip(ifs.alphabet, ifs.maps, ifs.weights):
        lines.append(f"rho.{a} = {fr(m.rho)}")
        lines.append(f"shift.{a} = " + ",".join(fr(v) for v in m.shift))
        if not m.rot.is_identity():
            lines.append(f"rot.{a} = " + ",".join(fr(v) for v in m.rot.entries()))
        lines.append(f"lambda.{a} = {fr(w)}")
    return "\n".join(lines) + "\n"
