"""Command-line front end.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines; flags
given on the command line override the file.  Exit codes: 0 success,
2 invalid input, 3 a checked hypothesis fails (outputs are still written),
64 unknown subcommand.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import random
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError

EXIT_OK, EXIT_DOMAIN, EXIT_HYPOTHESIS, EXIT_USAGE = 0, 2, 3, 64

SUBCOMMANDS = ("constants", "check-hypothesis", "gap-sum", "identity-audit", "equidist",
               "khintchine", "walk", "rational-avg", "bc-verify", "simplex", "profile")

# -- config values -------------------------------------------------------------------


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise DomainError(f"expected an integer, got {text!r}") from exc


def _float(text: str) -> float:
    try:
        v = float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"expected a number, got {text!r}") from exc
    if not math.isfinite(v):
        raise DomainError(f"expected a finite number, got {text!r}")
    return v


def _exact(text: str) -> Fraction:
    """Integers and p/q only; decimals are rejected where exactness matters."""
    from .rational import parse_rational
    return parse_rational(text)


def _list(parse):
    def inner(text: str):
        items = [s.strip() for s in text.split(",") if s.strip()]
        if not items:
            raise DomainError("expected a nonempty comma separated list")
        return tuple(parse(s) for s in items)
    return inner


def _str(text: str) -> str:
    if not text:
        raise DomainError("expected a nonempty value")
    return text


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"expected a boolean, got {text!r}")


# key -> (parser, check or None)
_nonneg = (lambda v: v >= 0, "must be nonnegative")
_pos = (lambda v: v >= 1, "must be at least 1")
KEYS = {
    "ifs": (_str, None),
    "psi": (_str, None),
    "d": (_int, _pos),
    "eps": (_list(_float), (lambda v: all(x >= 0 for x in v), "must be nonnegative")),
    "L": (_int, _pos),
    "t": (_list(_float), None),
    "n_min": (_int, _pos),
    "n_max": (_int, _pos),
    "samples": (_int, (lambda v: v >= 100, "must be at least 100")),
    "seed": (_int, _nonneg),
    "threads": (_int, _pos),
    "alpha": (_list(_int), None),
    "C_F": (_float, _nonneg),
    "kappa_star": (_float, (lambda v: v > 0, "must be positive")),
    "delta": (_float, _nonneg),
    "c_prime": (_float, _nonneg),
    "norm": (_str, (lambda v: v in ("max", "euclidean"), "must be max or euclidean")),
    "base": (_int, (lambda v: v >= 2, "must be at least 2")),
    "digits": (_list(_int), None),
    "n": (_int, _nonneg),
    "gap_delta": (_exact, _nonneg),
    "brute_force": (_bool, None),
    "max_word": (_int, _nonneg),
    "points": (_int, _pos),
    "depth": (_int, _nonneg),
    "test": (_str, None),
    "p": (_int, (lambda v: v >= 2, "must be at least 2")),
    "m": (_int, _nonneg),
    "family": (_str, None),
    "mu": (_str, None),
    "pair": (_str, None),
    "M": (_int, _pos),
    "N": (_int, _pos),
    "C_sharp": (_exact, _pos),
    "C_star": (_exact, _pos),
    "eps_star": (_exact, (lambda v: v > 0, "must be positive")),
    "D": (_exact, _pos),
    "sigma": (_float, (lambda v: 0 < v < 1, "must lie in (0, 1)")),
    "a": (_float, (lambda v: v > 0, "must be positive")),
    "center": (_list(_exact), None),
    "radius": (_exact, (lambda v: v > 0, "must be positive")),
    "sweep": (_int, _nonneg),
    "x": (_list(_exact), None),
    "out": (_str, None),
}


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise DomainError(f"unknown key {key!r}")
    parse, check = KEYS[key]
    try:
        v = parse(text.strip())
    except DomainError as exc:
        raise DomainError(f"{key}: {exc}") from exc
    if check is not None and not check[0](v):
        raise DomainError(f"{key} {check[1]}")
    return v


@dataclass
class RunSpec:
    """A validated invocation: subcommand, typed parameters and output directory."""

    subcommand: str
    values: dict = field(default_factory=dict)
    out: str = "."

    def to_text(self) -> str:
        lines = [f"subcommand = {self.subcommand}", f"out = {self.out}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(self.values.items())]
        return "\n".join(lines) + "\n"

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_config_text(text: str, subcommand: str | None = None) -> RunSpec:
    """``key = value`` lines; ``#`` starts a comment; errors name the line."""
    sub, out, values = subcommand, ".", {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise DomainError(f"line {lineno}: expected 'key = value'")
        try:
            if key == "subcommand":
                sub = value.strip()
                if sub not in SUBCOMMANDS:
                    raise DomainError(f"unknown subcommand {sub!r}")
            elif key == "out":
                out = parse_value("out", value)
            else:
                if key in values:
                    raise DomainError(f"duplicate key {key!r}")
                values[key] = parse_value(key, value)
        except DomainError as exc:
            raise DomainError(f"line {lineno}: {exc}") from exc
    if sub is None:
        raise DomainError("config names no subcommand")
    spec = RunSpec(sub, values, out)
    _validate(spec)
    return spec


def parse_config(path) -> RunSpec:
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"config file not found: {path}")
    return parse_config_text(p.read_text(encoding="utf-8"))


def _validate(spec: RunSpec):
    v = spec.values
    if "n_min" in v and "n_max" in v and v["n_min"] > v["n_max"]:
        raise DomainError("n_min exceeds n_max")
    for key in ("family",):
        if key in v and not Path(v[key]).is_file():
            raise DomainError(f"{key}: file not found: {v[key]}")
    ifs = v.get("ifs")
    if ifs and not ifs.startswith("missing:") and ifs != "lebesgue" and not Path(ifs).is_file():
        raise DomainError(f"ifs: file not found: {ifs}")


# -- output --------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (Fraction, float, tuple)):
        return _fmt(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows, seed) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    buf.write(f"# seed={seed}, version={__version__}\n")
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


# -- argument parsing ------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser):
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--seed", default=argparse.SUPPRESS, help="master seed")
    p.add_argument("--threads", default=argparse.SUPPRESS, help="worker threads")
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value config file")


# subcommand -> list of (flag, key, help, is_switch)
OPTIONS = {
    "constants": [("--d", "d", "dimension"), ("--eps", "eps", "eps (single value)"),
                  ("--L", "L", "index exponent L")],
    "check-hypothesis": [("--ifs", "ifs", "IFS spec"), ("--d", "d", "dimension"),
                         ("--eps", "eps", "eps"), ("--L", "L", "index exponent L")],
    "gap-sum": [("--base", "base", "prime base"), ("--digits", "digits", "digit set"),
                ("--n", "n", "word length"), ("--delta", "gap_delta", "exponent (rational)"),
                ("--brute-force", "brute_force", "also run the pair oracle")],
    "identity-audit": [("--ifs", "ifs", "IFS spec"), ("--max-word", "max_word", "max word length"),
                       ("--points", "points", "random rational points"),
                       ("--depth", "depth", "membership/injectivity depth")],
    "equidist": [("--ifs", "ifs", "IFS spec or 'lebesgue'"), ("--t", "t", "flow times"),
                 ("--eps", "eps", "cusp sizes"), ("--samples", "samples", "sample count"),
                 ("--alpha", "alpha", "basepoint word"), ("--norm", "norm", "max or euclidean"),
                 ("--c-prime", "c_prime", "C'_d")],
    "khintchine": [("--ifs", "ifs", "IFS spec or 'lebesgue'"), ("--psi", "psi", "approximation function"),
                   ("--n-min", "n_min", "first level"), ("--n-max", "n_max", "last level"),
                   ("--samples", "samples", "sample count"), ("--C-F", "C_F", "C_F"),
                   ("--kappa-star", "kappa_star", "kappa_*"), ("--delta", "delta", "delta"),
                   ("--c-prime", "c_prime", "C'_d")],
    "walk": [("--ifs", "ifs", "missing-digit IFS"), ("--n-max", "n_max", "largest n"),
             ("--test", "test", "one, d1 or cusp:<eps>"), ("--alpha", "alpha", "basepoint word")],
    "rational-avg": [("--p", "p", "base"), ("--m", "m", "largest exponent"),
                     ("--test", "test", "one, d1 or cusp:<eps>"), ("--d", "d", "dimension")],
    "bc-verify": [("--family", "family", "family description file"), ("--mu", "mu", "mu(E_n) expression"),
                  ("--pair", "pair", "independent or pair expression"), ("--M", "M", "first index"),
                  ("--N", "N", "last index"), ("--C-sharp", "C_sharp", "C_#"),
                  ("--C-star", "C_star", "C_*"), ("--eps-star", "eps_star", "eps_*"),
                  ("--D", "D", "D"), ("--sigma", "sigma", "sigma"), ("--a", "a", "a")],
    "simplex": [("--center", "center", "ball center, rational"), ("--radius", "radius", "radius, rational"),
                ("--N", "N", "denominator bound"), ("--d", "d", "dimension"),
                ("--sweep", "sweep", "number of random balls instead")],
    "profile": [("--psi", "psi", "approximation function"), ("--d", "d", "dimension"),
                ("--n-max", "n_max", "largest level"), ("--x", "x", "rational point for a lattice scan")],
}
SWITCHES = {"brute_force"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfsim", description=__doc__.splitlines()[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp)
        for flag, key, help_ in OPTIONS[name]:
            if key in SWITCHES:
                sp.add_argument(flag, dest=key, action="store_const", const="true",
                                default=argparse.SUPPRESS, help=help_)
            else:
                sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=help_)
    return parser


def _find_subcommand(argv):
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("--out", "--seed", "--threads", "--config"):
            skip = True
            continue
        if a.startswith("-"):
            continue
        return a
    return None


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    args = vars(ns).copy()
    sub = args.pop("subcommand")
    config = args.pop("config", None)
    spec = parse_config(config) if config else RunSpec(sub)
    if config and spec.subcommand != sub:
        spec = RunSpec(sub, spec.values, spec.out)
    if "out" in args:
        spec.out = parse_value("out", args.pop("out"))
    for key, text in args.items():
        spec.values[key] = parse_value(key, text)
    _validate(spec)
    return spec


# -- handlers -------------------------------------------------------------------

def _load_ifs(spec: RunSpec, default="missing:base=5,digits=0,1,2,3"):
    from .ifs import ifs_from_spec
    text = spec.get("ifs", default)
    return None if text == "lebesgue" else ifs_from_spec(text)


def _say(msg: str):
    print(msg)


def cmd_constants(spec: RunSpec) -> int:
    from .spectral import DEFAULT_EPS, constants_table, structural_constants
    d = spec.get("d", 1)
    eps = spec.get("eps", (DEFAULT_EPS,))[0]
    rows = constants_table(d, eps, spec.get("L", 3))
    rows.append(("kappa (eps->0)", structural_constants(d, 0).kappa, True))
    for name, value, exact in rows:
        _say(f"{name:26s} {_fmt(value) if not isinstance(value, float) else repr(value):>24s}"
             f"{'  ~' + format(float(value), '.12g') if exact and isinstance(value, Fraction) else ''}")
    write_csv(Path(spec.out) / "constants.csv", ["name", "value", "exact"], rows, spec.get("seed", 0))
    return EXIT_OK


def cmd_check_hypothesis(spec: RunSpec) -> int:
    from .spectral import DEFAULT_EPS, gap_hypothesis
    ifs = _load_ifs(spec)
    if ifs is None:
        raise DomainError("check-hypothesis needs an IFS")
    eps = spec.get("eps", (DEFAULT_EPS,))[0]
    gh = gap_hypothesis(ifs, spec.get("d"), eps, spec.get("L"))
    rc = gh.rates
    rows = [("sigma", rc.sigma), ("o_eps", rc.o_eps), ("upsilon", rc.upsilon), ("q_eps", rc.q_eps),
            ("r", rc.r), ("L", rc.L), ("A", rc.A), ("gap lhs", gh.lhs), ("kappa", gh.kappa),
            ("gap margin", gh.margin), ("gap hypothesis", gh.passes),
            ("thickness lhs", gh.thickness_lhs), ("eps0", gh.eps0), ("thickness passes", gh.thickness_passes)]
    for name, value in rows:
        _say(f"{name:18s} {_cell(value)}")
    write_csv(Path(spec.out) / "hypothesis.csv", ["name", "value"], rows, spec.get("seed", 0))
    return EXIT_OK if gh.passes else EXIT_HYPOTHESIS


def cmd_gap_sum(spec: RunSpec) -> int:
    from .spectral import cantor_gap_sum
    base = spec.get("base", 3)
    digits = spec.get("digits", (0, 2))
    n = spec.get("n", 2)
    delta = spec.get("gap_delta", Fraction(1))
    gs = cantor_gap_sum(base, list(digits), n, delta, brute_force=spec.get("brute_force", False))
    _say(f"closed form: {_cell(gs.closed)}")
    rows = [("closed", gs.closed)]
    if gs.brute is not None:
        _say(f"brute force: {_cell(gs.brute)}")
        rows.append(("brute", gs.brute))
        if not gs.agree:
            _say("MISMATCH between closed form and brute force")
            return EXIT_HYPOTHESIS
    elif spec.get("brute_force", False):
        _say("brute force skipped: pair count above the cap")
    write_csv(Path(spec.out) / "gap_sum.csv", ["route", "value"], rows, spec.get("seed", 0))
    return EXIT_OK


def _random_rational_points(rng: random.Random, count: int, d: int):
    return [tuple(Fraction(rng.randint(-1000, 1000), rng.randint(1, 1000)) for _ in range(d))
            for _ in range(count)]


def identity_audit(ifs, max_word: int, points: int, depth: int, seed: int):
    """(checked, failed words, membership report)."""
    from .sarith import lattice_membership_and_freeness, verify_key_identity_points
    rng = random.Random(seed)
    xs = _random_rational_points(rng, points, ifs.dim)
    checked, failed = 0, []
    for k in range(max_word + 1):
        for w in ifs.words(k):
            for x, ok in zip(xs, verify_key_identity_points(ifs, w, xs)):
                checked += 1
                if not ok:
                    failed.append((w, x))
    return checked, failed, lattice_membership_and_freeness(ifs, depth)


def cmd_identity_audit(spec: RunSpec) -> int:
    ifs = _load_ifs(spec)
    if ifs is None:
        raise DomainError("identity-audit needs an IFS")
    checked, failed, mem = identity_audit(ifs, spec.get("max_word", 4), spec.get("points", 20),
                                          spec.get("depth", 3), spec.get("seed", 0))
    rows = [("key identity", checked, len(failed)), ("membership", mem.words_checked, len(mem.failures)),
            ("injectivity", mem.depth, len(mem.collisions))]
    write_csv(Path(spec.out) / "identity_audit.csv", ["check", "count", "failures"], rows, spec.get("seed", 0))
    if failed or not mem.membership_ok or not mem.injective:
        _say(f"identity failures: {len(failed)}, membership failures: {len(mem.failures)}, "
             f"collisions: {len(mem.collisions)}")
        return EXIT_HYPOTHESIS
    _say(f"all identities verified ({checked} identity checks, {mem.words_checked} memberships, "
         f"injective at depth {mem.depth})")
    return EXIT_OK


def _experiment_config(spec: RunSpec):
    from .experiments import ExperimentConfig
    from .transform import parse_psi
    ifs = _load_ifs(spec)
    d = ifs.dim if ifs is not None else spec.get("d", 1)
    psi = parse_psi(spec.get("psi", "recip"), d)
    return ExperimentConfig(ifs=ifs, psi=psi, d=d, t_values=spec.get("t", (5.0,)),
                            n_range=(spec.get("n_min", 1), spec.get("n_max", 10)),
                            samples=spec.get("samples", 10_000), seed=spec.get("seed", 0),
                            eps_list=spec.get("eps", (0.2,)), alpha=spec.get("alpha", ()),
                            C_F=spec.get("C_F", 1.0), kappa_star=spec.get("kappa_star", 0.05),
                            delta=spec.get("delta", 0.05), c_prime=spec.get("c_prime", 0.0),
                            norm=spec.get("norm", "max"), threads=spec.get("threads", 1))


def cmd_equidist(spec: RunSpec) -> int:
    from .experiments import orbit_statistic
    cfg = _experiment_config(spec)
    rows = orbit_statistic(cfg, "cusp")
    out = [(r.t, r.eps, r.estimate, r.stderr, r.haar_lo, r.haar_hi) for r in rows]
    path = write_csv(Path(spec.out) / "equidist.csv", ["t", "eps", "estimate", "stderr", "haar_lo", "haar_hi"],
                     out, cfg.seed)
    for r in rows:
        _say(f"t={r.t:g} eps={r.eps:g} estimate={r.estimate:.5f} +- {r.stderr:.5f}  haar=[{r.haar_lo:.5f}, {r.haar_hi:.5f}]")
    _say(f"wrote {path}")
    return EXIT_OK


def cmd_khintchine(spec: RunSpec) -> int:
    from .experiments import khintchine_scan
    cfg = _experiment_config(spec)
    res = khintchine_scan(cfg)
    header = ["n", "t_n", "r_tn", "mu_an_hat", "stderr", "bracket_lo", "bracket_hi", "in_g0", "cum_hit"]
    rows = [(r.n, r.t_n, r.r_tn, r.mu_an_hat, r.stderr, r.bracket_lo, r.bracket_hi, r.in_g0, r.cum_hit)
            for r in res.rows]
    path = write_csv(Path(spec.out) / "khintchine.csv", header, rows, cfg.seed)
    pc = res.prechecks
    _say(f"psi normalisation: dirichlet={pc['dirichlet']} lower={pc['lower']}")
    _say("brackets are conditional on the supplied constants C_F, kappa_*, C'_d")
    _say(f"final cumulative hit fraction {res.rows[-1].cum_hit:.4f}; wrote {path}")
    return EXIT_OK


def cmd_walk(spec: RunSpec) -> int:
    from .experiments import walk_average
    ifs = _load_ifs(spec, "missing:base=3,digits=0,2")
    if ifs is None:
        raise DomainError("walk needs a missing-digit IFS")
    test = spec.get("test", "one")
    rows = []
    for n in range(spec.get("n_max", 3) + 1):
        av = walk_average(ifs, n, test, spec.get("alpha", ()), seed=spec.get("seed", 0))
        rows.append((n, av.value, av.mode))
        _say(f"n={n} value={_cell(av.value)} ({av.mode})")
    write_csv(Path(spec.out) / "walk.csv", ["n", "value", "mode"], rows, spec.get("seed", 0))
    return EXIT_OK


def cmd_rational_avg(spec: RunSpec) -> int:
    from .experiments import identity_basepoint, rational_points_average
    p, test, d = spec.get("p", 3), spec.get("test", "one"), spec.get("d", 1)
    rows = []
    for m in range(spec.get("m", 2) + 1):
        av = rational_points_average(p, m, test, identity_basepoint(d))
        rows.append((m, av.value, av.mode))
        _say(f"m={m} value={_cell(av.value)} ({av.mode})")
    write_csv(Path(spec.out) / "rational_avg.csv", ["n", "value", "mode"], rows, spec.get("seed", 0))
    return EXIT_OK


def cmd_bc_verify(spec: RunSpec) -> int:
    from .borelcantelli import BcConstants, bc_verify_and_bound, family_from_file, parse_family_text, report_rows
    if "family" in spec.values:
        fam = family_from_file(spec.get("family"))
    else:
        fam = parse_family_text(f"mu = {spec.get('mu', '1/n')}\npair = {spec.get('pair', 'independent')}\n")
    consts = BcConstants(spec.get("C_sharp", 1), spec.get("C_star", 2), spec.get("eps_star", 1),
                         spec.get("D", 1), spec.get("sigma", 0.5), spec.get("a", 1.0))
    rep = bc_verify_and_bound(fam, consts, spec.get("M", 2), spec.get("N", 500))
    rows = report_rows(rep)
    write_csv(Path(spec.out) / "bc_report.csv", ["hypothesis", "range", "holds", "worst_pair", "margin"],
              rows, spec.get("seed", 0))
    for r in rows:
        _say(",".join(_cell(x) for x in r))
    _say(f"chung-erdos bound {rep.chung_erdos:.6f}; "
         f"exact union {'n/a' if rep.exact_union is None else format(float(rep.exact_union), '.6f')}; "
         f"lower bound {rep.lower_bound:.6f}; K = {rep.K}")
    ok = rep.all_hold and rep.selection.separation_long and rep.selection.separation_short
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def random_precondition_ball(rng: random.Random, d: int, N: int):
    """A random rational ball meeting the volume precondition."""
    from .borelcantelli import simplex_precondition
    center = tuple(Fraction(rng.randint(0, 10**6), 10**6) for _ in range(d))
    # bias centres towards rationals of small height so the sets are nonempty
    if rng.random() < 0.5:
        q = rng.randint(1, max(1, N - 1))
        center = tuple(Fraction(rng.randint(0, q), q) + Fraction(rng.randint(-50, 50), 10**5) for _ in range(d))
    bound = Fraction(1, math.factorial(d) * N ** (d + 1))
    r = bound / 3 if d == 1 else Fraction(1, math.isqrt(int(4 / bound)) + 1)
    r *= Fraction(rng.randint(1, 1000), 1000)
    assert simplex_precondition(r, N, d)
    return center, r


def simplex_sweep(count: int, seed: int, d_values=(1, 2), N_max: int = 5):
    """(balls, precondition failures, counterexamples, nonempty sets)."""
    from .borelcantelli import simplex_check
    rng = random.Random(seed)
    bad, ce, nonempty = 0, 0, 0
    for _ in range(count):
        d = rng.choice(d_values)
        N = rng.randint(1, N_max)
        c, r = random_precondition_ball(rng, d, N)
        res = simplex_check(c, r, N, d)
        bad += not res.precondition
        ce += res.counterexample is not None
        nonempty += bool(res.points)
    return count, bad, ce, nonempty


def cmd_simplex(spec: RunSpec) -> int:
    from .borelcantelli import simplex_check
    if spec.get("sweep"):
        n, bad, ce, nonempty = simplex_sweep(spec.get("sweep"), spec.get("seed", 0))
        _say(f"{n} balls, {nonempty} with rational points, {ce} counterexamples")
        write_csv(Path(spec.out) / "simplex.csv", ["balls", "precondition_failures", "counterexamples", "nonempty"],
                  [(n, bad, ce, nonempty)], spec.get("seed", 0))
        return EXIT_OK if ce == 0 else EXIT_HYPOTHESIS
    center = spec.get("center", (Fraction(1, 3),))
    res = simplex_check(center, spec.get("radius", Fraction(1, 20)), spec.get("N", 3), spec.get("d", len(center)))
    _say(f"precondition: {res.precondition}; points: {', '.join(_fmt(p) for p in res.points) or 'none'}")
    if res.hyperplane is not None:
        a, b = res.hyperplane
        _say(f"hyperplane: normal ({_fmt(a)}), offset {_fmt(b)}")
    else:
        _say(f"counterexample: {res.counterexample}")
    rows = [(_fmt(p),) for p in res.points]
    write_csv(Path(spec.out) / "simplex.csv", ["point"], rows, spec.get("seed", 0))
    if not res.precondition:
        return EXIT_HYPOTHESIS
    return EXIT_OK if res.counterexample is None else EXIT_HYPOTHESIS


def cmd_profile(spec: RunSpec) -> int:
    from .lattice import an_star_test
    from .transform import dyadic_profile, growth_checks, parse_psi
    d = spec.get("d", 1)
    psi = parse_psi(spec.get("psi", "recip"), d)
    n_max = spec.get("n_max", 20)
    rows = []
    for n in range(1, n_max + 1):
        pr = dyadic_profile(psi, n)
        rows.append((n, pr.t, pr.r, pr.lam, pr.L))
    write_csv(Path(spec.out) / "profile.csv", ["n", "t_n", "r_tn", "lam", "L"], rows, spec.get("seed", 0))
    gr = growth_checks(psi)
    _say(f"growth checks: {'pass' if gr.ok else 'fail'}")
    if "x" in spec.values:
        x = spec.get("x")
        scan = []
        for n, t, r, _, _ in rows:
            if n > 40:
                break
            w = an_star_test(x if d > 1 else x[0], psi, n, mode="lattice")
            q, p = (w[1], w[0]) if w else ("", "")
            scan.append((n, t, r, q, p, w is not None))
        write_csv(Path(spec.out) / "lattice_scan.csv", ["n", "t_n", "r_tn", "q", "p", "hit"], scan,
                  spec.get("seed", 0))
        _say(f"hits at levels {[row[0] for row in scan if row[5]]}")
    return EXIT_OK if gr.ok else EXIT_HYPOTHESIS


HANDLERS = {
    "constants": cmd_constants, "check-hypothesis": cmd_check_hypothesis, "gap-sum": cmd_gap_sum,
    "identity-audit": cmd_identity_audit, "equidist": cmd_equidist, "khintchine": cmd_khintchine,
    "walk": cmd_walk, "rational-avg": cmd_rational_avg, "bc-verify": cmd_bc_verify,
    "simplex": cmd_simplex, "profile": cmd_profile,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    sub = _find_subcommand(argv)
    if sub not in SUBCOMMANDS:
        parser.print_usage(sys.stderr)
        print(f"unknown or missing subcommand {sub!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    ns = parser.parse_args(argv)
    try:
        spec = spec_from_args(ns)
        start = time.perf_counter()
        code = HANDLERS[spec.subcommand](spec)
        print(f"[{spec.subcommand}] done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
        return code
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main():
    sys.exit(run())
