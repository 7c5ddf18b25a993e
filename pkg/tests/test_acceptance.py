"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_shortest_maxnorm, random_bases
from selfsim_khintchine.borelcantelli import BcConstants, bc_verify_and_bound, constant_family, harmonic_family
from selfsim_khintchine.cli import identity_audit, simplex_sweep
from selfsim_khintchine.experiments import ExperimentConfig, khintchine_scan, orbit_statistic, within_bracket
from selfsim_khintchine.ifs import make_ifs, missing_digit_ifs
from selfsim_khintchine.lattice import an_star_test, shortest_vector_and_d1
from selfsim_khintchine.sarith import sl_order
from selfsim_khintchine.spectral import (
    cantor_cutoffs,
    cantor_gap_sum,
    structural_constants,
    threshold_main,
)
from selfsim_khintchine.transform import ApproxFunction, dyadic_profile, growth_checks, r_of_t


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, limit):
        ok = ok and elapsed < limit
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {title}: {detail} "
                  f"({elapsed:.2f}s, limit {limit}s)")
        assert ok, detail
    return emit


def test_acceptance_1_identity_suite(report):
    start = time.perf_counter()
    systems = {
        "base 3": missing_digit_ifs(3, [0, 2]),
        "base 5": missing_digit_ifs(5, [0, 1, 2, 3]),
        "base 7": missing_digit_ifs(7, [0, 1, 2, 3, 4, 5]),
        "mixed 1/2, 1/4": make_ifs([Fraction(1, 2), Fraction(1, 4)], [0, Fraction(3, 4)]),
    }
    ok, parts = True, []
    for seed, (name, ifs) in enumerate(systems.items()):
        checked, failed, mem = identity_audit(ifs, max_word=4, points=20, depth=5, seed=seed)
        good = not failed and mem.membership_ok and mem.injective
        ok &= good
        parts.append(f"{name} {checked} identities, {mem.words_checked} memberships"
                     + ("" if good else " FAILED"))
    report(1, "exact identity suite", ok, "; ".join(parts), time.perf_counter() - start, 10)


def test_acceptance_2_gap_sum(report):
    start = time.perf_counter()
    mismatches = []
    for p, digits in ((3, [0, 2]), (5, [0, 1, 2, 3])):
        for n in range(1, 6):
            for delta in (0, 1, 2):
                g = cantor_gap_sum(p, digits, n, delta, brute_force=True)
                if g.brute is None or g.brute != g.closed:
                    mismatches.append((p, n, delta))
    ref = cantor_gap_sum(3, [0, 2], 2, 1).closed
    ok = not mismatches and ref == Fraction(5, 36)
    report(2, "spectral-gap sum", ok, f"30 exact comparisons, {len(mismatches)} mismatches, "
           f"reference value {ref}", time.perf_counter() - start, 5)


def test_acceptance_3_constants(report):
    start = time.perf_counter()
    kappa = structural_constants(1, 0).kappa
    th = threshold_main(1, 3, 0)
    cutoff = cantor_cutoffs(0).dimension_cutoff
    order = sl_order(1, 3, 1)
    ok = (kappa == Fraction(25, 704) and th.eps0 == Fraction(25, 20416)
          and th.s_star == Fraction(20416, 20441) and abs(float(th.s_star) - 0.998777) < 5e-7
          and th.s_star <= Fraction(9992, 10000) and cutoff == Fraction(3247, 3872) and order == 24)
    # the float eps route converges to the exact limits
    ok &= abs(float(threshold_main(1, 3, 1e-15).s_star) - 20416 / 20441) < 1e-12
    report(3, "constant pipeline", ok, f"kappa={kappa}, eps0={th.eps0}, s*={th.s_star}, "
           f"cutoff={cutoff}, |SL2(F3)|={order}", time.perf_counter() - start, 1)


def test_acceptance_4_transform(report):
    start = time.perf_counter()
    families = [ApproxFunction.power(0.5), ApproxFunction.recip(), ApproxFunction.log(2.0)]
    worst = 0.0
    for psi in families:
        for n in range(1, 31):
            prof = dyadic_profile(psi, n)
            worst = max(worst, abs(prof.r - r_of_t(psi, prof.t)))
    growth = all(growth_checks(psi).ok for psi in families)
    recip = ApproxFunction.recip()
    zero = all(dyadic_profile(recip, n).r == 0.0 for n in range(1, 61))
    ok = worst < 1e-9 and growth and zero
    report(4, "transform suite", ok, f"max |r_dyadic - r(t_n)| = {worst:.2e}, growth {growth}, "
           f"r = 0 for 1/q {zero}", time.perf_counter() - start, 2)


def test_acceptance_5_lattice_oracles(report):
    start = time.perf_counter()
    grid = [Fraction(k, 100) for k in range(100)]
    disagree = 0
    for psi in (ApproxFunction.recip(), ApproxFunction.log(1.0)):
        for x in grid:
            for n in range(1, 13):
                a = an_star_test(x, psi, n, "direct") is not None
                b = an_star_test(x, psi, n, "lattice") is not None
                disagree += a != b
    bases = random_bases(50, seed=2024)
    wrong = sum(shortest_vector_and_d1(m).length != brute_shortest_maxnorm(m) for m in bases)
    ok = disagree == 0 and wrong == 0
    report(5, "lattice oracle equivalence", ok, f"{disagree} A_n* disagreements on 2400 cases, "
           f"{wrong}/50 shortest-vector mismatches", time.perf_counter() - start, 60)


def test_acceptance_6_borel_cantelli(report):
    start = time.perf_counter()
    ok, parts = True, []
    for fam in (constant_family(Fraction(1, 2)), harmonic_family()):
        rep = bc_verify_and_bound(fam, BcConstants(), 2, 500)
        sel = rep.selection
        good = rep.all_hold and sel.separation_long and sel.separation_short and rep.lower_bound > 0.95
        ok &= good
        parts.append(f"{fam.name}: hypotheses {rep.all_hold}, separations "
                     f"{sel.separation_long and sel.separation_short}, bound {rep.lower_bound:.4f}")
    report(6, "converse Borel-Cantelli", ok, "; ".join(parts), time.perf_counter() - start, 30)


def test_acceptance_7_equidistribution(report):
    start = time.perf_counter()
    cfg = ExperimentConfig(ifs=missing_digit_ifs(5, [0, 1, 2, 3]), samples=100_000, seed=0,
                           t_values=(5.0, 7.0), eps_list=(0.2, 0.3), threads=4)
    rows = orbit_statistic(cfg)
    inside = [within_bracket(r) for r in rows]
    detail = ", ".join(f"t={r.t:g} eps={r.eps:g}: {r.estimate:.4f} vs Haar {r.haar_hi:.4f}"
                       for r in rows)
    report(7, "statistical equidistribution", all(inside), detail, time.perf_counter() - start, 300)


def test_acceptance_8_khintchine(report):
    start = time.perf_counter()
    base5 = missing_digit_ifs(5, [0, 1, 2, 3])
    steep = ApproxFunction.power(2.0)  # q^-3
    recip = ApproxFunction.recip()
    conv = [khintchine_scan(ExperimentConfig(ifs=f, psi=steep, samples=10_000, n_range=(15, 25),
                                             seed=1, threads=4)).rows[-1].cum_hit for f in (None, base5)]
    # both scans start at n = 15; from n = 1 the level q = 1 alone would hit every x
    div = [khintchine_scan(ExperimentConfig(ifs=f, psi=recip, samples=10_000, n_range=(15, 25),
                                            seed=1, threads=4)).rows[-1].cum_hit for f in (None, base5)]
    ok = max(conv) < 0.05 and div[0] > 0.9 and div[1] > 0.5
    report(8, "Khintchine dichotomy trend", ok,
           f"q^-3 new hits (lebesgue, base 5) = {conv[0]:.4f}, {conv[1]:.4f}; "
           f"1/q cumulative over 15..25 = {div[0]:.4f}, {div[1]:.4f}", time.perf_counter() - start, 300)


def test_acceptance_9_simplex(report):
    start = time.perf_counter()
    balls, bad, counterexamples, nonempty = simplex_sweep(500, seed=0, d_values=(1, 2), N_max=5)
    ok = bad == 0 and counterexamples == 0
    report(9, "simplex lemma sweep", ok, f"{balls} balls, {nonempty} with rational points, "
           f"{counterexamples} counterexamples", time.perf_counter() - start, 30)
