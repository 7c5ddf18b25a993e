import math
from fractions import Fraction
from itertools import product

import pytest
import sympy as sp
from hypothesis import assume, given, strategies as st

from selfsim_khintchine.errors import DomainError
from selfsim_khintchine.ifs import make_ifs, missing_digit_ifs, moran_dimension
from selfsim_khintchine.sarith import sl_order
from selfsim_khintchine.spectral import (
    STATED_DIMENSION_THRESHOLD,
    balancing_schedule,
    cantor_condition,
    cantor_cutoffs,
    cantor_gap_sum,
    constants_table,
    gap_hypothesis,
    gap_lhs,
    holder_exponents,
    jensen_equality,
    mass_term,
    rate_constants,
    structural_constants,
    threshold_main,
)


def _gap_sum_pairs(p, k, n, delta):
    # plain double loop over ordered word pairs; d = last differing index (1-based)
    total = Fraction(0)
    w = Fraction(1, k) ** (2 * n)
    for a in product(range(k), repeat=n):
        for b in product(range(k), repeat=n):
            if a != b:
                last = max(i + 1 for i in range(n) if a[i] != b[i])
                total += w * Fraction(1, p ** (delta * last))
    return total


@pytest.mark.parametrize("p,digits", [(3, [0, 2]), (5, [0, 1, 2, 3]), (5, [1, 4]), (7, [0, 3, 6])])
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("delta", [0, 1, 2])
def test_gap_sum_closed_form_matches_pair_loop(p, digits, n, delta):
    g = cantor_gap_sum(p, digits, n, delta, brute_force=True)
    want = _gap_sum_pairs(p, len(digits), n, delta)
    assert g.closed == want and g.brute == want


def test_gap_sum_reference_value():
    assert cantor_gap_sum(3, [0, 2], 2, 1).closed == Fraction(5, 36)


def test_gap_sum_delta_zero_is_pair_fraction():
    # every ordered pair of distinct words has weight one: 1 - k^{-n}
    assert cantor_gap_sum(5, [0, 1, 2], 4, 0).closed == 1 - Fraction(1, 81)


def test_gap_sum_fractional_delta_uses_high_precision():
    v = cantor_gap_sum(3, [0, 2], 3, Fraction(1, 2), brute_force=True)
    assert v.agree or abs(float(v.closed) - float(v.brute)) < 1e-40


def test_gap_sum_skips_huge_enumeration():
    assert cantor_gap_sum(5, [0, 1, 2, 3], 20, 1, brute_force=True).brute_force_skipped


def test_structural_constants_limits():
    sc = structural_constants(1, 0)
    assert sc.kappa == Fraction(25, 704)
    assert (sc.ell, sc.v_d, sc.p, sc.eps_d) == (1, 1, 2, Fraction(1, 2))
    assert structural_constants(2, 0).kappa == Fraction(1, 2) / (2 + 4 + 18 + 4)
    with pytest.raises(DomainError):
        structural_constants(1, Fraction(1, 2))


def test_threshold_limits_by_independent_derivation():
    eps = sp.Symbol("eps")
    kappa = (sp.Rational(25, 64) - eps) / 11
    eps0 = kappa * sp.Rational(1, 2) / (sp.Rational(1, 2) + (4 + 3) * 2)
    s_star = 1 / (1 + eps0)
    th = threshold_main(1, 3, 0)
    assert th.eps0 == Fraction(str(eps0.subs(eps, 0))) == Fraction(25, 20416)
    assert th.s_star == Fraction(str(s_star.subs(eps, 0))) == Fraction(20416, 20441)
    assert float(th.s_star) == pytest.approx(0.998777, abs=5e-7)
    assert th.within_stated
    # largest eps keeping s* at or below the stated threshold
    edge = sp.solve(sp.Eq(s_star, sp.Rational(9992, 10000)), eps)[0]
    assert edge == sp.Rational(10809, 79936)
    assert threshold_main(1, 3, Fraction(10809, 79936)).within_stated
    assert not threshold_main(1, 3, Fraction(10810, 79936)).within_stated


def test_float_eps_approaches_exact_limit():
    assert float(threshold_main(1, 3, 1e-12).s_star) == pytest.approx(20416 / 20441, abs=1e-12)


def test_cantor_cutoff_by_independent_derivation():
    s = sp.Symbol("s")
    kappa, o = sp.Rational(25, 64), sp.Rational(25, 64)
    root = sp.solve(sp.Eq((1 - s) * (o + sp.Rational(3, 2)), 2 * kappa * o), s)[0]
    assert root == sp.Rational(3247, 3872)
    assert cantor_cutoffs(0).dimension_cutoff == Fraction(3247, 3872)


@given(st.fractions(Fraction(25, 32), 1, max_denominator=10**5))
def test_cantor_condition_switches_at_cutoff(s):
    assert cantor_condition(s) == (s > Fraction(3247, 3872))


def test_cantor_condition_on_missing_digit_examples():
    # base 5 with one digit removed has s = log 4/log 5 = 0.861 > 0.8386
    s = moran_dimension(missing_digit_ifs(5, [0, 1, 2, 3]))
    assert cantor_condition(s)
    assert not cantor_condition(math.log(2) / math.log(3))


def test_rho0_formula():
    cc = cantor_cutoffs(0, sigma_prime=0.5)
    op = 3 + 2 + 0.5
    bq = (op - math.sqrt(op * op - 2)) / 2
    assert cc.rho0 == pytest.approx((0.5 - bq) * bq / (1 - bq), abs=1e-15)


def test_holder_exponents_at_zero():
    theta, q = holder_exponents(1, 0)
    assert theta == Fraction(4, 3) and q == Fraction(8, 7)


@pytest.mark.parametrize("base,missing", [(5, 4), (7, 0), (11, 3)])
def test_uniform_missing_digit_rates(base, missing):
    ifs = missing_digit_ifs(base, [i for i in range(base) if i != missing])
    s = moran_dimension(ifs)
    rc = rate_constants(ifs, eps=0)
    assert rc.sigma == pytest.approx((1 - s) / 2, abs=1e-12)
    assert rc.o_eps == pytest.approx(s / 8, abs=1e-12)
    assert rc.upsilon == pytest.approx(7 / 4, abs=1e-12)
    assert rc.L == 3 and rc.A == 6


def test_base5_gap_hypothesis_fails_as_expected():
    gh = gap_hypothesis(missing_digit_ifs(5, [0, 1, 2, 3]))
    assert not gh.passes and gh.lhs > gh.kappa


def test_jensen_equality_gives_zero_sigma():
    ifs = missing_digit_ifs(3, [0, 1, 2])
    assert jensen_equality(ifs)
    assert rate_constants(ifs).sigma == 0.0
    assert gap_lhs(0.0, 0.3, 2.0) == 0.0


@pytest.mark.parametrize("ifs", [missing_digit_ifs(3, [0, 2]),
                                 make_ifs([Fraction(1, 2), Fraction(1, 4)], [0, Fraction(3, 4)],
                                          weights=[Fraction(1, 3), Fraction(2, 3)])])
def test_mass_term_factorises(ifs):
    for m in range(5):
        assert mass_term(ifs, m, verify=True) == mass_term(ifs, 1) ** m


@given(st.floats(0.001, 0.5), st.floats(0.01, 1.0), st.floats(0.5, 3.0), st.floats(0.001, 0.5),
       st.floats(10.0, 1e6))
def test_schedule_positivity_iff_gap_hypothesis(sigma, o, upsilon, kappa, t):
    lhs = gap_lhs(sigma, o, upsilon)
    assume(abs(lhs - kappa) > 1e-9)
    sch = balancing_schedule(sigma, o, upsilon, kappa, t, 0.2)
    assert sch.holds == (lhs < kappa)
    assert sch.tau == pytest.approx(math.log(t) / math.log(5))


def test_constants_table_rows():
    rows = {name: (value, exact) for name, value, exact in constants_table(1, 0)}
    assert rows["kappa"] == (Fraction(25, 704), True)
    assert rows["stated threshold"][0] == STATED_DIMENSION_THRESHOLD
    assert rows["cantor cutoff (eps->0)"][0] == Fraction(3247, 3872)


def test_sl2_f3_order():
    assert sl_order(1, 3, 1) == 24


def test_rational_points_rate_reference_example():
    cc = cantor_cutoffs(0, sigma_prime=0.01)
    assert cc.bq_eps == pytest.approx(0.0019975, abs=1e-6)
    assert cc.rho0 == pytest.approx(0.0009965, abs=1e-6)
