import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from selfsim_khintchine.errors import DomainError
from selfsim_khintchine.transform import (
    ApproxFunction,
    condensation_sums,
    continued_fraction_convergents,
    dirichlet_witness,
    dyadic_profile,
    growth_checks,
    parse_psi,
    profile_at,
    r_of_t,
)

FAMILIES = [ApproxFunction.power(0.5), ApproxFunction.recip(), ApproxFunction.log(2.0)]


def _r_by_root(psi, t):
    # independent route: root of psi(e^{t-r})^d e^{t + d r} = 1 in log form
    d = psi.d
    f = lambda r: d * math.log(psi(math.exp(t - r))) + t + d * r
    return brentq(f, -t / d - math.log(psi(1.0)) - 1e-9, t, xtol=1e-14)


@pytest.mark.parametrize("psi", FAMILIES, ids=lambda p: p.spec())
def test_dyadic_profile_matches_root_finding(psi):
    for n in range(1, 31):
        prof = dyadic_profile(psi, n)
        assert prof.lam == pytest.approx(n * math.log(2), abs=1e-12)
        assert prof.r == pytest.approx(_r_by_root(psi, prof.t), abs=1e-9)
        assert prof.L == pytest.approx(prof.t + prof.r, abs=1e-12)


@given(st.floats(0.0, 3.0), st.integers(1, 30))
def test_power_family_closed_form(tau, n):
    # psi(q) = q^{-tau-1}: r = tau * lam / 2 in dimension one
    prof = dyadic_profile(ApproxFunction.power(tau), n)
    assert prof.r == pytest.approx(tau * n * math.log(2) / 2, abs=1e-9)


def test_reciprocal_gives_zero_r():
    psi = ApproxFunction.recip()
    for n in range(1, 40):
        prof = dyadic_profile(psi, n)
        assert prof.r == 0.0 and math.copysign(1.0, prof.r) == 1.0
        assert prof.t == prof.lam


@pytest.mark.parametrize("psi", FAMILIES, ids=lambda p: p.spec())
def test_r_of_t_inverts_the_defining_equation(psi):
    for t in np.linspace(psi.t0() + 0.1, 20, 15):
        r = r_of_t(psi, t)
        assert r == pytest.approx(_r_by_root(psi, t), abs=1e-9)
        assert profile_at(psi, t).lam == pytest.approx(t - r)


def test_r_of_t_rejects_times_below_t0():
    psi = parse_psi("log:a=1")
    with pytest.raises(DomainError):
        r_of_t(psi, psi.t0() - 1)


@pytest.mark.parametrize("psi", FAMILIES + [ApproxFunction.power(1.0, d=2)], ids=lambda p: f"{p.spec()}-d{p.d}")
def test_growth_checks_pass(psi):
    rep = growth_checks(psi)
    assert rep.ok, rep.violations
    assert rep.checked_pairs == 190


def test_growth_checks_flag_increasing_table():
    psi = ApproxFunction.table([1, 2, 3], [1.0, 0.5, 0.6], validate=False)
    rep = growth_checks(psi, n_max=1)
    assert not rep.ok and rep.violations[0][0] == "psi-monotone"


@pytest.mark.parametrize("psi", FAMILIES, ids=lambda p: p.spec())
def test_condensation_bracket(psi):
    for k in range(1, 14):
        direct, upper, lower = condensation_sums(psi, k)
        assert lower - 1e-12 <= direct <= upper + 1e-12


@pytest.mark.parametrize("text", ["power:tau=0.25", "recip", "log:a=1.5"])
def test_psi_spec_round_trip(text):
    psi = parse_psi(text)
    assert parse_psi(psi.spec()) == psi


@pytest.mark.parametrize("bad", ["power:a=1", "cubic", "log"])
def test_bad_psi_spec(bad):
    with pytest.raises(DomainError):
        parse_psi(bad)


def test_table_psi_from_file(tmp_path):
    f = tmp_path / "psi.txt"
    f.write_text("1 1.0\n2 0.5\n4 0.25\n")
    psi = parse_psi(f"table:{f}")
    assert psi(3.0) == pytest.approx(0.375)
    assert psi(100.0) == 0.25


def _best_approximations(x: Fraction, q_max: int):
    # brute force: q is a best approximation if |qx - p| beats every smaller q
    out, best = [], None
    for q in range(1, q_max + 1):
        p = round(q * x)
        err = abs(q * x - p)
        if best is None or err < best:
            out.append((p, q))
            best = err
    return out


@given(st.fractions(0, 1, max_denominator=500), st.integers(2, 200))
def test_convergents_are_best_approximations(x, q_max):
    conv = continued_fraction_convergents(x, q_max)
    brute = _best_approximations(x, q_max)
    # the last convergent is the best approximation with q <= q_max
    assert abs(conv[-1][1] * x - conv[-1][0]) == abs(brute[-1][1] * x - brute[-1][0])
    assert set(conv[1:]) <= set(brute) | {(p, q) for p, q in conv if q == 1}


@given(st.fractions(-3, 3, max_denominator=10**6), st.integers(1, 18))
def test_dirichlet_witness_d1(x, n):
    p, q = dirichlet_witness(x, n)
    assert 1 <= q <= 2**n
    assert abs(q * x - p) <= Fraction(1, 2**n)


def test_dirichlet_witness_d2():
    x = (math.sqrt(2) - 1, math.pi - 3)
    (p1, p2), q = dirichlet_witness(x, 10, d=2)
    assert 1 <= q <= 2**10
    assert max(abs(q * x[0] - p1), abs(q * x[1] - p2)) <= 2**-5 + 1e-12
