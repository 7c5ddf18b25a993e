import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_shortest_maxnorm
from selfsim_khintchine.errors import DomainError
from selfsim_khintchine.experiments import (
    CHUNK,
    ExperimentConfig,
    OrbitRow,
    _sample_chunk,
    basepoint,
    double_correlation,
    identity_basepoint,
    khintchine_scan,
    make_test,
    orbit_lengths,
    orbit_statistic,
    psi_prechecks,
    rational_points_average,
    sl_lift,
    walk_average,
    within_bracket,
)
from selfsim_khintchine.ifs import missing_digit_ifs
from selfsim_khintchine.lattice import an_star_test, shortest_vector_and_d1
from selfsim_khintchine.rational import RationalMatrix
from selfsim_khintchine.transform import ApproxFunction

CANTOR = missing_digit_ifs(3, [0, 2])
BASE5 = missing_digit_ifs(5, [0, 1, 2, 3])


def _cantor_walk_oracle(n):
    # a(3^n) lifts to diag(3^{n/2}, 3^{-n/2}); for even n the lattice is rational
    c = Fraction(3) ** (n // 2)
    total = Fraction(0)
    for w in product([0, 2], repeat=n):
        b = sum(Fraction(a, 3 ** (k + 1)) for k, a in enumerate(w))
        m = RationalMatrix([[c, c * b], [0, 1 / c]])
        total += Fraction(1, 2**n) / brute_shortest_maxnorm(m)
    return total


def test_walk_average_exact_value():
    av = walk_average(CANTOR, 2, "d1")
    assert av.mode == "exact"
    assert av.value == _cantor_walk_oracle(2) == Fraction(17, 8)


def test_walk_average_of_constant_test_is_one():
    assert walk_average(CANTOR, 3, "one").value == 1
    av = walk_average(missing_digit_ifs(2, [0, 1]), 24, "one", samples=2000)
    assert av.mode == "sampled" and av.value == pytest.approx(1.0)


def test_walk_average_float_enumeration_matches_rescaled_oracle():
    # base 2, n = 3: a(8) lifts to 8^{-1/2} diag(8, 1), so lengths are 8^{-1/2} times rational ones
    ifs = missing_digit_ifs(2, [0, 1])
    av = walk_average(ifs, 3, "d1")
    assert av.mode == "enumerated"
    want = 0.0
    for w in product([0, 1], repeat=3):
        b = sum(Fraction(a, 2 ** (k + 1)) for k, a in enumerate(w))
        length = brute_shortest_maxnorm(RationalMatrix([[8, 8 * b], [0, 1]]))
        want += (1 / 8) * math.sqrt(8) / float(length)
    assert av.value == pytest.approx(want, rel=1e-12)


def test_rational_points_average_cusp_value():
    av = rational_points_average(3, 2, "cusp:1/2")
    brute = Fraction(0)
    for k in range(9):
        m = RationalMatrix([[3, Fraction(3 * k, 9)], [0, Fraction(1, 3)]])
        brute += int(brute_shortest_maxnorm(m) < Fraction(1, 2))
    assert av.value == brute / 9 == Fraction(1, 3)


def test_rational_points_average_float_route():
    av = rational_points_average(2, 3, "one")
    assert av.mode == "enumerated" and av.value == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [(0,), (3, 1), (2, 2, 0)])
def test_basepoints_are_unimodular(alpha):
    bp = basepoint(BASE5, alpha)
    assert bp.is_unimodular()
    assert abs(np.linalg.det(bp.matrix())) == pytest.approx(1.0, rel=1e-12)


def test_basepoint_exact_when_root_is_rational():
    ifs = missing_digit_ifs(4, [0, 3])
    bp = basepoint(ifs, (3,))
    m = bp.exact_matrix()
    assert m is not None and m.det() == 1
    assert identity_basepoint(2).exact_matrix() == RationalMatrix.identity(3)


def test_sl_lift():
    assert sl_lift(Fraction(9), 1) == RationalMatrix.diag([3, Fraction(1, 3)])
    assert sl_lift(8, 2) == RationalMatrix.diag([2, 2, Fraction(1, 4)])
    f = sl_lift(2, 1)
    assert isinstance(f, np.ndarray) and np.linalg.det(f) == pytest.approx(1.0)


def test_orbit_lengths_match_exact_shortest_vector():
    cfg = ExperimentConfig(samples=150, seed=4, t_values=(3.0,))
    lens = orbit_lengths(cfg, [3.0])[0][0]
    xs = _sample_chunk(cfg, 0, 150)
    for x, ln in zip(xs[:40, 0], lens[:40]):
        b = np.array([[math.exp(3.0), math.exp(3.0) * x], [0.0, math.exp(-3.0)]])
        assert ln == pytest.approx(shortest_vector_and_d1(b).length, rel=1e-12)


def test_horocycle_at_time_zero_is_never_in_the_cusp():
    cfg = ExperimentConfig(samples=500, t_values=(0.0,), eps_list=(0.5, 0.9))
    rows = orbit_statistic(cfg)
    assert [r.estimate for r in rows] == [0.0, 0.0]
    assert all(v == pytest.approx(1.0) for _, _, v in orbit_statistic(cfg, "d1"))


def test_orbit_statistic_is_deterministic_across_threads():
    kw = dict(ifs=BASE5, samples=2 * CHUNK + 500, t_values=(4.0,), eps_list=(0.3,), seed=9)
    a = orbit_statistic(ExperimentConfig(threads=1, **kw))
    b = orbit_statistic(ExperimentConfig(threads=3, **kw))
    c = orbit_statistic(ExperimentConfig(threads=1, **{**kw, "seed": 10}))
    assert a == b and a != c


def test_cusp_frequency_monotone_in_eps():
    cfg = ExperimentConfig(ifs=BASE5, samples=3000, t_values=(5.0,), eps_list=(0.1, 0.2, 0.3, 0.4))
    est = [r.estimate for r in orbit_statistic(cfg)]
    assert est == sorted(est)


def test_within_bracket_rule():
    row = OrbitRow(5.0, 0.3, 0.1, 0.001, 0.09, 0.1094)
    assert within_bracket(row)
    assert not within_bracket(OrbitRow(5.0, 0.3, 0.2, 0.001, 0.09, 0.1094))
    assert within_bracket(OrbitRow(5.0, 0.3, 0.2, 0.001, 0.09, 0.1094), rel_slack=1.0)


def test_double_correlation_on_the_diagonal():
    cfg = ExperimentConfig(samples=1000, seed=2)
    joint, prod, excess = double_correlation(cfg, 4.0, 4.0, 0.3, 0.3)
    p = orbit_statistic(ExperimentConfig(samples=1000, seed=2, t_values=(4.0,), eps_list=(0.3,)))[0].estimate
    assert joint == p and prod == pytest.approx(p * p) and excess == pytest.approx(p - p * p)
    with pytest.raises(DomainError):
        double_correlation(cfg, 1.0, 2.0, 0.3, 0.3)


def test_khintchine_scan_matches_pointwise_direct_test():
    psi = ApproxFunction.recip()
    cfg = ExperimentConfig(psi=psi, samples=120, n_range=(1, 7), seed=5)
    res = khintchine_scan(cfg)
    xs = _sample_chunk(cfg, 0, 120)[:, 0]
    hits = np.array([[an_star_test(float(x), psi, n) is not None for n in range(1, 8)] for x in xs])
    assert [r.mu_an_hat for r in res.rows] == list(hits.mean(axis=0))
    cum = np.logical_or.accumulate(hits, axis=1).mean(axis=0)
    assert [r.cum_hit for r in res.rows] == list(cum)


def test_psi_prechecks():
    ns = range(2, 12)
    assert psi_prechecks(ApproxFunction.recip(), ns)["dirichlet"]
    steep = psi_prechecks(ApproxFunction.power(2.0), ns)
    assert steep["dirichlet"] and not steep["lower"] and steep["lower_fail"] == list(ns)
    assert not psi_prechecks(ApproxFunction.power(-0.5), ns)["dirichlet"]


@pytest.mark.parametrize("kw", [dict(samples=10), dict(eps_list=(1.5,)), dict(n_range=(0, 3)),
                                dict(threads=0), dict(alpha=(1,))])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        ExperimentConfig(**kw)


@pytest.mark.parametrize("spec", ["two", "cusp:x", "cusp:-1"])
def test_make_test_rejects_unknown(spec):
    with pytest.raises(DomainError):
        make_test(spec, 1)


@given(st.integers(0, 3))
@settings(max_examples=4)
def test_exact_cusp_walk_is_a_probability(n):
    v = walk_average(CANTOR, 2 * n, "cusp:1/3").value
    assert 0 <= v <= 1 and isinstance(v, Fraction)
