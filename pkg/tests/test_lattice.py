import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_an_star, brute_shortest_maxnorm, primitive_in_box, random_bases
from selfsim_khintchine._accel import python_impl
from selfsim_khintchine.errors import DomainError, UnsupportedDimensionError
from selfsim_khintchine.lattice import (
    NormSpec,
    an_star_batch,
    an_star_d1_batch,
    an_star_levels,
    an_star_test,
    cusp_constant,
    cusp_haar_bracket,
    flow_matrix,
    horosphere_matrix,
    in_cusp,
    lattice_points_in_box,
    lll_reduce,
    shortest_lengths,
    shortest_vector_and_d1,
    siegel_count,
)
from selfsim_khintchine.rational import RationalMatrix
from selfsim_khintchine.transform import ApproxFunction


def test_shortest_vector_of_standard_lattice():
    sv = shortest_vector_and_d1(RationalMatrix.identity(3))
    assert sv.length == 1 and sv.d1 == 1


@pytest.mark.parametrize("m", random_bases(12, seed=11), ids=lambda m: str(m.shape))
def test_shortest_vector_matches_cube_oracle(m):
    sv = shortest_vector_and_d1(m)
    assert sv.length == brute_shortest_maxnorm(m)
    # the returned vector lies in the lattice with the returned coefficients
    cols = list(zip(*m.rows))
    v = tuple(sum(c * col[i] for c, col in zip(sv.coefficients, cols)) for i in range(m.shape[0]))
    assert v == sv.vector
    assert max(abs(a) for a in v) == sv.length


def test_float_and_exact_shortest_agree():
    for m in random_bases(10, seed=5):
        exact = shortest_vector_and_d1(m).length
        approx = shortest_vector_and_d1(m.to_numpy()).length
        assert approx == pytest.approx(float(exact), rel=1e-12)


def test_shortest_lengths_kernel_matches_exact():
    ms = [m for m in random_bases(30, seed=2) if m.shape == (2, 2)]
    arr = np.stack([m.to_numpy() for m in ms])
    got = shortest_lengths(arr)
    want = [float(shortest_vector_and_d1(m).length) for m in ms]
    assert np.allclose(got, want, rtol=1e-12)
    assert np.allclose(python_impl(shortest_lengths)(arr, False), got, rtol=1e-12)


def test_euclidean_head_norm_on_rotated_lattice():
    # Z^2 rotated in the head plane, stacked over 2Z: Euclidean length 1, max norm 0.8
    b = np.array([[0.6, -0.8, 0.0], [0.8, 0.6, 0.0], [0.0, 0.0, 2.0]])
    assert shortest_lengths(b[None], True)[0] == pytest.approx(1.0)
    assert shortest_lengths(b[None], False)[0] == pytest.approx(0.8)
    assert shortest_vector_and_d1(b, NormSpec(2, "euclidean")).length == pytest.approx(1.0)


def test_lll_preserves_determinant():
    for m in random_bases(8, seed=9):
        cols = [list(c) for c in zip(*m.rows)]
        red = lll_reduce(cols)
        assert abs(RationalMatrix([list(r) for r in zip(*red)]).det()) == abs(m.det())


def test_rank_limit():
    with pytest.raises(UnsupportedDimensionError):
        shortest_vector_and_d1(RationalMatrix.identity(5))


def test_singular_basis_rejected():
    with pytest.raises(DomainError):
        shortest_vector_and_d1(RationalMatrix([[1, 2], [2, 4]]))


def test_siegel_count_of_integer_lattice():
    # primitive vectors of Z^2 in (-5/2, 5/2)^2: 24 nonzero minus 8 non-primitive
    assert siegel_count(RationalMatrix.identity(2), [Fraction(5, 2)] * 2) == 16


@pytest.mark.parametrize("m", random_bases(6, seed=21, max_cube=400), ids=lambda m: str(m.shape))
def test_lattice_points_in_box_matches_cube_scan(m):
    den = math.lcm(*(v.denominator for v in m.entries()))
    rows = [[int(v * den) for v in r] for r in m.rows]
    h = [Fraction(3, 2)] * m.shape[0]
    got = {v for v, _ in lattice_points_in_box(m, h)}
    want = {tuple(Fraction(a, den) for a in v) for v in primitive_in_box(rows, [x * den for x in h], 40)}
    assert got == want


def test_cusp_constant_and_bracket():
    norm = NormSpec(1)
    assert cusp_constant(norm) == pytest.approx(12 / math.pi**2, abs=1e-14)
    lo, hi = cusp_haar_bracket(0.3, norm, c_prime=1.0)
    assert hi == pytest.approx(12 * 0.09 / math.pi**2)
    assert lo == pytest.approx(hi - 0.3**4)
    with pytest.raises(DomainError):
        cusp_haar_bracket(1.2, norm)


def test_in_cusp_after_flow():
    # g_t u(0) Z^2 has the vector (0, e^{-t}); exact scale 4 gives length 1/4
    m = flow_matrix(1, scale=4) @ horosphere_matrix(Fraction(0))
    assert in_cusp(m, Fraction(1, 3)) and not in_cusp(m, Fraction(1, 4))


PSIS = [ApproxFunction.recip(), ApproxFunction.power(0.5)]


@pytest.mark.parametrize("psi", PSIS, ids=lambda p: p.spec())
@given(x=st.fractions(0, 1, max_denominator=300), n=st.integers(1, 10))
@settings(max_examples=60)
def test_an_star_modes_match_brute_force(psi, x, n):
    want = brute_an_star(x, psi(2.0**n), n)
    assert an_star_test(x, psi, n, "direct") == want
    assert an_star_test(x, psi, n, "lattice") == want


def test_an_star_rational_in_block_hits():
    psi = ApproxFunction.power(2.0)
    for a, b in [(3, 5), (7, 11), (1, 13), (22, 31)]:
        n = b.bit_length()
        hit = an_star_test(Fraction(a, b), psi, n)
        assert hit is not None and hit[1] <= b


def test_an_star_string_input_is_exact():
    psi = ApproxFunction.recip()
    assert an_star_test("1/3", psi, 3) == an_star_test(Fraction(1, 3), psi, 3)


def test_an_star_d2_modes_agree():
    psi = ApproxFunction.recip(d=2)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = tuple(Fraction(int(v), 97) for v in rng.integers(0, 97, 2))
        for n in (2, 4, 6):
            assert an_star_test(x, psi, n, "direct") == an_star_test(x, psi, n, "lattice")


def test_an_star_rejects_bad_input():
    with pytest.raises(DomainError):
        an_star_test(0.5, ApproxFunction.recip(), 0)
    with pytest.raises(DomainError):
        an_star_test(0.5, ApproxFunction.recip(), 3, mode="other")


def test_batch_kernel_matches_scalar_direct_mode():
    psi = ApproxFunction.log(1.0)
    rng = np.random.default_rng(8)
    xs = rng.random(60)
    ns = list(range(1, 13))
    hit, wp, wq = an_star_batch(xs, psi, ns)
    for i, x in enumerate(xs):
        for j, n in enumerate(ns):
            ref = an_star_test(float(x), psi, n, "direct")
            assert hit[i, j] == (ref is not None)
            if ref is not None:
                assert (wp[i, j], wq[i, j]) == ref
    args = an_star_levels(psi, ns)
    py = python_impl(an_star_d1_batch)(xs[:10], *args)
    assert np.array_equal(py[0], hit[:10])
