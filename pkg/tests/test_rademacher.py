import math
from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadic_disc.dyadic import DyadicPoint, DyadicScalar, rademacher
from dyadic_disc.errors import GuardError
from dyadic_disc.rademacher import (
    INF,
    KhinchinConstants,
    RademacherPolynomial,
    evaluate,
    gram_matrix,
    khinchin_check,
    lemma31_bounds,
    lemma32_bound,
    norm_grid,
    norm_grid_power,
    q2,
    q2_squared,
    q_12,
    q_inf2,
    q_inf2_squared,
    sign_choosing_point,
    slice_q2_squared,
    sup_one_dim,
)


def random_table(rng, k, s, den=6):
    vals = rng.integers(-9, 10, size=(s + 1) ** k)
    arr = np.array([F(int(v), den) for v in vals], dtype=object).reshape((s + 1,) * k)
    return RademacherPolynomial(k, s, arr)


def brute_values(f):
    """f on every grid point, through the scalar rademacher functions."""
    out = []
    for Y in product(range(1 << f.s), repeat=f.k):
        v = F(0)
        for A in product(range(f.s + 1), repeat=f.k):
            c = F(f.coefficient(A))
            if c:
                sign = 1
                for a, y in zip(A, Y):
                    sign *= rademacher(a, DyadicScalar(y, f.s))
                v += c * sign
        out.append(v)
    return out


def test_evaluate_examples():
    r1 = RademacherPolynomial.monomial((1,), 3)
    assert evaluate(r1, DyadicPoint.from_fractions([F(3, 4)])) == -1
    f = RademacherPolynomial.from_dict(1, 2, {(0,): 2, (1,): 1})
    assert evaluate(f, DyadicPoint.from_fractions([F(1, 4)])) == 3
    z = RademacherPolynomial.zeros(2, 2)
    assert all(evaluate(z, DyadicPoint((a, b), 2)) == 0 for a in range(4) for b in range(4))


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(RademacherPolynomial.zeros(2, 2), DyadicPoint((1,), 2))


def test_table_shape_is_checked():
    with pytest.raises(ValueError):
        RademacherPolynomial(2, 2, np.zeros((3, 4)))


def test_grid_values_match_scalar_evaluation():
    rng = np.random.default_rng(1)
    for k, s in [(1, 3), (2, 2), (3, 1)]:
        f = random_table(rng, k, s)
        V, den = f.grid_values()
        assert [F(int(v), den) for v in V.ravel()] == brute_values(f)


def test_norm_grid_examples():
    r1 = RademacherPolynomial.monomial((1,), 4)
    for q in (1, 2, 3, INF):
        assert norm_grid(r1, q) == 1
    assert norm_grid(RademacherPolynomial.from_dict(1, 2, {(0,): 2, (1,): 1}), INF) == 3
    for s in (1, 2, 5):
        assert norm_grid_power(RademacherPolynomial.from_dict(1, s, {(0,): 1, (1,): 1}), 1) == 1


def test_functionals_for_single_coefficient():
    f = RademacherPolynomial.monomial((1, 2), 3, F(-5, 7))
    assert q2(f) == q_inf2(f) == q_12(f) == pytest.approx(5 / 7)


def test_q12_equals_q2_on_one_slice():
    rng = np.random.default_rng(2)
    arr = np.full((4, 4), F(0), dtype=object)
    arr[:, 2] = [F(int(v), 3) for v in rng.integers(-5, 6, 4)]
    f = RademacherPolynomial(2, 3, arr)
    assert q_12(f) == pytest.approx(q2(f), rel=1e-15)


def test_split_functionals_need_two_dimensions():
    f = RademacherPolynomial.monomial((1,), 2)
    with pytest.raises(ValueError):
        q_inf2(f)
    with pytest.raises(ValueError):
        q_12(f)


def test_qinf2_brute_and_triangle_bound():
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = random_table(rng, 2, 3)
        best = F(0)
        for y in range(8):
            tot = F(0)
            for A in range(4):
                phi = sum(F(f.coefficient((A, a))) * rademacher(a, DyadicScalar(y, 3)) for a in range(4))
                tot += phi * phi
            best = max(best, tot)
        assert q_inf2_squared(f) == best
        assert q_inf2(f) <= q_12(f) + 1e-12
        assert sum(slice_q2_squared(f)) == q2_squared(f)


def test_khinchin_constants():
    assert KhinchinConstants(1).alpha_q == 0.5
    assert KhinchinConstants(2).alpha_q == 1
    assert KhinchinConstants(4).beta_q == math.sqrt(2)
    assert KhinchinConstants(1, 3).alpha == 1 / 8


def test_khinchin_examples():
    rep = khinchin_check(RademacherPolynomial.monomial((1,), 3), 1)
    assert rep.ok and rep.lower == 0.5 and rep.norm == 1 and rep.upper == 1
    zero = khinchin_check(RademacherPolynomial.zeros(2, 2), 2)
    assert zero.ok and zero.ratio is None
    with pytest.raises(ValueError):
        khinchin_check(RademacherPolynomial.zeros(1, 2), INF)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(0, 4), st.sampled_from([1, 2, 4]), st.integers(0, 2 ** 20))
def test_khinchin_random_tables(k, s, q, seed):
    f = random_table(np.random.default_rng(seed), k, s)
    assert khinchin_check(f, q).ok


def test_parseval_and_gram():
    for k, s in [(1, 4), (2, 3), (3, 2)]:
        G = gram_matrix(k, s)
        assert np.array_equal(G, (1 << (k * s)) * np.eye((s + 1) ** k, dtype=G.dtype))
    rng = np.random.default_rng(4)
    for _ in range(10):
        f = random_table(rng, 2, 3)
        assert norm_grid_power(f, 2) == q2_squared(f)
    with pytest.raises(GuardError):
        gram_matrix(3, 8)


def test_norm_monotone_in_q():
    rng = np.random.default_rng(5)
    f = random_table(rng, 2, 3)
    norms = [norm_grid(f, q) for q in (0.5, 1, 1.5, 2, 4, INF)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_lemma31_random_and_degenerate():
    rng = np.random.default_rng(6)
    for s in range(1, 6):
        for q in (1, 2):
            assert lemma31_bounds(random_table(rng, 2, s), q).holds
    z = lemma31_bounds(RademacherPolynomial.zeros(2, 2), 1)
    assert z.holds and z.upper == z.lower == 0
    single = lemma31_bounds(RademacherPolynomial.monomial((2, 1), 3, 4), 1)
    assert single.holds and single.norm == 4
    with pytest.raises(ValueError):
        lemma31_bounds(RademacherPolynomial.zeros(1, 2), 1)


def test_lemma32():
    rng = np.random.default_rng(7)
    for d in (2, 3):
        for s in range(1, 5):
            assert lemma32_bound(random_table(rng, d, s)).holds
    rep = lemma32_bound(RademacherPolynomial.monomial((0, 1), 2, -3))
    assert rep.holds and rep.bound == 1.5 and rep.sup_norm == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=8))
def test_one_dimensional_sup_is_l1_and_attained(phi):
    s = len(phi) - 1
    f = RademacherPolynomial(1, s, np.array([F(v) for v in phi], dtype=object))
    assert norm_grid_power(f, INF) == sup_one_dim(phi)
    y0 = sign_choosing_point(phi)
    assert abs(evaluate(f, DyadicPoint((y0.mantissa,), s))) == sup_one_dim(phi)
