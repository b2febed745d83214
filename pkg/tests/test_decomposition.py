from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadic_disc.decomposition import (
    chi_s_box,
    chi_s_box_product,
    chi_s_interval,
    epsilon_interval,
    error_term,
    error_term_bound,
    micro_local,
    micro_local_table,
    residual_sup,
    truncated_discrepancy,
    verify_decomposition,
    vol_s,
)
from dyadic_disc.dyadic import DyadicPoint, DyadicScalar, box_volume, ElementaryBox
from dyadic_disc.errors import GuardError
from dyadic_disc.pointsets import PointSet, check_net, column_counts, generate_bitrev_net, random_point_set
from dyadic_disc.theorems import nearest_int_dist

from oracles import brute_local, chi_s_1d, residual_bound_oracle, truncated_oracle, vol_s_1d


def sc(m, w):
    return DyadicScalar(m, w)


def test_chi_s_interval_examples():
    assert chi_s_interval(F(3, 8), F(3, 8), 3) == F(1, 2)
    assert chi_s_interval(F(3, 4), 0, 1) == 1
    # x, y agree on the first two digits but differ afterwards
    assert chi_s_interval(F(5, 16), F(1, 4), 2) == F(1, 2)


def test_epsilon_examples_and_bound():
    assert epsilon_interval(F(3, 8), F(3, 8), 3) == F(-1, 2)
    assert epsilon_interval(F(3, 4), 0, 1) == 0
    for s in (1, 2, 3):
        for xm, ym in product(range(16), repeat=2):
            x, y = sc(xm, 4), sc(ym, 4)
            e = epsilon_interval(y, x, s)
            same = (xm >> (4 - s)) == (ym >> (4 - s))
            assert abs(e) <= (F(1, 2) if same else 0)
            assert 0 <= chi_s_interval(y, x, s) <= 1
            assert chi_s_interval(y, x, s) == chi_s_1d(ym, xm, 4, s)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.data())
def test_chi_s_box_is_a_product(d, s, data):
    w = 5
    Y = DyadicPoint(tuple(data.draw(st.integers(0, 31)) for _ in range(d)), w)
    X = DyadicPoint(tuple(data.draw(st.integers(0, 31)) for _ in range(d)), w)
    v = chi_s_box(Y, X, s)
    assert v == chi_s_box_product(Y, X, s)
    assert 0 <= v <= 1


def test_chi_s_box_diagonal():
    Y = DyadicPoint((3, 5, 6), 3)
    assert chi_s_box(Y, Y, 3) == F(1, 8)
    with pytest.raises(ValueError):
        chi_s_box(Y, DyadicPoint((1,), 3), 2)


def test_vol_s():
    for Y in product(range(8), repeat=2):
        assert vol_s(DyadicPoint(Y, 3), 0) == F(1, 4)
    for s in range(7):
        for ym in range(64):
            v = vol_s(DyadicPoint((ym,), 6), s)
            assert v == vol_s_1d(ym, 6, s)
            assert abs(F(ym, 64) - v) <= F(1, 1 << (s + 1))
    rng = np.random.default_rng(0)
    for _ in range(30):
        d = int(rng.integers(1, 4))
        s = int(rng.integers(0, 6))
        Y = DyadicPoint(tuple(int(v) for v in rng.integers(0, 1 << 10, d)), 10)
        vol = np.prod([F(m, 1 << 10) for m in Y.mantissas])
        assert abs(vol - vol_s(Y, s)) <= F(d, 1 << (s + 1))


def test_micro_local_whole_cube_and_validation():
    D = random_point_set(7, 2, 8, 0)
    assert micro_local(D, 3, DyadicPoint((1, 6), 3), (0, 0)) == 0
    with pytest.raises(ValueError):
        micro_local(D, 3, DyadicPoint((1, 6), 3), (4, 0))
    with pytest.raises(ValueError):
        micro_local_table(D, 2, DyadicPoint((1, 3), 3))


def test_micro_local_brute_count():
    D = random_point_set(11, 2, 6, 4)
    s = 3
    for Z in product(range(8), repeat=2):
        Zp = DyadicPoint(Z, s)
        table = micro_local_table(D, s, Zp)
        for A in product(range(s + 1), repeat=2):
            box = ElementaryBox.pi(A)
            cnt = 0
            for r in D.int_rows():
                m = [(x >> (D.w - s)) ^ z for x, z in zip(r, Z)]
                if all(a == 0 or (mi >> (s - a)) == 1 for mi, a in zip(m, A)):
                    cnt += 1
            expect = cnt - D.N * box_volume(box)
            assert table.value(A) == expect == micro_local(D, s, Zp, A)
            assert abs(expect) >= F(nearest_int_dist(D.N * box_volume(box)))


def test_micro_local_vanishes_on_nets():
    s = 4
    D = generate_bitrev_net(s)
    for Z in product(range(1 << s), repeat=2):
        table = micro_local_table(D, s, DyadicPoint(Z, s))
        for A in product(range(s + 1), repeat=2):
            if sum(A) <= s:
                assert table.value(A) == 0


def test_truncated_empty_set():
    D = PointSet(2, 4, [])
    assert all(truncated_discrepancy(D, 2, DyadicPoint(Y, 2)) == 0 for Y in product(range(4), repeat=2))


def test_truncated_matches_oracle_and_bound():
    rng = np.random.default_rng(1)
    for trial in range(20):
        N = int(rng.integers(1, 9))
        rows = [tuple(int(v) for v in rng.integers(0, 8, 2)) for _ in range(N)]
        D = PointSet(2, 3, rows)
        for s in (1, 2, 3):
            for Y in product(range(8), repeat=2):
                Yp = DyadicPoint(Y, 3)
                t = truncated_discrepancy(D, s, Yp)
                assert t == truncated_oracle(rows, 3, Y, s)
                E = brute_local(rows, 3, [F(y, 8) for y in Y]) - t
                assert E == error_term(D, s, Yp)
                bound = error_term_bound(D, s, Yp)
                assert bound == residual_bound_oracle(rows, 3, Y, s)
                assert abs(E) <= bound


def test_truncated_is_constant_on_cells():
    D = random_point_set(6, 2, 8, 2)
    s = 2
    for Y in product(range(4), repeat=2):
        base = truncated_discrepancy(D, s, DyadicPoint(Y, 2))
        for off in product(range(4), repeat=2):
            Yf = DyadicPoint(tuple((y << 2) | o for y, o in zip(Y, off)), 4)
            assert truncated_discrepancy(D, s, Yf) == base


def test_error_term_bound_examples():
    D = PointSet(1, 4, [[0]])
    for s in range(1, 5):
        assert error_term_bound(D, s, DyadicPoint((0,), 4)) == F(1, 2) * (1 + F(1, 1 << s))
    D = random_point_set(13, 3, 8, 5)
    assert np.all(column_counts(D, 3).sum(axis=1) == 13)


def test_residual_sup_dominates_grid_errors():
    D = random_point_set(5, 2, 5, 6)
    s = 2
    r = residual_sup(D, s)
    for Y in product(range(32), repeat=2):
        assert abs(error_term(D, s, DyadicPoint(Y, 5))) <= r


def test_verify_decomposition():
    D = random_point_set(9, 2, 10, 7)
    rep = verify_decomposition(D, 3)
    assert rep.holds and rep.anchors == 64
    fine = verify_decomposition(D, 2, level=4)
    assert fine.holds and fine.anchors == 256
    with pytest.raises(ValueError):
        verify_decomposition(D, 3, level=2)
    with pytest.raises(GuardError):
        verify_decomposition(D, 9)
