import math
from fractions import Fraction as F
from itertools import product

import pytest

from dyadic_disc.errors import CertificationError
from dyadic_disc.mean import MeanDiscrepancyEstimate
from dyadic_disc.pointsets import PointSet, generate_bitrev_net, random_point_set
from dyadic_disc.theorems import (
    _verdict,
    c_inf,
    c_q,
    diagnostics,
    gamma_inf,
    gamma_q,
    j_sigma,
    j_sigma_count,
    lower_bound_22,
    lower_bound_23,
    nearest_int_dist,
    rhs_21,
    theorem_bounds,
    threshold_22,
    threshold_23,
    verify_theorem,
)


def test_nearest_int_dist():
    assert nearest_int_dist(1.75) == 0.25
    assert nearest_int_dist(3) == 0
    assert nearest_int_dist(F(-1, 3)) == F(1, 3)
    for N in range(1, 40):
        for sigma in range(1, 9):
            t = F(N, 1 << sigma)
            if F(1, 4) < t <= F(1, 2):
                assert nearest_int_dist(t) > F(1, 4)


def test_j_sigma_examples():
    r = j_sigma(2, 3, 3)
    assert r.count == 4 and r.bound == 3 and r.bound_applies and r.ok
    assert j_sigma(2, 3, 1).count == 0
    assert not j_sigma(2, 3, 1).bound_applies
    with pytest.raises(ValueError):
        j_sigma(1, 3, 3)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_j_sigma_against_enumeration(k):
    for sigma in range(0, 9):
        for s in range(0, 9):
            brute = sum(1 for A in product(range(s + 1), repeat=k) if sum(A) == sigma)
            assert j_sigma_count(k, sigma, s) == brute
        assert j_sigma(k, sigma, sigma).ok
        assert j_sigma_count(k, sigma, sigma) == j_sigma_count(k, sigma, sigma + 3)


def test_constants():
    assert gamma_q(2, 1) == 2.0 ** -8
    assert gamma_inf(3) == 2.0 ** -7
    assert c_q(2, 1) == 2.0 ** -7
    assert c_inf(3) == 2.0 ** -6
    assert gamma_q(3, 2) == pytest.approx(2.0 ** (-3.5 - 4) / 2)


def test_rhs_21_example():
    assert rhs_21(2, 0, 2, 4) == pytest.approx(2 + math.sqrt(5) / 2, rel=1e-15)


def test_thresholds():
    assert threshold_22(4, 2, 1) == 11
    assert threshold_22(8, 2, 1) == 12
    assert threshold_23(4, 3) == 10
    # non-power-of-two N goes through the float path
    assert threshold_22(5, 2, 1) == math.ceil(math.log2(5) + 5 + 3 + 1)


def test_lower_bounds():
    assert lower_bound_22(4, 2, 1) == pytest.approx(2.0 ** -8 * math.sqrt(2))
    assert lower_bound_23(4, 3) == pytest.approx(2.0 ** -7 * 2 ** 1.5)


def test_theorem_bounds_validation():
    with pytest.raises(ValueError):
        theorem_bounds("2.2", 4, 1, 1)
    with pytest.raises(ValueError):
        theorem_bounds("2.2", 4, 2, 2)
    with pytest.raises(ValueError):
        theorem_bounds("2.3", 4, 2)
    with pytest.raises(ValueError):
        theorem_bounds("2.1", 4, 2, 2)
    with pytest.raises(ValueError):
        theorem_bounds("9.9", 4, 2, 2)
    rep = theorem_bounds("2.2", 4, 2, 1)
    assert rep.s == rep.threshold_s == 11 and rep.kind == "lower"


def test_theorem_21_bitrev_exact():
    rep = verify_theorem(generate_bitrev_net(4), "2.1", q=2)
    assert rep.verdict == "holds"
    assert rep.delta == 0 and rep.s == 4
    assert rep.measured.upper < 2 + math.sqrt(5) / 2
    assert rep.diagnostics["window_ok"]


def test_theorem_21_certification():
    with pytest.raises(CertificationError):
        verify_theorem(random_point_set(5, 2, 8, 0), "2.1", q=2)
    with pytest.raises(CertificationError):
        verify_theorem(generate_bitrev_net(3), "2.1", q=2, s=4)
    bad = PointSet(2, 2, [[0, 0], [0, 1], [2, 2], [3, 3]])
    with pytest.raises(CertificationError):
        verify_theorem(bad, "2.1", q=2, delta=0)
    # the same set is accepted at its own minimal deficiency
    assert verify_theorem(bad, "2.1", q=2).delta > 0


def test_theorem_22_sampled():
    rep = verify_theorem(random_point_set(4, 2, 32, 0), "2.2", q=1, mode="sampled", count=200, seed=1)
    assert rep.s == 11
    assert rep.verdict == "holds"
    assert rep.measured.lower_confidence > 2.0 ** -8 * math.sqrt(2)


def test_theorem_23_sampled():
    rep = verify_theorem(random_point_set(4, 3, 32, 0), "2.3", mode="sampled", count=50, seed=2)
    assert rep.s == 10 and rep.q == math.inf
    assert rep.verdict == "holds"
    assert rep.measured.to_dict()["is_lower_bound"]


def test_below_threshold_reports_threshold_flag():
    rep = verify_theorem(random_point_set(4, 2, 16, 3), "2.2", q=1, s=2)
    assert rep.diagnostics["s_meets_threshold"] is False
    assert rep.verdict == "holds"


def test_verdict_logic():
    def est(value, radius, q=1.0):
        return MeanDiscrepancyEstimate(q, value, "exact", 2, radius)

    assert _verdict("upper", est(1.0, 0.1), 2.0, "exact", True) == "holds"
    assert _verdict("upper", est(3.0, 0.1), 2.0, "exact", True) == "violated"
    assert _verdict("upper", est(2.0, 0.1), 2.0, "exact", True) == "inconclusive-bracket"
    assert _verdict("lower", est(0.5, 0.0), 1.0, "sampled", True) == "inconclusive-sampled"
    assert _verdict("lower", est(0.5, 0.0), 1.0, "exact", False) == "not-applicable"
    assert _verdict("lower", est(2.0, 0.0), 1.0, "exact", False) == "holds"


def test_diagnostics_xi():
    d22 = diagnostics("2.2", 4, 2, 1, 11)
    assert d22["xi_ok"] and d22["j_sigma"] == 4
    d23 = diagnostics("2.3", 4, 3, math.inf, 10)
    # the threshold only forces xi_inf <= 1
    assert d23["xi_inf"] == pytest.approx(0.75)
    assert not d23["xi_ok"]
