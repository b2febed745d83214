"""Truncated characteristic functions, micro-local discrepancies and L = L^(s) + E^(s).

Everything here is exact: counts and volumes are rationals with power-of-two
denominators.  The residual E^(s) is always obtained as L - L^(s); the
coincidence bound is only used to check it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from ._cells import CellGrid
from .discrepancy import local_discrepancy, truncated_grid, uniform_error_bound
from .dyadic import (
    DyadicPoint,
    as_point,
    as_scalar,
    bit,
    kappa,
    level_vectors,
    project,
    rademacher,
    rademacher_multi,
    xor_shift,
)
from .errors import GuardError
from .pointsets import PointSet, project_set
from .rademacher import RademacherPolynomial

__all__ = [
    "chi_interval",
    "chi_s_interval",
    "epsilon_interval",
    "chi_s_box",
    "chi_s_box_product",
    "vol_s",
    "micro_local",
    "MicroLocalTable",
    "micro_local_table",
    "truncated_discrepancy",
    "error_term",
    "error_term_bound",
    "uniform_error_bound",
    "residual_sup",
    "residual_power_integrals",
    "DecompositionReport",
    "verify_decomposition",
]


def _in_pi_level(z, a: int) -> bool:
    """z in Pi_a: digit a is 1 and all earlier digits are 0."""
    if a == 0:
        return True
    return bit(z, a) == 1 and all(bit(z, i) == 0 for i in range(1, a))


def chi_interval(y, x) -> int:
    return int(as_scalar(x).value < as_scalar(y).value)


def chi_s_interval(y, x, s: int) -> Fraction:
    """1/2 - 1/2 sum_{a=1..s} chi(Pi_a, x^(s) xor y^(s)) r_a(y)."""
    y, x = as_scalar(y), as_scalar(x)
    z = xor_shift(project(x, s), project(y, s))
    acc = 0
    for a in range(1, s + 1):
        if _in_pi_level(z, a):
            acc += rademacher(a, y)
    return Fraction(1, 2) - Fraction(acc, 2)


def epsilon_interval(y, x, s: int) -> Fraction:
    return chi_interval(y, x) - chi_s_interval(y, x, s)


def chi_s_box(Y, X, s: int) -> Fraction:
    """2^-d sum_A (-1)^kappa(A) chi(Pi_A, X^(s) xor Y^(s)) r_A(Y), summed term by term."""
    Y, X = as_point(Y), as_point(X)
    if Y.d != X.d:
        raise ValueError("dimension mismatch")
    Z = xor_shift(project(X, s), project(Y, s))
    zc = Z.coords
    total = 0
    for A in level_vectors(Y.d, s):
        if all(_in_pi_level(z, a) for z, a in zip(zc, A)):
            total += (-1) ** kappa(A) * rademacher_multi(A, Y)
    return Fraction(total, 1 << Y.d)


def chi_s_box_product(Y, X, s: int) -> Fraction:
    Y, X = as_point(Y), as_point(X)
    if Y.d != X.d:
        raise ValueError("dimension mismatch")
    out = Fraction(1)
    for y, x in zip(Y.coords, X.coords):
        out *= chi_s_interval(y, x, s)
    return out


def vol_s(Y, s: int) -> Fraction:
    """2^-d sum_{A in I^d_s} (-1)^kappa(A) vol(Pi_A) r_A(Y); the sum factors by axis."""
    Y = as_point(Y)
    out = Fraction(1)
    for y in Y.coords:
        acc = Fraction(1)
        for a in range(1, s + 1):
            acc -= Fraction(rademacher(a, y), 1 << a)
        out *= acc / 2
    return out


# micro-local discrepancies ---------------------------------------------

def _shifted_projection(D: PointSet, s: int, Z) -> np.ndarray:
    Z = as_point(Z)
    if Z.d != D.d:
        raise ValueError("dimension mismatch")
    if Z.precision > s and any(m & ((1 << (Z.precision - s)) - 1) for m in Z.mantissas):
        raise ValueError("Z must lie in Q^d(2^s)")
    zs = project(Z, s)
    P = project_set(D, s).mantissas
    return P ^ np.array(zs.mantissas, dtype=np.uint64)


def _levels(P: np.ndarray, s: int) -> np.ndarray:
    """pi_level of every entry of an s-bit mantissa array."""
    P = P.astype(np.int64)
    _, e = np.frexp(P.astype(float))
    return np.where(P == 0, 0, s - e + 1).astype(np.int64)


def micro_local(D: PointSet, s: int, Z, A) -> Fraction:
    """|(D xor Z) ∩ Pi_A| - N vol(Pi_A), with D taken at level s."""
    A = tuple(int(a) for a in A)
    if len(A) != D.d or any(not 0 <= a <= s for a in A):
        raise ValueError(f"level vector {A} outside I^{D.d}_{s}")
    if D.N == 0:
        return Fraction(0)
    lev = _levels(_shifted_projection(D, s, Z), s)
    inside = np.ones(D.N, dtype=bool)
    for j, a in enumerate(A):
        if a:
            inside &= lev[:, j] == a
    return int(inside.sum()) - Fraction(D.N, 1 << sum(A))


@dataclass(frozen=True, eq=False)
class MicroLocalTable:
    """lambda_A[D xor Z] for all A in I^d_s, stored as integer box counts."""

    s: int
    d: int
    N: int
    Z: DyadicPoint
    counts: np.ndarray

    def value(self, A) -> Fraction:
        A = tuple(A)
        return int(self.counts[A]) - Fraction(self.N, 1 << sum(A))

    def scaled(self) -> np.ndarray:
        """2^(ds) lambda_A as an integer array."""
        tot = self.d * self.s
        shape = (self.s + 1,) * self.d
        levels = np.indices(shape).sum(axis=0)
        if self.N.bit_length() + tot + 1 <= 62:
            return self.counts * (1 << tot) - self.N * (np.int64(1) << (tot - levels))
        expect = np.vectorize(lambda a: 1 << (tot - a), otypes=[object])(levels)
        return self.counts.astype(object) * (1 << tot) - self.N * expect

    def values(self) -> np.ndarray:
        """Object array of exact rationals."""
        den = 1 << (self.d * self.s)
        sc = self.scaled()
        out = np.empty(sc.shape, dtype=object)
        for idx in np.ndindex(sc.shape):
            out[idx] = Fraction(int(sc[idx]), den)
        return out

    def polynomial(self) -> RademacherPolynomial:
        """F^(s)[D, Z, .] = 2^-d sum_A (-1)^kappa(A) lambda_A r_A."""
        vals = self.values()
        for idx in np.ndindex(vals.shape):
            vals[idx] = vals[idx] * (-1) ** kappa(idx) / (1 << self.d)
        return RademacherPolynomial(self.d, self.s, vals)

    def support(self) -> list[tuple[int, ...]]:
        sc = self.scaled()
        return [tuple(int(a) for a in idx) for idx in zip(*np.nonzero(sc != 0))]

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "d": self.d,
            "N": self.N,
            "Z": [Fraction(m, 1 << self.Z.precision) for m in self.Z.mantissas],
            "nonzero": [{"A": list(A), "lambda": self.value(A)} for A in self.support()],
        }


def box_counts(P: np.ndarray, s: int, d: int) -> np.ndarray:
    """Counts of points of an s-bit mantissa array in every Pi_A."""
    counts = np.zeros((s + 1,) * d, dtype=np.int64)
    if P.shape[0] == 0:
        return counts
    lev = _levels(P, s)
    # a point with levels (l_1..l_d) lies in Pi_A for every A with a_j in {0, l_j}
    for mask in product((0, 1), repeat=d):
        sel = lev * np.array(mask, dtype=np.int64)
        keep = np.all((lev > 0) | (np.array(mask) == 0), axis=1)
        np.add.at(counts, tuple(sel[keep].T), 1)
    return counts


def micro_local_table(D: PointSet, s: int, Z) -> MicroLocalTable:
    Z = as_point(Z)
    P = _shifted_projection(D, s, Z)
    return MicroLocalTable(s, D.d, D.N, project(Z, s), box_counts(P, s, D.d))


# decomposition ---------------------------------------------------------

def truncated_discrepancy(D: PointSet, s: int, Y) -> Fraction:
    """L^(s)[D, Y] from the micro-local table of D^(s) xor Y^(s)."""
    Y = as_point(Y)
    if Y.d != D.d:
        raise ValueError("dimension mismatch")
    if D.N == 0:
        return Fraction(0)
    table = micro_local_table(D, s, project(Y, s))
    sc = table.scaled()
    total = 0
    for A in level_vectors(D.d, s):
        v = int(sc[A])
        if v:
            total += (-1) ** kappa(A) * v * rademacher_multi(A, Y)
    return Fraction(total, 1 << (D.d * s + D.d))


def error_term(D: PointSet, s: int, Y) -> Fraction:
    return local_discrepancy(D, Y) - truncated_discrepancy(D, s, Y)


def error_term_bound(D: PointSet, s: int, Y) -> Fraction:
    """(1/2)(sum_j delta_j + d N 2^-s) with delta_j the coordinate coincidence counts."""
    Y = as_point(Y)
    ys = project(Y, s).mantissas
    P = project_set(D, s).mantissas
    coincide = sum(int(np.sum(P[:, j] == np.uint64(ys[j]))) for j in range(D.d))
    return Fraction(coincide, 2) + Fraction(D.d * D.N, 1 << (s + 1))


def _residual_grid(D: PointSet, s: int):
    values, e = truncated_grid(D, s)
    grid = CellGrid(D.mantissas, D.w, s_grid=s)
    idx = [grid.grid_cell_index(j, s) for j in range(D.d)]
    offset = values[np.ix_(*idx)].astype(object)
    return grid, (offset, e)


def residual_sup(D: PointSet, s: int) -> Fraction:
    """sup over Y in [0,1)^d of |E^(s)[D, Y]|, exact."""
    grid, off = _residual_grid(D, s)
    return grid.sup_abs(off)


def residual_power_integrals(D: PointSet, s: int, qs) -> dict:
    """q -> (lower, upper) for the integral of |E^(s)[D, Y]|^q over Y."""
    grid, off = _residual_grid(D, s)
    return grid.exact_power_integrals(list(qs), off)


# verification over a grid of anchors ------------------------------------

MAX_ANCHORS = 1 << 16


@dataclass(frozen=True)
class DecompositionReport:
    """L = L^(s) + E checked on every anchor of Q^d(2^level)."""

    s: int
    level: int
    anchors: int
    table_mismatches: int
    bound_violations: int
    max_abs_error: Fraction
    max_bound_ratio: float

    @property
    def holds(self) -> bool:
        return self.table_mismatches == 0 and self.bound_violations == 0

    def to_dict(self) -> dict:
        return dict(s=self.s, level=self.level, anchors=self.anchors,
                    table_mismatches=self.table_mismatches, bound_violations=self.bound_violations,
                    max_abs_error=self.max_abs_error, max_bound_ratio=self.max_bound_ratio,
                    verdict="holds" if self.holds else "violated")


def verify_decomposition(D: PointSet, s: int, level: int | None = None) -> DecompositionReport:
    """Compare the micro-local form of L^(s) with its direct grid form, and |E| with its bound.

    Anchors run over Q^d(2^level), level >= s (default s).
    """
    level = s if level is None else level
    if level < s:
        raise ValueError("the anchor level must be at least s")
    if D.d * level > 16:
        raise GuardError(f"2^{D.d * level} anchors exceed the limit {MAX_ANCHORS}")
    values, e = truncated_grid(D, s)
    mism = viol = 0
    max_e = Fraction(0)
    ratio = 0.0
    for idx in np.ndindex(*([1 << level] * D.d)):
        Y = DyadicPoint(tuple(int(i) for i in idx), level)
        Ls = truncated_discrepancy(D, s, Y)
        coarse = tuple(i >> (level - s) for i in idx)
        if Ls != Fraction(int(values[coarse]), 1 << e):
            mism += 1
        E = local_discrepancy(D, Y) - Ls
        b = error_term_bound(D, s, Y)
        if abs(E) > b:
            viol += 1
        max_e = max(max_e, abs(E))
        if b:
            ratio = max(ratio, float(abs(E) / b))
    return DecompositionReport(s, level, 1 << (D.d * level), mism, viol, max_e, ratio)
