"""Local discrepancy and L_q discrepancies: exact where possible, bracketed otherwise.

Every result carries a method tag and an error radius such that the true
value lies in [value - error_radius, value + error_radius].

The L_2 closed form (Warnock's formula) comes from expanding the square:
    L^2 = (sum_X chi(B_Y, X))^2 - 2 N vol(B_Y) sum_X chi(B_Y, X) + N^2 vol(B_Y)^2,
and integrating each term over Y in [0,1)^d:
    int chi(B_Y, X) chi(B_Y, X') dY = prod_j (1 - max(x_j, x'_j)),
    int vol(B_Y) chi(B_Y, X) dY    = prod_j (1 - x_j^2) / 2,
    int vol(B_Y)^2 dY              = 3^-d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import _grid
from ._cells import CellGrid
from .dyadic import DyadicPoint, DyadicScalar
from .errors import GuardError
from .pointsets import PointSet, column_counts

INF = math.inf

EXACT = "exact-closed-form"
CRITICAL = "exact-critical-grid"
GRID = "grid-decomposition"
CELL_BRACKET = "critical-cell-bracket"

LINF_GUARD = 10 ** 7
EXACT_CELL_LIMIT = 20_000
FLOAT_CELL_LIMIT = 1 << 22


@dataclass(frozen=True)
class DiscrepancyResult:
    """An L_q discrepancy with its evaluation method and error radius."""

    q: float
    value: float
    method: str
    error_radius: float = 0.0
    s_used: int | None = None
    exact: Fraction | None = None
    power: Fraction | None = None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def lower(self) -> float:
        return max(self.value - self.error_radius, 0.0)

    @property
    def upper(self) -> float:
        return self.value + self.error_radius

    @property
    def is_exact(self) -> bool:
        return self.error_radius == 0

    def to_dict(self) -> dict:
        out = {
            "q": self.q,
            "value": self.value,
            "method": self.method,
            "error_radius": self.error_radius,
            "s_used": self.s_used,
        }
        if self.exact is not None:
            out["value_exact"] = self.exact
        if self.power is not None:
            out["power_exact"] = self.power
        out.update(self.extras)
        return out


# local discrepancy ------------------------------------------------------

def _thresholds(Y, d: int, w: int) -> list[int]:
    """Integers t_j with x_j < y_j  <=>  mantissa_j < t_j at precision w."""
    if isinstance(Y, DyadicScalar):
        Y = [Y.value]
    elif isinstance(Y, DyadicPoint):
        Y = list(Y.values)
    else:
        Y = [v.value if isinstance(v, DyadicScalar) else Fraction(v) for v in Y]
    if len(Y) != d:
        raise ValueError(f"dimension mismatch: set has d={d}, anchor has {len(Y)}")
    out = []
    for y in Y:
        if not 0 <= y <= 1:
            raise ValueError(f"anchor coordinate {y} outside [0, 1]")
        out.append(math.ceil(y * (1 << w)))
    return out


def local_discrepancy(D: PointSet, Y) -> Fraction:
    """|D ∩ [0,y)| - N vol[0,y), exact; coordinates of Y may equal 1."""
    ts = _thresholds(Y, D.d, D.w)
    inside = np.ones(D.N, dtype=bool)
    for j, t in enumerate(ts):
        if t < (1 << D.w):
            inside &= D.mantissas[:, j] < np.uint64(t)
    return int(inside.sum()) - D.N * _volume(Y, D.d)


def _volume(Y, d: int) -> Fraction:
    if isinstance(Y, DyadicScalar):
        return Y.value
    if isinstance(Y, DyadicPoint):
        vals = Y.values
    else:
        vals = [v.value if isinstance(v, DyadicScalar) else Fraction(v) for v in Y]
    out = Fraction(1)
    for v in vals:
        out *= v
    return out


# L_2 ---------------------------------------------------------------------

def _effective(D: PointSet) -> tuple[list[list[int]], int]:
    """Mantissa columns with shared trailing zero bits removed."""
    cols = [[int(v) for v in D.mantissas[:, j]] for j in range(D.d)]
    acc = 0
    for c in cols:
        for v in c:
            acc |= v
    tz = (acc & -acc).bit_length() - 1 if acc else D.w
    return [[v >> tz for v in c] for c in cols], D.w - tz


def l2_squared(D: PointSet) -> Fraction:
    """Exact L_2[D]^2 by the closed form."""
    N, d = D.N, D.d
    if N == 0:
        return Fraction(0)
    cols, W = _effective(D)
    top = 1 << W
    if d * W + 2 * N.bit_length() + 2 <= 62:
        t = [top - np.array(c, dtype=np.int64) for c in cols]
        prod = np.ones((N, N), dtype=np.int64)
        for tj in t:
            prod = prod * np.minimum.outer(tj, tj)
        S1 = int(prod.sum())
    else:
        t = [np.array([top - v for v in c], dtype=object) for c in cols]
        prod = np.ones((N, N), dtype=object)
        for tj in t:
            prod = prod * np.where(tj[:, None] < tj[None, :], tj[:, None], tj[None, :])
        S1 = int(prod.sum())
    S2 = 0
    sq = top * top
    for i in range(N):
        p = 1
        for j in range(d):
            p *= sq - cols[j][i] ** 2
        S2 += p
    return (Fraction(S1, 1 << (d * W))
            - Fraction(2 * N * S2, (1 << d) << (2 * d * W))
            + Fraction(N * N, 3 ** d))


def l2_exact(D: PointSet) -> DiscrepancyResult:
    sq = l2_squared(D)
    return DiscrepancyResult(2.0, math.sqrt(sq), EXACT, 0.0, None, None, sq)


# L_infinity --------------------------------------------------------------

def linf_exact(D: PointSet) -> DiscrepancyResult:
    """Exact sup |L[D, Y]| over the critical grid with one-sided box counts."""
    if D.N == 0:
        return DiscrepancyResult(INF, 0.0, CRITICAL, exact=Fraction(0))
    if D.N ** D.d > LINF_GUARD:
        raise GuardError(
            f"N^d = {D.N}^{D.d} exceeds {LINF_GUARD}; use the grid method (lq_grid with q=inf)"
        )
    v = CellGrid(D.mantissas, D.w).sup_abs()
    return DiscrepancyResult(INF, float(v), CRITICAL, exact=v)


# grid decomposition ------------------------------------------------------

def uniform_error_bound(D: PointSet, s: int) -> Fraction:
    """(1/2)(sum_j max_m N_{j,m} + d N 2^-s), a bound on sup_Y |E^(s)[D, Y]|."""
    if D.N == 0:
        return Fraction(0)
    counts = column_counts(D, s)
    return Fraction(int(counts.max(axis=1).sum()), 2) + Fraction(D.d * D.N, 1 << (s + 1))


def truncated_grid(D: PointSet, s: int) -> tuple[np.ndarray, int]:
    """(values, e) with values / 2^e = L^(s)[D, Y] for Y in Q^d(2^s)."""
    return _grid.truncated_grid_scaled(D.mantissas, D.w, D.d, s), _grid.scale_exponent(D.d, s)


def grid_norm(values: np.ndarray, e: int, q) -> tuple[float, Fraction | None]:
    """(||v||_{s,q}, exact q-th power mean when q is a positive integer)."""
    if q == INF:
        m = Fraction(int(np.abs(values).max()), 1 << e) if values.size else Fraction(0)
        return float(m), m
    qf = float(q)
    if qf.is_integer() and qf >= 1:
        p = _grid.grid_power_mean(values, int(qf), e)
        return float(p) ** (1.0 / qf), p
    return _grid.grid_power_mean_float(values, qf, e) ** (1.0 / qf), None


def lq_grid(D: PointSet, q, s: int) -> DiscrepancyResult:
    """||L^(s)[D, .]||_{s,q} with the uniform bound on the residual as radius."""
    if not (q == INF or q > 0):
        raise ValueError("q must be positive")
    values, e = truncated_grid(D, s)
    V, p = grid_norm(values, e, q)
    R = float(uniform_error_bound(D, s))
    if q == INF or q >= 1:
        radius = R
    else:
        lo = max(V ** q - R ** q, 0.0) ** (1.0 / q)
        hi = (V ** q + R ** q) ** (1.0 / q)
        radius = max(V - lo, hi - V)
    return DiscrepancyResult(float(q), V, GRID, radius, s, None, None, {"grid_power_exact": p} if p is not None else {})


# critical cells -----------------------------------------------------------

def power_integrals(D: PointSet, qs: Iterable) -> dict:
    """Map q -> (lower, upper) bracket of the integral of |L[D, Y]|^q dY.

    q = 2 uses the closed form; other q integrate over the critical cells,
    exactly for small cell counts and in floating point for large planar sets.
    """
    qs = list(qs)
    out = {}
    if D.N == 0:
        return {q: (Fraction(0), Fraction(0)) for q in qs}
    rest = []
    for q in qs:
        if q == 2:
            v = l2_squared(D)
            out[q] = (v, v)
        else:
            rest.append(q)
    if not rest:
        return out
    grid = CellGrid(D.mantissas, D.w)
    if grid.n_cells <= EXACT_CELL_LIMIT or D.d == 1:
        out.update(grid.exact_power_integrals(rest))
    elif D.d == 2 and grid.n_cells <= FLOAT_CELL_LIMIT:
        out.update(grid.float_power_integrals_2d(rest))
    else:
        raise GuardError(
            f"{grid.n_cells} critical cells exceed the integration limit; use lq_grid"
        )
    return out


def result_from_bracket(q, lo, hi) -> DiscrepancyResult:
    qf = float(q)
    if isinstance(lo, Fraction) and lo == hi:
        return DiscrepancyResult(qf, float(lo) ** (1.0 / qf), CRITICAL if q != 2 else EXACT, 0.0, None,
                                 lo if qf == 1 else None, lo)
    a = max(float(lo), 0.0) ** (1.0 / qf)
    b = float(hi) ** (1.0 / qf)
    return DiscrepancyResult(qf, (a + b) / 2, CELL_BRACKET, (b - a) / 2)


def lq(D: PointSet, q) -> DiscrepancyResult:
    """L_q[D] by the best available method."""
    if q == INF:
        return linf_exact(D)
    if q <= 0:
        raise ValueError("q must be positive")
    if q == 2:
        return l2_exact(D)
    lo, hi = power_integrals(D, [q])[q]
    return result_from_bracket(q, lo, hi)


# L_q / L_inf chain ---------------------------------------------------------

@dataclass(frozen=True)
class Lemma62Report:
    q: float
    s: int
    lq: DiscrepancyResult
    linf: DiscrepancyResult
    e_inf_bound: Fraction
    rhs: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "s": self.s,
            "lq": self.lq.to_dict(),
            "linf": self.linf.to_dict(),
            "e_inf_bound": self.e_inf_bound,
            "rhs": self.rhs,
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "holds": self.holds,
        }


def lemma62_check(D: PointSet, q, s: int) -> Lemma62Report:
    """Check L_q <= L_inf <= 2^(ds/q) (L_q + 2 E_inf) with certified brackets.

    L_q is the tight critical-cell bracket (the grid bracket is too wide to
    certify the left inequality); E_inf is replaced by its uniform bound.
    """
    if not 1 <= q < INF:
        raise ValueError("the chain is stated for 1 <= q < inf")
    r_q = lq(D, q)
    r_inf = linf_exact(D)
    E = uniform_error_bound(D, s)
    rhs = 2.0 ** (D.d * s / q) * (r_q.lower + 2 * float(E))
    linf = float(r_inf.exact)
    lower_ok = r_q.upper <= linf * (1 + 1e-12)
    upper_ok = linf <= rhs
    return Lemma62Report(float(q), s, r_q, r_inf, E, rhs, lower_ok, upper_ok)
