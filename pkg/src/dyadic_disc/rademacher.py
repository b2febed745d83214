"""Rademacher polynomials on Q^k(2^s): evaluation, grid norms and Khinchin-type bounds.

A polynomial is a coefficient table lambda_A over A in {0..s}^k.  Its values
on the grid follow from applying the (2^s, s+1) sign matrix R[y, a] = r_a(y)
along every axis.  Coefficients given as rationals are kept exact by
clearing a common denominator, so integer-q norms come out as exact
rationals before the final root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

from .dyadic import DyadicPoint, DyadicScalar, as_point, rademacher
from .errors import GuardError

INF = math.inf
MAX_GRID = 1 << 24


@lru_cache(maxsize=64)
def sign_matrix(s: int) -> np.ndarray:
    """R[y, a] = r_a(y / 2^s) for y < 2^s and 0 <= a <= s."""
    y = np.arange(1 << s, dtype=np.int64)[:, None]
    a = np.arange(s + 1, dtype=np.int64)[None, :]
    bits = (y >> np.maximum(s - a, 0)) & 1
    R = 1 - 2 * bits
    R[:, 0] = 1
    R.setflags(write=False)
    return R


def design_matrix(k: int, s: int) -> np.ndarray:
    """Rows indexed by grid points Y (row-major), columns by A (row-major)."""
    R = sign_matrix(s)
    return reduce(np.kron, [R] * k)


def gram_matrix(k: int, s: int) -> np.ndarray:
    """Unnormalized Gram matrix sum_Y r_A(Y) r_B(Y); equals 2^(ks) I."""
    if (s + 1) ** k > 4096 or k * s > 16:
        raise GuardError("Gram matrix too large for direct evaluation")
    M = design_matrix(k, s)
    return M.T @ M


def _to_exact(coeffs: np.ndarray):
    """Integer numerators and a common denominator, or None for float tables."""
    flat = coeffs.ravel()
    if coeffs.dtype.kind in "iu":
        return coeffs.astype(object), 1
    if coeffs.dtype.kind == "f":
        return None
    fr = [Fraction(v) for v in flat]
    den = 1
    for v in fr:
        den = math.lcm(den, v.denominator)
    nums = np.array([v.numerator * (den // v.denominator) for v in fr], dtype=object)
    return nums.reshape(coeffs.shape), den


@dataclass(frozen=True, eq=False)
class RademacherPolynomial:
    """f(Y) = sum over A in {0..s}^k of lambda_A r_A(Y)."""

    k: int
    s: int
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.dtype.kind not in "iuf":
            c = np.array(c, dtype=object)
        if c.shape != (self.s + 1,) * self.k:
            raise ValueError(f"expected a table of shape {(self.s + 1,) * self.k}, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, k: int, s: int) -> "RademacherPolynomial":
        return cls(k, s, np.zeros((s + 1,) * k, dtype=np.int64))

    @classmethod
    def monomial(cls, A, s: int, c=1) -> "RademacherPolynomial":
        A = tuple(A)
        arr = np.zeros((s + 1,) * len(A), dtype=object)
        arr[...] = Fraction(0)
        arr[A] = Fraction(c)
        return cls(len(A), s, arr)

    @classmethod
    def from_dict(cls, k: int, s: int, table: dict) -> "RademacherPolynomial":
        arr = np.empty((s + 1,) * k, dtype=object)
        arr[...] = Fraction(0)
        for A, v in table.items():
            arr[tuple(A)] = Fraction(v)
        return cls(k, s, arr)

    @property
    def is_exact(self) -> bool:
        return self.coefficients.dtype.kind != "f"

    def coefficient(self, A):
        return self.coefficients[tuple(A)]

    def grid_values(self) -> tuple[np.ndarray, int | None]:
        """(values, den): f on Q^k(2^s) as values / den, row-major in Y.

        ``den`` is None when the table holds floats.
        """
        if (1 << (self.k * self.s)) > MAX_GRID:
            raise GuardError(f"grid of 2^{self.k * self.s} points is too large")
        exact = _to_exact(self.coefficients)
        R = sign_matrix(self.s)
        if exact is None:
            V, den = self.coefficients.astype(float), None
        else:
            V, den = exact
            bound = max((abs(int(v)) for v in V.ravel()), default=0) * (self.s + 1) ** self.k
            if bound < (1 << 62):
                V = V.astype(np.int64)
            else:
                R = R.astype(object)
        for ax in range(self.k):
            V = np.moveaxis(np.tensordot(R, V, axes=([1], [ax])), 0, ax)
        return V, den


def evaluate(f: RademacherPolynomial, Y) -> Fraction | float:
    Y = as_point(Y)
    if Y.d != f.k:
        raise ValueError(f"dimension mismatch: polynomial has k={f.k}, point has d={Y.d}")
    signs = [np.array([rademacher(a, y) for a in range(f.s + 1)], dtype=np.int64) for y in Y.coords]
    exact = f.is_exact
    V = f.coefficients if not exact else np.array([Fraction(v) for v in f.coefficients.ravel()],
                                                  dtype=object).reshape(f.coefficients.shape)
    for sg in signs:
        V = np.tensordot(sg.astype(object) if exact else sg, V, axes=([0], [0]))
    V = np.asarray(V).item()
    return Fraction(V) if exact else float(V)


def norm_grid_power(f: RademacherPolynomial, q) -> Fraction | float:
    """||f||_{s,q}^q (the max for q = inf); exact for rational tables and integer q."""
    V, den = f.grid_values()
    absV = np.abs(V)
    if q == INF:
        m = absV.max()
        return Fraction(int(m), den) if den is not None else float(m)
    qf = float(q)
    if den is not None and qf.is_integer() and qf >= 1:
        vals, counts = np.unique(absV.ravel(), return_counts=True)
        tot = sum(int(c) * int(v) ** int(qf) for v, c in zip(vals, counts))
        return Fraction(tot, V.size * den ** int(qf))
    x = absV.astype(float) / (den if den is not None else 1)
    return float(np.mean(x ** qf))


def norm_grid(f: RademacherPolynomial, q) -> float:
    p = norm_grid_power(f, q)
    if q == INF:
        return float(p)
    return float(p) ** (1.0 / float(q))


def q2_squared(f: RademacherPolynomial):
    c = f.coefficients
    if f.is_exact:
        return sum((Fraction(v) ** 2 for v in c.ravel()), Fraction(0))
    return float(np.sum(c.astype(float) ** 2))


def q2(f: RademacherPolynomial) -> float:
    return math.sqrt(q2_squared(f))


def _split(f: RademacherPolynomial) -> np.ndarray:
    if f.k < 2:
        raise ValueError("the split into (bold A, a) needs k >= 2")
    c = f.coefficients
    if f.is_exact:
        c = np.array([Fraction(v) for v in c.ravel()], dtype=object).reshape(c.shape)
    return c.reshape(-1, f.s + 1)


def q_inf2_squared(f: RademacherPolynomial):
    """max over y in Q(2^s) of sum over bold A of Phi_A(y)^2."""
    M = _split(f)
    R = sign_matrix(f.s)
    Phi = M @ (R.T.astype(object) if M.dtype == object else R.T)
    sq = (Phi * Phi).sum(axis=0)
    return max(sq)


def q_inf2(f: RademacherPolynomial) -> float:
    return math.sqrt(q_inf2_squared(f))


def slice_q2_squared(f: RademacherPolynomial) -> list:
    """Q_2[phi_a]^2 for a = 0..s."""
    M = _split(f)
    return [(M[:, a] * M[:, a]).sum() for a in range(f.s + 1)]


def q_12(f: RademacherPolynomial) -> float:
    return sum(math.sqrt(v) for v in slice_q2_squared(f))


# Khinchin constants --------------------------------------------------------

@dataclass(frozen=True)
class KhinchinConstants:
    q: float
    k: int = 1

    @property
    def alpha_q(self) -> float:
        return 2.0 ** (-(2 - self.q) / self.q) if self.q < 2 else 1.0

    @property
    def beta_q(self) -> float:
        return math.ceil(self.q / 2) ** 0.5

    @property
    def alpha(self) -> float:
        return self.alpha_q ** self.k

    @property
    def beta(self) -> float:
        return self.beta_q ** self.k

    def alpha_power(self, p: int):
        """(alpha_q^k)^p exactly when q is an integer, as an exact rational."""
        qf = float(self.q)
        if not qf.is_integer():
            return None
        q = int(qf)
        if q >= 2:
            return Fraction(1)
        # alpha_1 = 1/2
        return Fraction(1, 2 ** (self.k * p))

    def beta_power_2q(self):
        """(beta_q^k)^(2q) = ceil(q/2)^(kq) for integer q."""
        qf = float(self.q)
        if not qf.is_integer():
            return None
        return Fraction(math.ceil(qf / 2) ** (self.k * int(qf)))


def _compare(power_norm, c2q, qsq, q, lower: bool, c_float: float, qv: float) -> bool:
    """Is c*Q <= ||f|| (lower) or ||f|| <= c*Q (upper)?

    With P = ||f||^q, exact integer q reduces to P^2 vs c^(2q) (Q^2)^q.
    """
    if isinstance(power_norm, Fraction) and c2q is not None and isinstance(qsq, Fraction):
        lhs = power_norm ** 2
        rhs = c2q * qsq ** int(q)
        return rhs <= lhs if lower else lhs <= rhs
    n = float(power_norm) ** (1.0 / q)
    tol = 1e-12 * max(n, c_float * qv, 1e-300)
    return c_float * qv <= n + tol if lower else n <= c_float * qv + tol


@dataclass(frozen=True)
class KhinchinReport:
    q: float
    k: int
    lower: float
    norm: float
    upper: float
    lower_ok: bool
    upper_ok: bool
    ratio: float | None

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        return dict(q=self.q, k=self.k, lower=self.lower, norm=self.norm, upper=self.upper,
                    lower_ok=self.lower_ok, upper_ok=self.upper_ok, ratio=self.ratio)


def khinchin_check(f: RademacherPolynomial, q) -> KhinchinReport:
    """alpha_q^k Q_2[f] <= ||f||_{s,q} <= beta_q^k Q_2[f]."""
    if not 0 < q < INF:
        raise ValueError("q must lie in (0, inf)")
    K = KhinchinConstants(float(q), f.k)
    P = norm_grid_power(f, q)
    norm = float(P) ** (1.0 / q)
    qsq = q2_squared(f)
    Q = math.sqrt(qsq)
    lo_ok = _compare(P, K.alpha_power(2 * int(q)) if float(q).is_integer() else None, qsq, q, True, K.alpha, Q)
    hi_ok = _compare(P, K.beta_power_2q(), qsq, q, False, K.beta, Q)
    return KhinchinReport(float(q), f.k, K.alpha * Q, norm, K.beta * Q, lo_ok, hi_ok,
                          norm / Q if Q else None)


@dataclass(frozen=True)
class Lemma31Report:
    q: float
    upper: float
    lower: float
    norm: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(q=self.q, upper=self.upper, lower=self.lower, norm=self.norm, holds=self.holds)


def lemma31_bounds(f: RademacherPolynomial, q) -> Lemma31Report:
    """Upper beta_q^(d-1) Q_{inf,2}[f] and lower alpha_q^d Q_2[f] around ||f||_{s,q}."""
    if f.k < 2:
        raise ValueError("needs d >= 2")
    d = f.k
    P = norm_grid_power(f, q)
    norm = float(P) ** (1.0 / q)
    up_c = KhinchinConstants(float(q), d - 1)
    lo_c = KhinchinConstants(float(q), d)
    qi2 = q_inf2_squared(f)
    qsq = q2_squared(f)
    integer = float(q).is_integer()
    hi_ok = _compare(P, up_c.beta_power_2q(), qi2, q, False, up_c.beta, math.sqrt(qi2))
    lo_ok = _compare(P, lo_c.alpha_power(2 * int(q)) if integer else None, qsq, q, True, lo_c.alpha,
                     math.sqrt(qsq))
    return Lemma31Report(float(q), up_c.beta * math.sqrt(qi2), lo_c.alpha * math.sqrt(qsq), norm,
                         hi_ok and lo_ok)


@dataclass(frozen=True)
class Lemma32Report:
    bound: float
    sup_norm: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(bound=self.bound, sup_norm=self.sup_norm, holds=self.holds)


def _decimal_sqrt(x) -> Decimal:
    x = Fraction(x)
    return (Decimal(x.numerator) / Decimal(x.denominator)).sqrt()


def lemma32_bound(f: RademacherPolynomial) -> Lemma32Report:
    """alpha_1^(d-1) Q_{1,2}[f] <= ||f||_{s,inf}, compared at 60 digits."""
    if f.k < 2:
        raise ValueError("needs d >= 2")
    sup = norm_grid_power(f, INF)
    parts = slice_q2_squared(f)
    bound = q_12(f) * 0.5 ** (f.k - 1)
    if f.is_exact:
        with localcontext() as ctx:
            ctx.prec = 60
            total = sum((_decimal_sqrt(v) for v in parts), Decimal(0)) / (2 ** (f.k - 1))
            Fs = Fraction(sup)
            holds = total <= Decimal(Fs.numerator) / Decimal(Fs.denominator) + Decimal(10) ** -50
    else:
        holds = bound <= float(sup) * (1 + 1e-12)
    return Lemma32Report(bound, float(sup), holds)


def sup_one_dim(phi) -> Fraction | float:
    """sum_a |phi_a|, the discrete sup norm of a one-dimensional table."""
    return sum(abs(v) for v in phi)


def sign_choosing_point(phi, s: int | None = None) -> DyadicScalar:
    """y0 in Q(2^s) with r_a(y0) = sign(phi_a) (after normalizing phi_0 >= 0)."""
    phi = list(phi)
    if s is None:
        s = len(phi) - 1
    flip = phi[0] < 0
    m = 0
    for a in range(1, s + 1):
        v = -phi[a] if flip else phi[a]
        if v < 0:
            m |= 1 << (s - a)
    return DyadicScalar(m, s)
