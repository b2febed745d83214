"""Fixed-precision dyadic rationals, XOR shifts, projections and elementary boxes.

A dyadic scalar is stored as an integer mantissa together with a precision
``w``; its value is ``mantissa / 2**w``.  Bits are indexed from 1 starting at
the most significant fractional digit, so ``bit(y, 1)`` is the digit of 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

DEFAULT_PRECISION = 64


@dataclass(frozen=True, order=True)
class DyadicScalar:
    """The number ``mantissa * 2**-precision`` in [0, 1)."""

    mantissa: int
    precision: int

    def __post_init__(self):
        if self.precision < 0:
            raise ValueError("precision must be nonnegative")
        if not 0 <= self.mantissa < (1 << self.precision):
            raise ValueError(
                f"mantissa {self.mantissa} out of range for precision {self.precision}"
            )

    @classmethod
    def from_fraction(cls, value, precision: int | None = None) -> "DyadicScalar":
        """Exact conversion; ``precision`` defaults to the smallest that fits."""
        v = Fraction(value)
        if not 0 <= v < 1:
            raise ValueError(f"{value} is not in [0, 1)")
        den = v.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        need = den.bit_length() - 1
        if precision is None:
            precision = need
        if precision < need:
            raise ValueError(f"{value} needs {need} bits, got precision {precision}")
        return cls(v.numerator << (precision - need), precision)

    @classmethod
    def quantize(cls, x, precision: int = DEFAULT_PRECISION) -> "DyadicScalar":
        """Round a real in [0, 1) down to ``precision`` bits (error < 2**-precision)."""
        v = Fraction(x)
        if not 0 <= v < 1:
            raise ValueError(f"{x} is not in [0, 1)")
        return cls((v.numerator << precision) // v.denominator, precision)

    @property
    def value(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.precision)

    def at_precision(self, w: int) -> "DyadicScalar":
        if w < self.precision:
            raise ValueError("cannot lower precision without rounding; use project")
        return DyadicScalar(self.mantissa << (w - self.precision), w)

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"DyadicScalar({self.value})"


@dataclass(frozen=True)
class DyadicPoint:
    """A point of [0,1)^d stored as mantissas sharing one precision."""

    mantissas: tuple[int, ...]
    precision: int

    def __post_init__(self):
        if len(self.mantissas) < 1:
            raise ValueError("dimension must be at least 1")
        object.__setattr__(self, "mantissas", tuple(int(m) for m in self.mantissas))
        for m in self.mantissas:
            DyadicScalar(m, self.precision)

    @classmethod
    def from_fractions(cls, values: Iterable, precision: int | None = None) -> "DyadicPoint":
        scalars = [DyadicScalar.from_fraction(v, precision) for v in values]
        return cls.from_scalars(scalars)

    @classmethod
    def from_scalars(cls, scalars: Sequence[DyadicScalar]) -> "DyadicPoint":
        w = max(sc.precision for sc in scalars)
        return cls(tuple(sc.at_precision(w).mantissa for sc in scalars), w)

    @classmethod
    def quantize(cls, values: Iterable, precision: int = DEFAULT_PRECISION) -> "DyadicPoint":
        return cls.from_scalars([DyadicScalar.quantize(v, precision) for v in values])

    @property
    def d(self) -> int:
        return len(self.mantissas)

    @property
    def coords(self) -> tuple[DyadicScalar, ...]:
        return tuple(DyadicScalar(m, self.precision) for m in self.mantissas)

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(c.value for c in self.coords)

    def at_precision(self, w: int) -> "DyadicPoint":
        if w < self.precision:
            raise ValueError("cannot lower precision without rounding; use project")
        return DyadicPoint(tuple(m << (w - self.precision) for m in self.mantissas), w)

    def __len__(self) -> int:
        return self.d

    def __repr__(self) -> str:
        return "DyadicPoint(" + ", ".join(str(v) for v in self.values) + ")"


def as_scalar(y) -> DyadicScalar:
    return y if isinstance(y, DyadicScalar) else DyadicScalar.from_fraction(y)


def as_point(Y) -> DyadicPoint:
    if isinstance(Y, DyadicPoint):
        return Y
    if isinstance(Y, DyadicScalar):
        return DyadicPoint((Y.mantissa,), Y.precision)
    return DyadicPoint.from_scalars([as_scalar(v) for v in Y])


def bit(y: DyadicScalar, a: int) -> int:
    """The binary digit eta_a(y); zero beyond the stored precision."""
    if a < 1:
        raise ValueError("bit index starts at 1")
    y = as_scalar(y)
    if a > y.precision:
        return 0
    return (y.mantissa >> (y.precision - a)) & 1


def _is_scalar(v) -> bool:
    return isinstance(v, (DyadicScalar, int, Fraction))


def xor_shift(x, t):
    """Digitwise XOR after aligning precisions; works on scalars and points."""
    if _is_scalar(x) or _is_scalar(t):
        x, t = as_scalar(x), as_scalar(t)
        w = max(x.precision, t.precision)
        return DyadicScalar(x.at_precision(w).mantissa ^ t.at_precision(w).mantissa, w)
    x, t = as_point(x), as_point(t)
    if x.d != t.d:
        raise ValueError(f"dimension mismatch: {x.d} vs {t.d}")
    w = max(x.precision, t.precision)
    xm, tm = x.at_precision(w).mantissas, t.at_precision(w).mantissas
    return DyadicPoint(tuple(a ^ b for a, b in zip(xm, tm)), w)


def project(y, s: int):
    """Truncate to the first ``s`` bits; the result has precision ``s``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if isinstance(y, DyadicPoint):
        return DyadicPoint(tuple(project(c, s).mantissa for c in y.coords), s)
    y = as_scalar(y)
    if s >= y.precision:
        return y.at_precision(s)
    return DyadicScalar(y.mantissa >> (y.precision - s), s)


def remainder(y, s: int):
    """theta_s(y) = (y - y^(s)) * 2**s, with precision ``w - s``."""
    if isinstance(y, DyadicPoint):
        if s > y.precision:
            raise ValueError(f"s={s} exceeds stored precision {y.precision}")
        w = y.precision - s
        mask = (1 << w) - 1
        return DyadicPoint(tuple(m & mask for m in y.mantissas), w)
    y = as_scalar(y)
    if s > y.precision:
        raise ValueError(f"s={s} exceeds stored precision {y.precision}")
    w = y.precision - s
    return DyadicScalar(y.mantissa & ((1 << w) - 1), w)


def kernel_delta(x, y, s: int) -> int:
    """1 when x and y share their first ``s`` bits (coordinatewise for points)."""
    if isinstance(x, DyadicPoint) or isinstance(y, DyadicPoint):
        x, y = as_point(x), as_point(y)
        if x.d != y.d:
            raise ValueError("dimension mismatch")
        return int(project(x, s) == project(y, s))
    return int(project(x, s) == project(y, s))


def rademacher(a: int, y) -> int:
    if a < 0:
        raise ValueError("index must be nonnegative")
    if a == 0:
        return 1
    return 1 - 2 * bit(y, a)


def rademacher_multi(A: Sequence[int], Y) -> int:
    Y = as_point(Y)
    if len(A) != Y.d:
        raise ValueError("dimension mismatch")
    r = 1
    for a, y in zip(A, Y.coords):
        r *= rademacher(a, y)
    return r


def kappa(A: Sequence[int]) -> int:
    return sum(1 for a in A if a != 0)


def level_vectors(d: int, s: int):
    """All A in {0..s}^d, lexicographic."""
    return product(range(s + 1), repeat=d)


@dataclass(frozen=True)
class ElementaryBox:
    """Product of dyadic intervals [m 2^-a, (m+1) 2^-a).

    ``flavor`` is ``"delta"`` for a general box or ``"pi"`` for the boxes
    Pi_A whose nonzero levels all use offset 1, i.e. [2^-a, 2^(1-a)).
    """

    A: tuple[int, ...]
    M: tuple[int, ...]
    flavor: str = "delta"

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(int(a) for a in self.A))
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        if len(self.A) != len(self.M):
            raise ValueError("levels and offsets differ in length")
        if self.flavor not in ("delta", "pi"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        for a, m in zip(self.A, self.M):
            if a < 0 or not 0 <= m < (1 << a):
                raise ValueError(f"offset {m} invalid for level {a}")
            if self.flavor == "pi" and m != (1 if a else 0):
                raise ValueError("pi boxes have offset 1 on nonzero levels")

    @classmethod
    def pi(cls, A: Sequence[int]) -> "ElementaryBox":
        return cls(tuple(A), tuple(1 if a else 0 for a in A), "pi")

    @property
    def d(self) -> int:
        return len(self.A)

    def to_dict(self) -> dict:
        return {"A": list(self.A), "M": list(self.M), "flavor": self.flavor}


def box_volume(b: ElementaryBox) -> Fraction:
    return Fraction(1, 1 << sum(b.A))


def _in_pi(z: DyadicScalar, a: int) -> bool:
    if a == 0:
        return True
    return bit(z, a) == 1 and all(bit(z, i) == 0 for i in range(1, a))


def box_contains(b: ElementaryBox, X) -> bool:
    X = as_point(X)
    if X.d != b.d:
        raise ValueError("dimension mismatch")
    if b.flavor == "pi":
        return all(_in_pi(z, a) for z, a in zip(X.coords, b.A))
    w = X.precision
    for x, a, m in zip(X.mantissas, b.A, b.M):
        idx = x >> (w - a) if a <= w else x << (a - w)
        if idx != m:
            return False
    return True


def pi_level(z: int, s: int) -> int:
    """Level a with z/2^s in Pi_a (position of the leading one bit), 0 for z = 0."""
    return 0 if z == 0 else s - z.bit_length() + 1
