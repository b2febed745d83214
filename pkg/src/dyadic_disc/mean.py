"""Mean discrepancies over the dyadic shift group and their principal and error terms.

The mean over shifts T in Q^d(2^s) is computed per distinct shifted multiset:
a digital net at level s has only 2^s distinct cosets D xor T, so results
are memoized by the canonical form of D xor T.  Discrepancies do not change
when coordinates are permuted, so the canonical form is also taken up to
coordinate order.  Distinct sets are evaluated
in a thread pool and reduced in shift order, so results do not depend on
the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

from . import _grid
from .decomposition import box_counts
from .discrepancy import (
    INF,
    linf_exact,
    lq,
    power_integrals,
    uniform_error_bound,
)
from .dyadic import DyadicPoint, as_point, xor_shift
from .errors import GuardError
from .pointsets import PointSet, check_net, log2_exact, project_set, shift_set
from .rademacher import sign_matrix

MAX_SHIFTS = 1 << 24
MAX_PAIRS = 1 << 28
CONFIDENCE = 0.99


# shifts --------------------------------------------------------------------

def all_shifts(d: int, s: int) -> np.ndarray:
    """Every T in Q^d(2^s) as an (2^(ds), d) mantissa array, lexicographic."""
    if d * s > 24:
        raise GuardError(f"2^{d * s} shifts exceed the exact-mode limit 2^24; use sampled mode")
    axes = np.meshgrid(*[np.arange(1 << s, dtype=np.uint64)] * d, indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def sample_shifts(d: int, s: int, count: int, seed: int) -> np.ndarray:
    """``count`` uniform shifts from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(seed))
    if s == 0:
        return np.zeros((count, d), dtype=np.uint64)
    return rng.integers(0, 1 << s, size=(count, d), dtype=np.uint64)


def _shifted_sets(D: PointSet, s: int, shifts: np.ndarray) -> list[PointSet]:
    W = max(D.w, s)
    base = D.at_precision(W).mantissas
    up = np.uint64(W - s)
    out = []
    for t in shifts:
        m = base ^ (t.astype(np.uint64) << up)
        m.setflags(write=False)
        out.append(PointSet(D.d, W, m))
    return out


def tau(T, Y):
    """(T, Y) -> (T xor Y, Y)."""
    return xor_shift(T, Y), as_point(Y)


# per-set evaluation ---------------------------------------------------------

def _evaluate(D: PointSet, qs: Sequence) -> dict:
    finite = [q for q in qs if q != INF]
    out = dict(power_integrals(D, finite)) if finite else {}
    if INF in qs:
        r = linf_exact(D).exact
        out[INF] = (r, r)
    return out


MAX_PERMUTED_D = 4


def canonical_key(S: PointSet) -> bytes:
    """Multiset key that is also invariant under permuting coordinates (d <= 4)."""
    if S.d == 1 or S.d > MAX_PERMUTED_D:
        return S.sorted_key()
    keys = []
    for perm in permutations(range(S.d)):
        m = S.mantissas[:, list(perm)]
        keys.append(PointSet(S.d, S.w, m).sorted_key())
    return min(keys)


def _evaluate_many(sets: list[PointSet], qs: Sequence, threads: int) -> tuple[list[dict], int]:
    """Evaluate each distinct multiset once; return results aligned with ``sets``."""
    keys = [canonical_key(S) for S in sets]
    order: dict[bytes, int] = {}
    uniq = []
    for k, S in zip(keys, sets):
        if k not in order:
            order[k] = len(uniq)
            uniq.append(S)
    if threads > 1 and len(uniq) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(lambda S: _evaluate(S, qs), uniq))
    else:
        res = [_evaluate(S, qs) for S in uniq]
    return [res[order[k]] for k in keys], len(uniq)


# estimates -------------------------------------------------------------------

@dataclass(frozen=True)
class MeanDiscrepancyEstimate:
    """A mean (or max for q = inf) of L_q[D xor T] over a set of shifts."""

    q: float
    value: float
    mode: str
    s: int
    error_radius: float = 0.0
    count: int | None = None
    seed: int | None = None
    lower_confidence: float | None = None
    exact: Fraction | None = None
    power_exact: Fraction | None = None
    distinct_sets: int | None = None
    method: str = "shift-average"
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def lower(self) -> float:
        return max(self.value - self.error_radius, 0.0)

    @property
    def upper(self) -> float:
        return self.value + self.error_radius

    def to_dict(self) -> dict:
        out = {
            "q": self.q,
            "value": self.value,
            "error_radius": self.error_radius,
            "method": self.method,
            "mode": self.mode,
            "s": self.s,
        }
        if self.mode == "sampled":
            out["count"] = self.count
            out["seed"] = self.seed
            if self.q == INF:
                out["is_lower_bound"] = True
            else:
                out["lower_confidence"] = self.lower_confidence
                out["confidence_level"] = CONFIDENCE
        if self.exact is not None:
            out["value_exact"] = self.exact
        if self.power_exact is not None:
            out["power_exact"] = self.power_exact
        if self.distinct_sets is not None:
            out["distinct_sets"] = self.distinct_sets
        out.update(self.extras)
        return out


def _aggregate(q, brackets: list, mode: str, s: int, count=None, seed=None, distinct=None,
               method="shift-average") -> MeanDiscrepancyEstimate:
    qf = float(q)
    if q == INF:
        lo = max(b[0] for b in brackets)
        hi = max(b[1] for b in brackets)
        exact = lo if isinstance(lo, Fraction) and lo == hi else None
        a, b = float(lo), float(hi)
        return MeanDiscrepancyEstimate(qf, (a + b) / 2, mode, s, (b - a) / 2, count, seed, None,
                                       exact, None, distinct, method)
    n = len(brackets)
    if all(isinstance(b[0], Fraction) and b[0] == b[1] for b in brackets):
        P = sum((b[0] for b in brackets), Fraction(0)) / n
        value = float(P) ** (1.0 / qf)
        est = dict(value=value, error_radius=0.0, power_exact=P,
                   exact=P if qf == 1 else None)
    else:
        lo = math.fsum(float(b[0]) for b in brackets) / n
        hi = math.fsum(float(b[1]) for b in brackets) / n
        a, b = max(lo, 0.0) ** (1.0 / qf), hi ** (1.0 / qf)
        est = dict(value=(a + b) / 2, error_radius=(b - a) / 2, power_exact=None, exact=None)
    lc = None
    if mode == "sampled" and n > 1:
        lows = np.array([float(b[0]) for b in brackets])
        sd = float(np.std(lows, ddof=1))
        z = NormalDist().inv_cdf(CONFIDENCE)
        m = math.fsum(lows) / n - z * sd / math.sqrt(n)
        lc = max(m, 0.0) ** (1.0 / qf)
    return MeanDiscrepancyEstimate(qf, est["value"], mode, s, est["error_radius"], count, seed, lc,
                                   est["exact"], est["power_exact"], distinct, method)


def mean_lq_multi(D: PointSet, s: int, qs: Iterable, mode: str = "exact", count: int | None = None,
                  seed: int = 0, threads: int = 1) -> dict:
    """q -> MeanDiscrepancyEstimate, sharing shifts and per-set evaluations."""
    qs = list(qs)
    if mode == "exact":
        shifts = all_shifts(D.d, s)
    elif mode == "sampled":
        if not count or count < 1:
            raise ValueError("sampled mode needs a positive count")
        shifts = sample_shifts(D.d, s, count, seed)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    results, distinct = _evaluate_many(_shifted_sets(D, s, shifts), qs, threads)
    out = {}
    for q in qs:
        out[q] = _aggregate(q, [r[q] for r in results], mode, s,
                            count if mode == "sampled" else None,
                            seed if mode == "sampled" else None, distinct)
    return out


def mean_lq(D: PointSet, s: int, q, mode: str = "exact", count: int | None = None, seed: int = 0,
            threads: int = 1) -> MeanDiscrepancyEstimate:
    return mean_lq_multi(D, s, [q], mode, count, seed, threads)[q]


def conditional_mean(D: PointSet, s: int, q, V: Sequence, threads: int = 1) -> MeanDiscrepancyEstimate:
    """(|V|^-1 sum_{T in V} L_q[D xor T]^q)^(1/q) over a given list of shifts."""
    if len(V) == 0:
        raise ValueError("the shift set V is empty")
    rows = []
    for T in V:
        T = as_point(T)
        if T.d != D.d:
            raise ValueError("dimension mismatch")
        if T.precision > s:
            if any(m & ((1 << (T.precision - s)) - 1) for m in T.mantissas):
                raise ValueError("shifts must lie in Q^d(2^s)")
            rows.append([m >> (T.precision - s) for m in T.mantissas])
        else:
            rows.append([m << (s - T.precision) for m in T.mantissas])
    shifts = np.array(rows, dtype=np.uint64)
    results, distinct = _evaluate_many(_shifted_sets(D, s, shifts), [q], threads)
    return _aggregate(q, [r[q] for r in results], "subset", s, distinct=distinct,
                      method="conditional-average")


# principal terms --------------------------------------------------------------

def _check_pairs(d: int, s: int) -> None:
    if 2 * d * s > 28:
        raise GuardError(f"2^{2 * d * s} (shift, anchor) pairs exceed the limit 2^28")


def f_grid_scaled(counts: np.ndarray, N: int, d: int, s: int) -> np.ndarray:
    """2^(ds+d) F^(s)[D, Z, Y] over Y in Q^d(2^s), from Pi_A box counts at Z."""
    tot = d * s
    levels = np.indices(counts.shape).sum(axis=0)
    nonzero = np.indices(counts.shape) > 0
    sign = np.where(nonzero.sum(axis=0) % 2, -1, 1)
    lam = counts.astype(np.int64) * (1 << tot) - N * (np.int64(1) << (tot - levels))
    V = sign * lam
    R = sign_matrix(s)
    for ax in range(d):
        V = np.moveaxis(np.tensordot(R, V, axes=([1], [ax])), 0, ax)
    return V


def _tables_over_z(D: PointSet, s: int):
    """Yield (Z mantissas, box counts of D^(s) xor Z) for every Z in Q^d(2^s)."""
    P = project_set(D, s).mantissas
    for Z in all_shifts(D.d, s):
        yield Z, box_counts(P ^ Z, s, D.d)


def _power(values: np.ndarray, q, e: int):
    """Mean of |values / 2^e|^q (exact for integer q) or max for q = inf."""
    if q == INF:
        return Fraction(int(np.abs(values).max()), 1 << e)
    qf = float(q)
    if qf.is_integer() and qf >= 1:
        return _grid.grid_power_mean(values, int(qf), e)
    return _grid.grid_power_mean_float(values, qf, e)


def _principal_result(q, total, n, s, method) -> MeanDiscrepancyEstimate:
    P = total / n
    qf = float(q)
    exact = P if isinstance(P, Fraction) else None
    return MeanDiscrepancyEstimate(qf, float(P) ** (1.0 / qf), "exact", s, 0.0, power_exact=exact,
                                   exact=P if qf == 1 and exact is not None else None, method=method)


def principal_term_mq(D: PointSet, s: int, q) -> MeanDiscrepancyEstimate:
    """M^(s)_q[D] = (2^-ds sum_Z F^(s)_q[D, Z]^q)^(1/q) from micro-local tables."""
    _check_pairs(D.d, s)
    if not 0 < q < INF:
        raise ValueError("q must lie in (0, inf)")
    if D.N == 0:
        return MeanDiscrepancyEstimate(float(q), 0.0, "exact", s, power_exact=Fraction(0))
    e = D.d * s + D.d
    total = 0
    n = 0
    for _, counts in _tables_over_z(D, s):
        total += _power(f_grid_scaled(counts, D.N, D.d, s), q, e)
        n += 1
    return _principal_result(q, total, n, s, "micro-local-tables")


def principal_term_direct(D: PointSet, s: int, q) -> MeanDiscrepancyEstimate:
    """The same quantity from the double sum over (T, Y) of |L^(s)[D xor T, Y]|^q."""
    _check_pairs(D.d, s)
    if D.N == 0:
        return MeanDiscrepancyEstimate(float(q), 0.0, "exact", s, power_exact=Fraction(0))
    e = _grid.scale_exponent(D.d, s)
    total = 0
    n = 0
    for S in _shifted_sets(D, s, all_shifts(D.d, s)):
        vals = _grid.truncated_grid_scaled(S.mantissas, S.w, S.d, s)
        total += _power(vals, q, e)
        n += 1
    return _principal_result(q, total, n, s, "shift-anchor-double-sum")


def principal_term_finf(D: PointSet, s: int) -> Fraction:
    """F^(s)_{1,inf}[D] = 2^-ds sum_Z max_Y |F^(s)[D, Z, Y]|, exact."""
    _check_pairs(D.d, s)
    if D.N == 0:
        return Fraction(0)
    e = D.d * s + D.d
    total = 0
    n = 0
    for _, counts in _tables_over_z(D, s):
        total += int(np.abs(f_grid_scaled(counts, D.N, D.d, s)).max())
        n += 1
    return Fraction(total, n << e)


def _open_counts_grid(S: PointSet, s: int) -> np.ndarray:
    """#{X : x_j < y_j for all j} for every Y in Q^d(2^s)."""
    n = 1 << s
    hist = np.zeros((n,) * S.d, dtype=np.int64)
    if S.N:
        P = S.mantissas >> np.uint64(S.w - s)
        np.add.at(hist, tuple(P[:, j].astype(np.int64) for j in range(S.d)), 1)
    C = hist
    for ax in range(S.d):
        C = np.cumsum(C, axis=ax) - C
    return C


@dataclass(frozen=True)
class LinfChain:
    """M_{s,inf} >= max_{T,Y} |L| = max_{Z,Y} |F| >= F_{1,inf} - E_{1,inf}."""

    mean_inf: Fraction
    grid_max: Fraction
    f_1inf: Fraction
    e_1inf: Fraction
    e_1inf_bound: Fraction

    @property
    def holds(self) -> bool:
        return (self.mean_inf >= self.grid_max >= self.f_1inf - self.e_1inf
                and self.e_1inf <= self.e_1inf_bound)

    def to_dict(self) -> dict:
        return dict(mean_inf=self.mean_inf, grid_max=self.grid_max, f_1inf=self.f_1inf,
                    e_1inf=self.e_1inf, e_1inf_bound=self.e_1inf_bound, holds=self.holds)


def error_1inf(D: PointSet, s: int) -> tuple[Fraction, Fraction]:
    """(E^(s)_{1,inf}[D] measured, max over (T, Y) on the grid of |L[D xor T, Y]|)."""
    _check_pairs(D.d, s)
    d, n = D.d, 1 << s
    e = d * (s + 1)
    grid_idx = np.meshgrid(*[np.arange(n, dtype=np.int64)] * d, indexing="ij")
    vol = np.ones((n,) * d, dtype=np.int64)
    for g in grid_idx:
        vol = vol * (2 * g)
    best_z = np.zeros((n,) * d, dtype=object)
    grid_max = Fraction(0)
    shifts = all_shifts(d, s)
    for T, S in zip(shifts, _shifted_sets(D, s, shifts)):
        L = (_open_counts_grid(S, s) << e) - D.N * vol
        Ls = _grid.truncated_grid_scaled(S.mantissas, S.w, d, s)
        E = np.abs(L - Ls)
        gm = int(np.abs(L).max())
        if gm > grid_max * (1 << e):
            grid_max = Fraction(gm, 1 << e)
        # Z = T xor Y
        zidx = tuple(g ^ int(t) for g, t in zip(grid_idx, T))
        best_z[zidx] = np.maximum(best_z[zidx], E)
    total = sum(int(v) for v in best_z.ravel())
    return Fraction(total, (n ** d) << e), grid_max


def linf_chain(D: PointSet, s: int) -> LinfChain:
    m = mean_lq(D, s, INF).exact
    e1, gm = error_1inf(D, s)
    f1 = principal_term_finf(D, s)
    return LinfChain(m, gm, f1, e1, Fraction(D.d * D.N, 1 << s))


# error terms ----------------------------------------------------------------

@dataclass(frozen=True)
class ErrorTermNorms:
    q: float
    s: int
    uniform_bound: Fraction
    net_bound: Fraction | None
    generic_bound: Fraction | None
    e1inf_bound: Fraction
    delta: int | None

    @property
    def eq_bound(self) -> Fraction:
        """The smallest applicable bound on E^(s)_q[D]."""
        cands = [self.uniform_bound]
        if self.net_bound is not None:
            cands.append(self.net_bound)
        if self.generic_bound is not None:
            cands.append(self.generic_bound)
        return min(cands)

    def to_dict(self) -> dict:
        return dict(q=self.q, s=self.s, eq_bound=self.eq_bound, uniform_bound=self.uniform_bound,
                    net_bound=self.net_bound, generic_bound=self.generic_bound,
                    e1inf_bound=self.e1inf_bound, delta=self.delta)


def error_term_norms(D: PointSet, s: int, q) -> ErrorTermNorms:
    """Bounds on E^(s)_q[D] and E^(s)_{1,inf}[D] from coincidence counts.

    A set with N = 2^s that passes the net check at its minimal deficiency
    delta also gets the net form d 2^delta.
    """
    d, N = D.d, D.N
    uniform = uniform_error_bound(D, s)
    net = None
    delta = None
    if N and N & (N - 1) == 0 and log2_exact(N) == s:
        rep = check_net(D, s)
        delta = rep.minimal_delta
        net = Fraction(d * (1 << delta))
    generic = Fraction(d * N, 1 << s) if q != INF and q <= 1 else None
    return ErrorTermNorms(float(q), s, uniform, net, generic, Fraction(d * N, 1 << s), delta)


def error_term_measured(D: PointSet, s: int, q) -> MeanDiscrepancyEstimate:
    """E^(s)_q[D] from exact residuals over every shift (small cases)."""
    from .decomposition import residual_power_integrals, residual_sup

    brackets = []
    for S in _shifted_sets(D, s, all_shifts(D.d, s)):
        if q == INF:
            v = residual_sup(S, s)
            brackets.append((v, v))
        else:
            brackets.append(residual_power_integrals(S, s, [q])[q])
    return _aggregate(q, brackets, "exact", s, method="residual-average")


# shift search ------------------------------------------------------------------

OBJECTIVES = ("minimize-Lq", "maximize-Lq", "maximize-Linf")


@dataclass(frozen=True)
class ShiftSearchResult:
    best_shift: DyadicPoint
    best_value: float
    objective: str
    shifts_examined: int
    q: float
    exhaustive: bool
    best_result: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return dict(best_shift=[Fraction(m, 1 << self.best_shift.precision)
                                for m in self.best_shift.mantissas],
                    best_value=self.best_value, objective=self.objective,
                    shifts_examined=self.shifts_examined, q=self.q, exhaustive=self.exhaustive,
                    best_result=self.best_result)


def shift_search(D: PointSet, s: int, objective: str = "minimize-Lq", budget: int = 1024, q=2,
                 seed: int = 0, threads: int = 1) -> ShiftSearchResult:
    """Scan shifts (all of them if the budget allows) for the extremal discrepancy.

    Ties keep the first shift in scan order.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if objective == "maximize-Linf":
        q = INF
    exhaustive = D.d * s <= 24 and (1 << (D.d * s)) <= budget
    shifts = all_shifts(D.d, s) if exhaustive else sample_shifts(D.d, s, budget, seed)
    results, _ = _evaluate_many(_shifted_sets(D, s, shifts), [q], threads)
    best_i = 0
    best_v = None
    for i, r in enumerate(results):
        lo, hi = r[q]
        v = (float(lo) + float(hi)) / 2
        if best_v is None or (v < best_v if objective == "minimize-Lq" else v > best_v):
            best_i, best_v = i, v
    T = DyadicPoint(tuple(int(v) for v in shifts[best_i]), s)
    rec = lq(shift_set(D, T), q)
    return ShiftSearchResult(T, rec.value, objective, len(shifts), float(q), exhaustive, rec.to_dict())
