"""Bound constants, qualifying levels and verdicts for the three mean-discrepancy theorems.

"2.1" is the upper bound for nets, "2.2" the lower bound for 0 < q <= 1
and "2.3" the lower bound for the mean L_inf discrepancy in d >= 3.  The
lower bounds are checked in their stated form with (log N)^power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .decomposition import box_counts
from .discrepancy import INF
from .errors import CertificationError
from .mean import (
    MeanDiscrepancyEstimate,
    all_shifts,
    mean_lq,
    sample_shifts,
)
from .pointsets import PointSet, check_net, log2_exact, project_set

THEOREMS = ("2.1", "2.2", "2.3")


def nearest_int_dist(t) -> Fraction | float:
    """Distance from t to the nearest integer."""
    f = t - math.floor(t)
    return min(f, 1 - f)


def _log2(x: int):
    """log2 of a positive integer: exact Fraction for powers of two, float otherwise."""
    if x & (x - 1) == 0:
        return Fraction(x.bit_length() - 1)
    return math.log2(x)


def _xlogx(x: int):
    return Fraction(0) if x <= 1 else x * _log2(x)


def _ceil(value) -> int:
    return math.ceil(value)


# combinatorics -------------------------------------------------------------

@dataclass(frozen=True)
class JSigmaReport:
    k: int
    sigma: int
    s: int
    count: int
    bound: float
    bound_applies: bool

    @property
    def ok(self) -> bool:
        return (not self.bound_applies) or self.count >= self.bound

    def to_dict(self) -> dict:
        return dict(k=self.k, sigma=self.sigma, s=self.s, count=self.count, bound=self.bound,
                    bound_applies=self.bound_applies, ok=self.ok)


def j_sigma_count(k: int, sigma: int, s: int) -> int:
    """Number of A in {0..s}^k with a_1 + ... + a_k = sigma."""
    ways = [1] + [0] * sigma
    for _ in range(k):
        nxt = [0] * (sigma + 1)
        for tot, w in enumerate(ways):
            if w:
                for a in range(0, min(s, sigma - tot) + 1):
                    nxt[tot + a] += w
        ways = nxt
    return ways[sigma]


def j_sigma(k: int, sigma: int, s: int) -> JSigmaReport:
    """|J^k_sigma(s)| with the lower bound (sigma / (k-1))^(k-1), which applies when s >= sigma."""
    if k < 2:
        raise ValueError("k must be at least 2")
    count = j_sigma_count(k, sigma, s)
    bound = (sigma / (k - 1)) ** (k - 1)
    return JSigmaReport(k, sigma, s, count, bound, s >= sigma)


# constants and thresholds -----------------------------------------------------

def gamma_q(d: int, q) -> float:
    """2^(-(2d+1)/q - d - 1) (d-1)^(-(d-1)/2)."""
    return 2.0 ** (-(2 * d + 1) / q - d - 1) * (d - 1) ** (-(d - 1) / 2)


def gamma_inf(d: int) -> float:
    """2^(-2d-1) (d-2)^(-(d-2)/2)."""
    return 2.0 ** (-2 * d - 1) * (d - 2) ** (-(d - 2) / 2) if d > 2 else 2.0 ** (-2 * d - 1)


def c_q(d: int, q) -> float:
    return 2.0 ** (-2 * d / q - d - 1) * (d - 1) ** (-(d - 1) / 2)


def c_inf(d: int) -> float:
    return 2.0 ** (-2 * d) * (d - 2) ** (-(d - 2) / 2) if d > 2 else 2.0 ** (-2 * d)


def rhs_21(d: int, delta: int, q, s: int) -> float:
    """2^(-d+delta+1) (ceil(q/2) (s+1))^((d-1)/2) + d 2^delta."""
    return 2.0 ** (-d + delta + 1) * (math.ceil(q / 2) * (s + 1)) ** ((d - 1) / 2) + d * 2.0 ** delta


def threshold_22(N: int, d: int, q) -> int:
    """Least integer s with s >= log N + (2d+1)/q + (d-1)log(d-1)/2 + d + 1 + log d."""
    qf = Fraction(q).limit_denominator(10 ** 9) if not isinstance(q, Fraction) else q
    terms = [_log2(N), Fraction(2 * d + 1) / qf, _xlogx(d - 1) / 2, Fraction(d + 1), _log2(d)]
    return _ceil(_sum_terms(terms))


def threshold_23(N: int, d: int) -> int:
    """Least integer s with s >= log N + (d-2)log(d-2)/2 + 2d + log d."""
    terms = [_log2(N), _xlogx(d - 2) / 2, Fraction(2 * d), _log2(d)]
    return _ceil(_sum_terms(terms))


def _sum_terms(terms):
    if all(isinstance(t, Fraction) for t in terms):
        return sum(terms, Fraction(0))
    return math.fsum(float(t) for t in terms)


def lower_bound_22(N: int, d: int, q) -> float:
    return gamma_q(d, q) * math.log2(N) ** ((d - 1) / 2)


def lower_bound_23(N: int, d: int) -> float:
    return gamma_inf(d) * math.log2(N) ** (d / 2)


# reports -----------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremReport:
    theorem: str
    N: int
    d: int
    q: float
    delta: int | None
    s: int
    bound_value: float
    threshold_s: int | None
    measured: MeanDiscrepancyEstimate | None = None
    verdict: str | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def kind(self) -> str:
        return "upper" if self.theorem == "2.1" else "lower"

    def to_dict(self) -> dict:
        out = {
            "theorem": self.theorem,
            "N": self.N,
            "d": self.d,
            "q": self.q,
            "delta": self.delta,
            "s": self.s,
            "bound_kind": self.kind,
            "bound_value": self.bound_value,
            "threshold_s": self.threshold_s,
            "verdict": self.verdict,
        }
        if self.measured is not None:
            out["measured"] = self.measured.to_dict()
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def _validate(theorem: str, d: int, q) -> None:
    if theorem not in THEOREMS:
        raise ValueError(f"theorem must be one of {THEOREMS}")
    if theorem == "2.1" and not 0 < q < INF:
        raise ValueError("theorem 2.1 needs 0 < q < inf")
    if theorem == "2.2" and (d < 2 or not 0 < q <= 1):
        raise ValueError("theorem 2.2 needs d >= 2 and 0 < q <= 1")
    if theorem == "2.3" and d < 3:
        raise ValueError("theorem 2.3 needs d >= 3")


def theorem_bounds(theorem: str, N: int, d: int, q=None, delta: int | None = None,
                   s: int | None = None) -> TheoremReport:
    """Closed-form bound and least qualifying s (bound side only)."""
    if theorem == "2.3":
        q = INF
    _validate(theorem, d, q)
    if theorem == "2.1":
        if s is None:
            s = log2_exact(N)
        if delta is None:
            raise ValueError("theorem 2.1 needs the deficiency delta")
        return TheoremReport(theorem, N, d, float(q), delta, s, rhs_21(d, delta, q, s), None)
    if theorem == "2.2":
        th = threshold_22(N, d, q)
        return TheoremReport(theorem, N, d, float(q), delta, th if s is None else s,
                             lower_bound_22(N, d, q), th)
    th = threshold_23(N, d)
    return TheoremReport(theorem, N, d, INF, delta, th if s is None else s, lower_bound_23(N, d), th)


# diagnostics --------------------------------------------------------------------

def window_bound(D: PointSet, s: int, delta: int, zs: np.ndarray) -> dict:
    """max over Z, bold A and y of |Phi_A(Z, y)| = sum_a |lambda_(A, a)| against 2^(delta+1)."""
    P = project_set(D, s).mantissas
    tot = D.d * s
    worst = 0
    for Z in zs:
        counts = box_counts(P ^ Z, s, D.d)
        levels = np.indices(counts.shape).sum(axis=0)
        lam = counts.astype(object) * (1 << tot) - D.N * np.vectorize(
            lambda a: 1 << (tot - a), otypes=[object])(levels)
        per = np.abs(lam).reshape(-1, s + 1).sum(axis=1)
        worst = max(worst, int(per.max()))
    value = Fraction(worst, 1 << tot)
    return {"max_window": value, "window_limit": 2 ** (delta + 1),
            "window_ok": value <= 2 ** (delta + 1), "z_examined": int(len(zs))}


def diagnostics(theorem: str, N: int, d: int, q, s: int, delta: int | None = None) -> dict:
    """Proof-path quantities; informational, not pass/fail gates."""
    out: dict = {}
    if theorem == "2.1":
        out["principal_bound"] = 2.0 ** (-d + delta + 1) * (math.ceil(q / 2) * (s + 1)) ** ((d - 1) / 2)
        out["error_bound"] = d * 2 ** delta
        return out
    sigma = math.ceil(math.log2(N)) + 1 if N > 1 else 1
    out["sigma"] = sigma
    out["s_at_least_sigma"] = s >= sigma
    if theorem == "2.2":
        cq = c_q(d, q)
        xi = cq ** (-q) * (d * N * 2.0 ** -s) ** q
        out.update(c_q=cq, xi_q=xi, xi_ok=xi <= 0.5)
        lam_floor = []
        for A in product(range(min(s, sigma) + 1), repeat=d):
            if sum(A) == sigma:
                lam_floor.append(nearest_int_dist(Fraction(N, 1 << sigma)))
        sq = sum(float(v) ** 2 for v in lam_floor)
        out["j_sigma"] = len(lam_floor)
        out["q2_lower"] = 2.0 ** -d * math.sqrt(sq)
        out["principal_lower"] = cq * (math.log2(N) + 1) ** ((d - 1) / 2)
    else:
        ci = c_inf(d)
        xi = d * N * 2.0 ** -s / ci
        out.update(c_inf=ci, xi_inf=xi, xi_ok=xi <= 0.5)
        out["principal_lower"] = ci * (math.log2(N) + 1) ** (d / 2)
    return out


# verification --------------------------------------------------------------------

def _verdict(kind: str, measured: MeanDiscrepancyEstimate, bound: float, mode: str,
             applies: bool) -> str:
    if kind == "upper":
        passed = measured.upper < bound
        failed = measured.lower >= bound
    else:
        # a sampled maximum never exceeds the true maximum, so "holds" stays sound for q = inf
        passed = measured.lower > bound
        failed = measured.upper <= bound
    if passed:
        return "holds"
    if not applies:
        return "not-applicable"
    if mode != "exact":
        return "inconclusive-sampled"
    return "violated" if failed else "inconclusive-bracket"


def verify_theorem(D: PointSet, theorem: str, q=None, s: int | None = None, mode: str = "exact",
                   count: int | None = None, seed: int = 0, threads: int = 1,
                   delta: int | None = None, diag_z: int = 64) -> TheoremReport:
    """Measure the mean discrepancy of D and compare it with the theorem's bound."""
    d, N = D.d, D.N
    if theorem == "2.3":
        q = INF
    _validate(theorem, d, q)
    diag: dict = {}
    applies = True
    if theorem == "2.1":
        if N == 0 or N & (N - 1):
            raise CertificationError("theorem 2.1 needs a net with N = 2^s points")
        s_net = log2_exact(N)
        if s is None:
            s = s_net
        if s != s_net:
            raise CertificationError(f"the net has 2^{s_net} points but s = {s}")
        if delta is None:
            delta = check_net(D, s).minimal_delta
        else:
            rep = check_net(D, delta)
            if not rep.is_net:
                raise CertificationError(f"the set is not a ({delta},{s},{d})-net")
        base = theorem_bounds(theorem, N, d, q, delta, s)
        diag = diagnostics(theorem, N, d, q, s, delta)
        if d * s <= 12:
            zs = all_shifts(d, s)
        else:
            zs = sample_shifts(d, s, diag_z, seed)
        diag.update(window_bound(D, s, delta, zs))
    else:
        base = theorem_bounds(theorem, N, d, q, delta, s)
        s = base.s
        applies = s >= base.threshold_s
        diag = diagnostics(theorem, N, d, q, s)
        diag["s_meets_threshold"] = applies
    measured = mean_lq(D, s, q, mode, count, seed, threads)
    verdict = _verdict(base.kind, measured, base.bound_value, mode, applies)
    return TheoremReport(theorem, N, d, base.q, delta, s, base.bound_value, base.threshold_s,
                         measured, verdict, diag)
