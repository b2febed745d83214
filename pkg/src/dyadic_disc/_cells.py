"""Integration of |c - N vol(y) - offset|^q over the critical cells of a point set.

The coordinates of the points (and optionally the grid of spacing 2^-s) cut
[0,1)^d into boxes on which the point count of the anchored box [0,y) is
constant.  On each such cell the local discrepancy is a polynomial that is
decreasing in every coordinate, so its sign can change at most once along
the diagonal and its extreme values sit at the lower and upper corners.

Integer q is integrated exactly on cells of constant sign; cells where the
sign changes are bracketed between |integral of g^q| and vol * max|g|^q.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial, lcm

import numpy as np

EPS = np.finfo(float).eps
# relative radius for the floating closed form on sign-changing cells
STRADDLE_RTOL = 1e-10


def _outer(vectors):
    """Broadcast product of one vector per axis (object or numeric)."""
    d = len(vectors)
    out = None
    for j, v in enumerate(vectors):
        shape = [1] * d
        shape[j] = len(v)
        v = v.reshape(shape)
        out = v if out is None else out * v
    return out


class CellGrid:
    """Critical cells of a multiset of points given as integer mantissas.

    ``rows`` is an (N, d) array of mantissas at precision ``w``.  When
    ``s_grid`` is given the cells are also cut along the grid of spacing
    2^-s_grid, so that functions constant on that grid are constant per cell.
    """

    def __init__(self, rows: np.ndarray, w: int, s_grid: int | None = None):
        rows = np.asarray(rows)
        self.N, self.d = rows.shape
        if s_grid is None and self.N:
            # drop trailing zero bits shared by every coordinate
            acc = 0
            for v in rows.ravel():
                acc |= int(v)
            tz = (acc & -acc).bit_length() - 1 if acc else w
            rows = np.array([[int(v) >> tz for v in r] for r in rows], dtype=object).reshape(rows.shape)
            w -= tz
        W = w if s_grid is None else max(w, s_grid)
        self.W = W
        pts = [[int(v) << (W - w) for v in rows[:, j]] for j in range(self.d)]
        self.edges = []
        for j in range(self.d):
            e = set(pts[j])
            e.update((0, 1 << W))
            if s_grid is not None:
                step = 1 << (W - s_grid)
                e.update(range(0, 1 << W, step))
            self.edges.append(sorted(e))
        self.shape = tuple(len(e) - 1 for e in self.edges)
        hist = np.zeros(self.shape, dtype=np.int64)
        if self.N:
            idx = []
            for j in range(self.d):
                pos = {v: k for k, v in enumerate(self.edges[j])}
                idx.append(np.array([pos[v] for v in pts[j]], dtype=np.int64))
            np.add.at(hist, tuple(idx), 1)
        C = hist
        for ax in range(self.d):
            C = np.cumsum(C, axis=ax)
        # C[k] = number of points with x_j <= lower edge of cell k on every axis
        self.counts = C

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def lower_edges(self, j):
        return self.edges[j][:-1]

    def upper_edges(self, j):
        return self.edges[j][1:]

    def grid_cell_index(self, j: int, s: int) -> np.ndarray:
        """Index of the 2^-s grid cell containing each cell along axis j."""
        return np.array([a >> (self.W - s) for a in self.lower_edges(j)], dtype=np.int64)

    # exact evaluation ---------------------------------------------------
    def _scaled(self, offset):
        """Return (ctil, K, E): g = (ctil - K prod t_j) / 2^E with t_j integer."""
        dW = self.d * self.W
        if offset is None:
            E = dW
            ctil = self.counts.astype(object) * (1 << E) if E else self.counts.astype(object)
        else:
            off, e = offset
            E = max(dW, e)
            ctil = self.counts.astype(object) * (1 << E) - np.asarray(off, dtype=object) * (1 << (E - e))
        K = self.N << (E - dW)
        return ctil, K, E

    def _corners(self, ctil, K):
        lo = [np.array(self.lower_edges(j), dtype=object) for j in range(self.d)]
        hi = [np.array(self.upper_edges(j), dtype=object) for j in range(self.d)]
        g_lo = ctil - K * _outer(lo)
        g_hi = ctil - K * _outer(hi)
        return lo, hi, g_lo, g_hi

    def sup_abs(self, offset=None) -> Fraction:
        """sup over y of |g(y)| (one-sided limits at cell corners included)."""
        if self.N == 0 and offset is None:
            return Fraction(0)
        if offset is None and self.d * self.W + self.N.bit_length() + 2 <= 62:
            lo = [np.array(self.lower_edges(j), dtype=np.int64) for j in range(self.d)]
            hi = [np.array(self.upper_edges(j), dtype=np.int64) for j in range(self.d)]
            c = self.counts << (self.d * self.W)
            m = max(int(np.abs(c - self.N * _outer(lo)).max()), int(np.abs(c - self.N * _outer(hi)).max()))
            return Fraction(m, 1 << (self.d * self.W))
        ctil, K, E = self._scaled(offset)
        _, _, g_lo, g_hi = self._corners(ctil, K)
        m = max(max(abs(v) for v in g_lo.ravel()), max(abs(v) for v in g_hi.ravel()))
        return Fraction(m, 1 << E)

    def exact_power_integrals(self, qs, offset=None) -> dict:
        """Map q -> (lower, upper) for the integral of |g|^q over [0,1)^d.

        Both ends are exact rationals for integer q and coincide for even q
        (and for odd q when no cell changes sign).  Non-integer q gives a
        float bracket from corner values.
        """
        ctil, K, E = self._scaled(offset)
        lo, hi, g_lo, g_hi = self._corners(ctil, K)
        dW = self.d * self.W
        straddle = (g_lo > 0) & (g_hi < 0)
        straddle = straddle.astype(bool)
        widths = [h - l for l, h in zip(lo, hi)]
        vol_t = _outer(widths)
        out = {}
        for q in qs:
            if float(q).is_integer() and q >= 1:
                out[q] = self._exact_integer_q(int(q), ctil, K, E, lo, hi, g_lo, g_hi, straddle, vol_t, dW)
            else:
                out[q] = self._corner_bracket(float(q), g_lo, g_hi, straddle, vol_t, E, dW)
        return out

    def _exact_integer_q(self, q, ctil, K, E, lo, hi, g_lo, g_hi, straddle, vol_t, dW):
        L = lcm(*range(1, q + 2))
        J = 0
        for p in range(q + 1):
            moments = []
            for j in range(self.d):
                moments.append(np.array([b ** (p + 1) - a ** (p + 1) for a, b in zip(lo[j], hi[j])],
                                        dtype=object))
            factor = comb(q, p) * (-K) ** p * (L // (p + 1)) ** self.d
            J = J + factor * ctil ** (q - p) * _outer(moments)
        den = L ** self.d * (1 << (E * q + dW))
        if q % 2 == 0 or not straddle.any():
            sign = np.where(g_hi >= 0, 1, -1).astype(object) if q % 2 else 1
            total = Fraction(int(np.sum(sign * J)), den)
            return total, total
        sign = np.where(g_hi >= 0, 1, -1).astype(object)
        flat = ~straddle
        base = Fraction(int(np.sum((sign * J)[flat])) if flat.any() else 0, den)
        J_s = J[straddle]
        bound = np.maximum(g_lo, -g_hi)
        crude_lo = base + Fraction(sum(abs(int(v)) for v in J_s), den)
        crude_hi = base + Fraction(sum(int(v) for v in (vol_t * bound ** q * L ** self.d)[straddle]), den)
        if self.d == 1:
            # the single root c/N is rational, so the integral is exact
            num = sum(int(a) ** (q + 1) + (-int(b)) ** (q + 1)
                      for a, b in zip(g_lo[straddle], g_hi[straddle]))
            exact = base + Fraction(num, K * (q + 1) * (1 << (E * q + self.W)))
            return exact, exact
        if self.d == 2:
            idx = np.nonzero(straddle)
            c = np.array([float(Fraction(int(v), 1 << E)) for v in ctil[idx]])
            scale = float(1 << self.W)
            a1 = np.array([lo[0][i] for i in idx[0]], dtype=float) / scale
            b1 = np.array([hi[0][i] for i in idx[0]], dtype=float) / scale
            a2 = np.array([lo[1][i] for i in idx[1]], dtype=float) / scale
            b2 = np.array([hi[1][i] for i in idx[1]], dtype=float) / scale
            neg = negative_part_2d(q, c, float(self.N), a1, b1, a2, b2)
            signed = float(Fraction(int(np.sum(J_s)), den))
            value = float(base) + signed + 2.0 * float(np.sum(neg))
            envelope = float(crude_hi - base)
            radius = STRADDLE_RTOL * envelope + 64 * EPS * abs(float(base))
            lower = max(crude_lo, Fraction(value - radius))
            upper = min(crude_hi, Fraction(value + radius))
            return lower, upper
        return crude_lo, crude_hi

    def _corner_bracket(self, q, g_lo, g_hi, straddle, vol_t, E, dW):
        a = np.abs(np.ldexp(g_lo.astype(float), -E))
        b = np.abs(np.ldexp(g_hi.astype(float), -E))
        vol = np.ldexp(vol_t.astype(float), -dW)
        big = np.maximum(a, b) ** q * vol
        small = np.where(straddle, 0.0, np.minimum(a, b) ** q * vol)
        pad = 1e-12
        return float(small.sum()) * (1 - pad), float(big.sum()) * (1 + pad)

    # floating point evaluation (d = 2) --------------------------------------
    def float_power_integrals_2d(self, qs) -> dict:
        """Map q -> (lower, upper) in floating point for two-dimensional sets.

        Uses the expansion of g about each cell centre,
        g = G0 - A t1 - B t2 - K t1 t2 with t uniform on [-1/2, 1/2]^2, whose
        moments are integrated in closed form; all terms are O(1) so there
        is no cancellation.  The returned bracket includes a rounding radius.
        """
        if self.d != 2:
            raise ValueError("the floating-point cell path is two-dimensional")
        N = float(self.N)
        e = [np.ldexp(np.array([float(v) for v in self.edges[j]]), -self.W) for j in range(2)]
        a1, b1, a2, b2 = e[0][:-1], e[0][1:], e[1][:-1], e[1][1:]
        m1, m2 = (a1 + b1) / 2, (a2 + b2) / 2
        h1, h2 = b1 - a1, b2 - a2
        C = self.counts.astype(float)
        G0 = C - N * np.outer(m1, m2)
        g_lo = C - N * np.outer(a1, a2)
        g_hi = C - N * np.outer(b1, b2)
        straddle = (g_lo > 0) & (g_hi < 0)
        absmax = np.maximum(np.abs(g_lo), np.abs(g_hi))
        any_straddle = bool(straddle.any())
        sidx = np.nonzero(straddle) if any_straddle else None
        ncells = G0.size
        area = np.outer(h1, h2)
        powers = {1: G0}
        mpowers = {0: np.ones_like(absmax), 1: absmax}

        def gpow(i):
            if i not in powers:
                powers[i] = gpow(i // 2) * gpow(i - i // 2)
            return powers[i]

        def apow(i):
            if i not in mpowers:
                mpowers[i] = apow(i // 2) * apow(i - i // 2)
            return mpowers[i]

        out = {}
        for q in qs:
            qf = float(q)
            if not (qf.is_integer() and qf >= 1):
                amin = np.minimum(np.abs(g_lo), np.abs(g_hi))
                small = np.where(straddle, 0.0, amin ** qf) * area
                big = absmax ** qf * area
                pad = 1e-9
                out[q] = (float(small.sum()) * (1 - pad), float(big.sum()) * (1 + pad))
                continue
            qi = int(qf)
            sign = None
            if qi % 2:
                sign = np.where(g_hi >= 0, 1.0, -1.0)
                sign[straddle] = 0.0
            total = 0.0
            for i in range(qi + 1):
                U, V, coef = _rank_one_terms(qi, i, N, m1, m2, h1, h2)
                if coef is None:
                    continue
                if i == 0 and sign is None:
                    total += float(np.sum(coef * U.sum(axis=0) * V.sum(axis=0)))
                    continue
                if i == 0:
                    P = sign
                else:
                    P = gpow(i) if sign is None else sign * gpow(i)
                total += float(np.sum(coef * np.sum(U * (P @ V), axis=0)))
            lower = upper = total
            if qi % 2 and straddle.any():
                r1, r2 = np.nonzero(straddle)
                per_cell = _cell_moments(qi, G0[r1, r2], N, m1[r1], m2[r2], h1[r1], h2[r2])
                envelope = h1[r1] * h2[r2] * absmax[r1, r2] ** qi
                neg = negative_part_2d(qi, C[r1, r2], N, a1[r1], b1[r1], a2[r2], b2[r2])
                value = per_cell + 2.0 * neg
                lo_cell = np.maximum(np.abs(per_cell), value - STRADDLE_RTOL * envelope)
                hi_cell = np.minimum(envelope, value + STRADDLE_RTOL * envelope)
                lower += float(np.sum(lo_cell))
                upper += float(np.sum(hi_cell))
            scale = float(np.sum(area * apow(qi)))
            drift = float(np.sum(area * apow(qi - 1)))
            radius = (ncells + 8 * qi + 16) * EPS * scale + 4 * qi * N * EPS * drift
            out[q] = (max(lower - radius, 0.0), upper + radius)
        return out


def _mu(n: int) -> float:
    """E[t^n] for t uniform on [-1/2, 1/2]."""
    return 0.0 if n % 2 else 1.0 / ((n + 1) * 2 ** n)


def _rank_one_terms(q, i, N, m1, m2, h1, h2):
    """Columns u_r, v_r and weights so that sum_r c_r u_r v_r^T is the
    area-weighted coefficient of G0^i in E[g^q]."""
    rest = q - i
    us, vs, cs = [], [], []
    for j in range(rest + 1):
        for k in range(rest - j + 1):
            l = rest - j - k
            w = _mu(j + l) * _mu(k + l)
            if w == 0.0:
                continue
            c = factorial(q) / (factorial(i) * factorial(j) * factorial(k) * factorial(l)) * w
            c *= (-N) ** (j + k + l)
            us.append(h1 ** (j + l + 1) * m1 ** k)
            vs.append(m2 ** j * h2 ** (k + l + 1))
            cs.append(c)
    if not cs:
        return None, None, None
    return np.stack(us, axis=1), np.stack(vs, axis=1), np.array(cs)


def _cell_moments(q, g0, N, m1, m2, h1, h2):
    """Per-cell integral of g^q for selected cells (vectors of equal length)."""
    total = np.zeros_like(g0)
    for i in range(q + 1):
        rest = q - i
        for j in range(rest + 1):
            for k in range(rest - j + 1):
                l = rest - j - k
                w = _mu(j + l) * _mu(k + l)
                if w == 0.0:
                    continue
                c = factorial(q) / (factorial(i) * factorial(j) * factorial(k) * factorial(l)) * w
                c *= (-N) ** (j + k + l)
                total = total + c * g0 ** i * h1 ** (j + l + 1) * m1 ** k * m2 ** j * h2 ** (k + l + 1)
    return total


def _phi(n: int, t: np.ndarray) -> np.ndarray:
    """Integral of u^n / (1 + u) over [0, t] for t >= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    # t^(n+1) sum_m (-t)^m / (n+m+1) by Horner, with enough terms for a
    # 2^-56 truncation on each tier t <= 2^-k
    lower = 0.0
    for k, terms in ((16, 4), (8, 7), (4, 14), (2, 28)):
        top = 2.0 ** -k
        sel = (t > lower) & (t <= top)
        lower = top
        if not sel.any():
            continue
        ts = t[sel]
        acc = np.full_like(ts, 1.0 / (n + terms + 1))
        for m in range(terms - 1, -1, -1):
            acc = 1.0 / (n + m + 1) - ts * acc
        out[sel] = acc * ts ** (n + 1)
    small = t <= 0.25
    big = ~small
    if big.any():
        tb = t[big]
        acc = (-1) ** n * np.log1p(tb)
        for k in range(1, n + 1):
            acc += (-1) ** (n - k) * tb ** k / k
        out[big] = acc
    return out


def negative_part_2d(q, c, N, a1, b1, a2, b2):
    """Integral of (N y1 y2 - c)_+^q over [a1,b1] x [a2,b2], for c > 0 (vectorized).

    The inner integral in y2 is (N y1 b - c)_+^(q+1) / ((q+1) N y1) at the
    two ends b = b2, a2; substituting y1 = rho (1 + t) with rho = c / (N b)
    turns each piece into c^(q+1) times a difference of _phi values.
    """
    n = q + 1

    def piece(b):
        rho = c / (N * b) if np.all(b > 0) else np.where(b > 0, c / (N * np.where(b > 0, b, 1)), np.inf)
        t1 = np.maximum(b1 / rho - 1.0, 0.0)
        t0 = np.maximum(a1 / rho - 1.0, 0.0)
        return c ** n * (_phi(n, t1) - _phi(n, t0))

    return (piece(b2) - piece(a2)) / (n * N)
