"""Truncated local discrepancy on the grid Q^d(2^s) as a scaled integer array.

For Y on the grid, L^(s)[D, Y] equals
    sum_X prod_j ([x_j^(s) < y_j] + 1/2 [x_j^(s) = y_j]) - N prod_j (y_j + 2^(-s-1)),
so 2^(d(s+1)) L^(s) is an integer.  The point term is a histogram of D^(s)
pushed through the operator 2 * cumsum - identity along every axis.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import GuardError

MAX_GRID_CELLS = 1 << 24


def _check_grid(d: int, s: int) -> None:
    if (1 << (d * s)) > MAX_GRID_CELLS:
        raise GuardError(f"grid Q^{d}(2^{s}) has 2^{d * s} cells; limit is 2^24")


def truncated_grid_scaled(mantissas: np.ndarray, w: int, d: int, s: int) -> np.ndarray:
    """2^(d(s+1)) * L^(s)[D, Y] for every Y in Q^d(2^s), indexed by mantissas of Y."""
    _check_grid(d, s)
    N = mantissas.shape[0]
    n = 1 << s
    fits = N.bit_length() + d * (s + 1) + 1 <= 62
    dtype = np.int64 if fits else object
    hist = np.zeros((n,) * d, dtype=np.int64)
    if N:
        if w - s >= 64:
            m = np.zeros_like(mantissas)
        else:
            m = mantissas >> np.uint64(w - s) if w >= s else mantissas << np.uint64(s - w)
        np.add.at(hist, tuple(m[:, j].astype(np.int64) for j in range(d)), 1)
    W = hist.astype(dtype)
    for ax in range(d):
        W = 2 * np.cumsum(W, axis=ax) - W
    odd = np.arange(1, 2 * n, 2, dtype=np.int64).astype(dtype)
    vol = None
    for j in range(d):
        shape = [1] * d
        shape[j] = n
        v = odd.reshape(shape)
        vol = v if vol is None else vol * v
    return W * (1 << (d * s)) - N * vol


def scale_exponent(d: int, s: int) -> int:
    return d * (s + 1)


def power_sum(values: np.ndarray, q: int) -> int:
    """Exact sum of |v|^q over an integer array."""
    vals, counts = np.unique(np.abs(np.asarray(values).ravel()), return_counts=True)
    return sum(int(c) * int(v) ** q for v, c in zip(vals, counts))


def grid_power_mean(values: np.ndarray, q: int, exponent: int) -> Fraction:
    """Mean of |v / 2^exponent|^q over the array, as an exact rational."""
    return Fraction(power_sum(values, q), values.size << (exponent * q))


def grid_power_mean_float(values: np.ndarray, q: float, exponent: int) -> float:
    vals, counts = np.unique(np.abs(np.asarray(values).ravel()), return_counts=True)
    x = np.array([float(Fraction(int(v), 1 << exponent)) for v in vals])
    return float(np.sum(counts * x ** q)) / values.size
