"""Point sets, digital nets, net verification and dyadic shifts."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dyadic import DEFAULT_PRECISION, DyadicPoint, ElementaryBox, as_point

MAX_PRECISION = 64


def _as_mantissa_array(rows, d: int) -> np.ndarray:
    arr = np.array(rows, dtype=np.uint64).reshape(-1, d)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """A multiset of N points in [0,1)^d at a shared precision ``w``.

    ``mantissas`` is a read-only (N, d) uint64 array; point i has coordinates
    ``mantissas[i] / 2**w``.
    """

    d: int
    w: int
    mantissas: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if not 0 <= self.w <= MAX_PRECISION:
            raise ValueError(f"precision must lie in [0, {MAX_PRECISION}]")
        m = self.mantissas
        if not (isinstance(m, np.ndarray) and m.dtype == np.uint64 and not m.flags.writeable):
            rows = [[int(v) for v in row] for row in np.asarray(m, dtype=object).reshape(-1, self.d)]
            for row in rows:
                for v in row:
                    if not 0 <= v < (1 << self.w):
                        raise ValueError(f"mantissa {v} out of range for precision {self.w}")
            m = _as_mantissa_array(rows, self.d) if rows else np.zeros((0, self.d), np.uint64)
            m.setflags(write=False)
            object.__setattr__(self, "mantissas", m)
        if m.ndim != 2 or m.shape[1] != self.d:
            raise ValueError("mantissa array must have shape (N, d)")
        if self.w < MAX_PRECISION and m.size and int(m.max()) >> self.w:
            raise ValueError(f"mantissa out of range for precision {self.w}")

    # construction -----------------------------------------------------
    @classmethod
    def from_points(cls, points: Sequence[DyadicPoint], d: int | None = None) -> "PointSet":
        pts = [as_point(p) for p in points]
        if not pts:
            if d is None:
                raise ValueError("dimension required for an empty set")
            return cls(d, 0, np.zeros((0, d), np.uint64))
        d = pts[0].d
        if any(p.d != d for p in pts):
            raise ValueError("points have different dimensions")
        w = max(p.precision for p in pts)
        return cls(d, w, [p.at_precision(w).mantissas for p in pts])

    @classmethod
    def from_fractions(cls, rows: Iterable[Sequence], w: int | None = None) -> "PointSet":
        return cls.from_points([DyadicPoint.from_fractions(r, w) for r in rows])

    @classmethod
    def quantize(cls, rows, w: int = DEFAULT_PRECISION) -> "PointSet":
        """Round real coordinates in [0,1) down to ``w`` bits."""
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2:
            raise ValueError("expected an (N, d) array")
        if np.any(arr < 0) or np.any(arr >= 1):
            raise ValueError("coordinates must lie in [0, 1)")
        mant = [[int(Fraction(float(x)) * (1 << w)) for x in row] for row in arr]
        return cls(arr.shape[1], w, mant)

    @classmethod
    def empty(cls, d: int, w: int = 0) -> "PointSet":
        return cls(d, w, np.zeros((0, d), np.uint64))

    # views ------------------------------------------------------------
    @property
    def N(self) -> int:
        return self.mantissas.shape[0]

    def __len__(self) -> int:
        return self.N

    @property
    def points(self) -> list[DyadicPoint]:
        return [DyadicPoint(tuple(int(v) for v in row), self.w) for row in self.mantissas]

    def int_rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.mantissas]

    def fractions(self) -> list[tuple[Fraction, ...]]:
        den = 1 << self.w
        return [tuple(Fraction(v, den) for v in row) for row in self.int_rows()]

    def floats(self) -> np.ndarray:
        return self.mantissas.astype(float) / float(1 << self.w)

    def at_precision(self, w: int) -> "PointSet":
        if w < self.w:
            raise ValueError("cannot lower precision without rounding; use project_set")
        if w == self.w:
            return self
        return PointSet(self.d, w, _frozen(self.mantissas << np.uint64(w - self.w)))

    def sorted_key(self) -> bytes:
        """Canonical bytes of the multiset (order independent)."""
        m = self.mantissas
        if self.N:
            m = m[np.lexsort(m.T[::-1])]
        return bytes(str((self.d, self.w)), "ascii") + m.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        if self.d != other.d or self.N != other.N:
            return False
        w = max(self.w, other.w)
        return self.at_precision(w).sorted_key() == other.at_precision(w).sorted_key()

    __hash__ = None

    def union(self, other: "PointSet") -> "PointSet":
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        w = max(self.w, other.w)
        a, b = self.at_precision(w).mantissas, other.at_precision(w).mantissas
        return PointSet(self.d, w, _frozen(np.vstack([a, b])))

    def __repr__(self) -> str:
        return f"PointSet(d={self.d}, w={self.w}, N={self.N})"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.uint64)
    arr.setflags(write=False)
    return arr


def shift_set(D: PointSet, T) -> PointSet:
    """D XOR T, coordinatewise."""
    T = as_point(T)
    if T.d != D.d:
        raise ValueError(f"dimension mismatch: set has d={D.d}, shift has d={T.d}")
    w = max(D.w, T.precision)
    base = D.at_precision(w).mantissas
    t = np.array(T.at_precision(w).mantissas, dtype=np.uint64)
    return PointSet(D.d, w, _frozen(base ^ t))


def project_set(D: PointSet, s: int) -> PointSet:
    """Truncate every coordinate to ``s`` bits; multiplicities are kept."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s >= D.w:
        return PointSet(D.d, s, _frozen(D.mantissas << np.uint64(s - D.w)))
    if D.w - s >= 64:
        return PointSet(D.d, s, _frozen(np.zeros_like(D.mantissas)))
    return PointSet(D.d, s, _frozen(D.mantissas >> np.uint64(D.w - s)))


def full_grid(d: int, s: int) -> PointSet:
    """All 2^(ds) points of the grid with spacing 2^-s."""
    axes = np.meshgrid(*[np.arange(1 << s, dtype=np.uint64)] * d, indexing="ij")
    return PointSet(d, s, _frozen(np.stack([a.ravel() for a in axes], axis=1)))


# digital nets ---------------------------------------------------------

@dataclass(frozen=True)
class GeneratorMatrices:
    """d binary s x s matrices.

    Row i (0-based) of ``matrices[j]`` produces binary digit i+1 of coordinate
    j; column k acts on digit k of the point index m = sum m_k 2^k.
    """

    matrices: tuple

    def __post_init__(self):
        mats = tuple(tuple(tuple(int(b) for b in row) for row in mat) for mat in self.matrices)
        if not mats:
            raise ValueError("need at least one matrix")
        s = len(mats[0])
        for mat in mats:
            if len(mat) != s or any(len(row) != s for row in mat):
                raise ValueError("every matrix must be s x s with the same s")
            if any(b not in (0, 1) for row in mat for b in row):
                raise ValueError("matrix entries must be 0 or 1")
        object.__setattr__(self, "matrices", mats)

    @property
    def d(self) -> int:
        return len(self.matrices)

    @property
    def s(self) -> int:
        return len(self.matrices[0])

    def column_mantissas(self, j: int) -> list[int]:
        """Column k of matrix j read as an s-bit mantissa (row 0 is the top bit)."""
        s = self.s
        mat = self.matrices[j]
        return [sum(mat[i][k] << (s - 1 - i) for i in range(s)) for k in range(s)]


def identity_matrix(s: int) -> tuple:
    return tuple(tuple(int(i == k) for k in range(s)) for i in range(s))


def reversal_matrix(s: int) -> tuple:
    return tuple(tuple(int(i + k == s - 1) for k in range(s)) for i in range(s))


def generate_digital_net(G: GeneratorMatrices) -> PointSet:
    s = G.s
    m = np.arange(1 << s, dtype=np.uint64)
    cols = []
    for j in range(G.d):
        x = np.zeros(1 << s, dtype=np.uint64)
        for k, c in enumerate(G.column_mantissas(j)):
            on = (m >> np.uint64(k)) & np.uint64(1)
            x ^= on * np.uint64(c)
        cols.append(x)
    return PointSet(G.d, s, _frozen(np.stack(cols, axis=1)))


def bitrev_matrices(s: int) -> GeneratorMatrices:
    return GeneratorMatrices((reversal_matrix(s), identity_matrix(s)))


def generate_bitrev_net(s: int) -> PointSet:
    """The points (m 2^-s, rev_s(m) 2^-s), m < 2^s."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    return generate_digital_net(bitrev_matrices(s))


def _load_directions() -> dict[int, tuple[int, int, list[int]]]:
    text = resources.files(__package__).joinpath("data/sobol_directions.txt").read_text()
    table = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        j, deg, a, *ms = (int(t) for t in line.split())
        table[j] = (deg, a, ms)
    return table


SOBOL_MAX_DIM = 8


def sobol_matrices(d: int, s: int) -> GeneratorMatrices:
    """Generator matrices of the first d Sobol coordinates, truncated to s digits."""
    if not 1 <= d <= SOBOL_MAX_DIM:
        raise ValueError(f"Sobol table covers 1 <= d <= {SOBOL_MAX_DIM}")
    table = _load_directions()
    mats = [identity_matrix(s)]
    for j in range(2, d + 1):
        deg, a, ms = table[j]
        m = list(ms)
        for i in range(deg, s):
            new = m[i - deg] ^ (m[i - deg] << deg)
            for k in range(1, deg):
                if (a >> (deg - 1 - k)) & 1:
                    new ^= m[i - k] << k
            m.append(new)
        # column k (1-based) holds v_k = m_k / 2^k
        cols = [m[k - 1] << (s - k) for k in range(1, s + 1)]
        mats.append(tuple(tuple((cols[k] >> (s - 1 - i)) & 1 for k in range(s)) for i in range(s)))
    return GeneratorMatrices(tuple(mats))


def net_family(name: str, s: int, d: int = 2) -> PointSet:
    """Built-in families: ``bitrev`` (d = 2), ``identity`` (d = 1) and ``sobol``."""
    if name == "bitrev":
        if d != 2:
            raise ValueError("bitrev nets are two-dimensional")
        return generate_bitrev_net(s)
    if name == "identity":
        if d != 1:
            raise ValueError("the identity family is one-dimensional")
        return generate_digital_net(GeneratorMatrices((identity_matrix(s),)))
    if name == "sobol":
        return generate_digital_net(sobol_matrices(d, s))
    if name == "grid":
        return full_grid(d, s)
    raise ValueError(f"unknown net family {name!r}")


# net verification -----------------------------------------------------

@dataclass(frozen=True)
class NetCheckReport:
    is_net: bool
    minimal_delta: int
    delta: int
    s: int
    witness: ElementaryBox | None = None
    witness_count: int | None = None

    def to_dict(self) -> dict:
        out = {"is_net": self.is_net, "minimal_delta": self.minimal_delta,
               "delta": self.delta, "s": self.s}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
            out["witness_count"] = self.witness_count
        return out


def compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"N = {n} is not a power of two")
    return n.bit_length() - 1


def _first_bad_box(m: np.ndarray, w: int, s: int, delta: int):
    """First box of volume 2^(delta-s) whose count differs from 2^delta."""
    d = m.shape[1]
    level = s - delta
    cols = [m[:, j].astype(np.int64) if w <= 62 else m[:, j] for j in range(d)]
    for A in compositions(level, d):
        idx = np.zeros(m.shape[0], dtype=np.int64)
        for j, a in enumerate(A):
            if a:
                idx = (idx << a) | (cols[j] >> (w - a)).astype(np.int64)
        counts = np.bincount(idx, minlength=1 << level)
        bad = np.flatnonzero(counts != (1 << delta))
        if bad.size:
            code = int(bad[0])
            M = []
            for a in reversed(A):
                M.append(code & ((1 << a) - 1))
                code >>= a
            return ElementaryBox(A, tuple(reversed(M))), int(counts[bad[0]])
    return None


def check_net(D: PointSet, delta: int) -> NetCheckReport:
    """Test the (delta, s, d)-net property of a 2^s-point set exhaustively."""
    s = log2_exact(D.N)
    if not 0 <= delta <= s:
        raise ValueError(f"delta must lie in [0, {s}]")
    w = max(D.w, s)
    m = D.at_precision(w).mantissas
    found = _first_bad_box(m, w, s, delta)
    if found is None:
        minimal = delta
        while minimal > 0 and _first_bad_box(m, w, s, minimal - 1) is None:
            minimal -= 1
        return NetCheckReport(True, minimal, delta, s)
    minimal = delta + 1
    # passing is monotone in delta, so search downward from the trivial delta = s
    top = s
    while top > minimal and _first_bad_box(m, w, s, top - 1) is None:
        top -= 1
    box, count = found
    return NetCheckReport(False, top, delta, s, box, count)


def minimal_delta(D: PointSet) -> int:
    return check_net(D, log2_exact(D.N)).minimal_delta


def column_counts(D: PointSet, s: int) -> np.ndarray:
    """N_{j,m}: number of points whose j-th coordinate lies in [m 2^-s, (m+1) 2^-s)."""
    P = project_set(D, s).mantissas.astype(np.int64)
    return np.stack([np.bincount(P[:, j], minlength=1 << s) for j in range(D.d)])


# file formats ---------------------------------------------------------

def format_point_set(D: PointSet) -> str:
    lines = [f"{D.d} {D.w} {D.N}"]
    lines += [" ".join(str(int(v)) for v in row) for row in D.mantissas]
    return "\n".join(lines) + "\n"


def parse_point_set(text: str) -> PointSet:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise ValueError("point-set header must read 'd w N'")
    d, w, n = (int(t) for t in rows[0])
    body = rows[1:]
    if len(body) != n:
        raise ValueError(f"header announces {n} points, found {len(body)}")
    for row in body:
        if len(row) != d:
            raise ValueError(f"expected {d} mantissas per line, got {len(row)}")
    return PointSet(d, w, [[int(t) for t in row] for row in body]) if n else PointSet.empty(d, w)


def read_point_set(path) -> PointSet:
    return parse_point_set(Path(path).read_text())


def write_point_set(D: PointSet, path) -> None:
    Path(path).write_text(format_point_set(D))


def format_matrices(G: GeneratorMatrices) -> str:
    lines = [f"{G.d} {G.s}"]
    for mat in G.matrices:
        lines += ["".join(str(b) for b in row) for row in mat]
    return "\n".join(lines) + "\n"


def parse_matrices(text: str) -> GeneratorMatrices:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty matrix file")
    head = rows[0].split()
    if len(head) != 2:
        raise ValueError("matrix header must read 'd s'")
    d, s = int(head[0]), int(head[1])
    body = ["".join(r.split()) for r in rows[1:]]
    if len(body) != d * s:
        raise ValueError(f"expected {d * s} bit rows, found {len(body)}")
    for r in body:
        if len(r) != s or set(r) - {"0", "1"}:
            raise ValueError(f"malformed bit row {r!r}")
    mats = tuple(tuple(tuple(int(c) for c in body[j * s + i]) for i in range(s)) for j in range(d))
    return GeneratorMatrices(mats)


def read_matrices(path) -> GeneratorMatrices:
    return parse_matrices(Path(path).read_text())


def random_point_set(N: int, d: int, w: int = 32, seed: int = 0) -> PointSet:
    """N uniform points with w-bit coordinates from a Philox stream keyed by (seed, 1).

    The second key word keeps point streams apart from shift streams.
    """
    if not 1 <= w <= 64:
        raise ValueError("precision must lie in [1, 64]")
    rng = np.random.Generator(np.random.Philox(key=[seed, 1]))
    if w == 64:
        m = rng.integers(0, np.iinfo(np.uint64).max, size=(N, d), dtype=np.uint64, endpoint=True)
    else:
        m = rng.integers(0, 1 << w, size=(N, d), dtype=np.uint64)
    return PointSet(d, w, m) if N else PointSet.empty(d, w)
