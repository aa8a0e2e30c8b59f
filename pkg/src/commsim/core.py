"""Shared primitives: symbol blocks, probability tables, random source, math helpers."""

from __future__ import annotations

import math
import os
import statistics

import numpy as np

__all__ = [
    "SymbolBlock",
    "ProbTable",
    "RandomSource",
    "os_entropy_seed",
    "gray_encode",
    "gray_decode",
    "qfunc",
    "normal_quantile",
    "levenshtein",
    "hamming",
]


class SymbolBlock:
    """Ordered block of integer symbols drawn from the alphabet {0..q-1}."""

    __slots__ = ("q", "data")

    def __init__(self, q: int, data) -> None:
        q = int(q)
        if q < 2:
            raise ValueError(f"alphabet size must be >= 2, got {q}")
        arr = np.asarray(data, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("symbol data must be one-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= q):
            raise ValueError(f"symbols out of range for alphabet size {q}")
        self.q = q
        self.data = arr

    def __len__(self) -> int:
        return self.data.size

    def __iter__(self):
        return iter(self.data.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolBlock):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        head = ",".join(str(v) for v in self.data[:8])
        tail = ",..." if len(self) > 8 else ""
        return f"SymbolBlock(q={self.q}, [{head}{tail}] len={len(self)})"

    @classmethod
    def zeros(cls, q: int, n: int) -> "SymbolBlock":
        return cls(q, np.zeros(n, dtype=np.int64))


class ProbTable:
    """Per-position probability masses: row i holds the masses of each symbol at i.

    Entries are nonnegative but rows are not necessarily normalized; use
    :meth:`normalized` to obtain unit-sum rows (zero rows become uniform).
    """

    __slots__ = ("p",)

    def __init__(self, p) -> None:
        arr = np.asarray(p, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("probability table must be two-dimensional")
        if arr.size and arr.min() < 0:
            raise ValueError("probability table entries must be nonnegative")
        self.p = arr

    @property
    def q(self) -> int:
        return self.p.shape[1]

    def __len__(self) -> int:
        return self.p.shape[0]

    def normalized(self) -> tuple["ProbTable", int]:
        """Row-normalized copy plus the number of zero-mass rows replaced by uniform."""
        sums = self.p.sum(axis=1)
        dead = sums <= 0.0
        nzero = int(dead.sum())
        safe = np.where(dead, 1.0, sums)
        out = self.p / safe[:, None]
        if nzero:
            out[dead] = 1.0 / self.q
        return ProbTable(out), nzero

    def is_normalized(self, tol: float = 1e-9) -> bool:
        if len(self) == 0:
            return True
        return bool(np.all(np.abs(self.p.sum(axis=1) - 1.0) <= tol))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbTable):
            return NotImplemented
        return self.p.shape == other.p.shape and np.array_equal(self.p, other.p)

    def __repr__(self) -> str:
        return f"ProbTable({len(self)}x{self.q})"

    @classmethod
    def uniform(cls, n: int, q: int) -> "ProbTable":
        return cls(np.full((n, q), 1.0 / q))

    @classmethod
    def point_mass(cls, block: SymbolBlock) -> "ProbTable":
        """Deterministic table: mass 1 on each position's symbol."""
        out = np.zeros((len(block), block.q))
        out[np.arange(len(block)), block.data] = 1.0
        return cls(out)


class RandomSource:
    """Seeded pseudo-random stream; equal seeds produce equal draw sequences.

    Backed by numpy's PCG64. Instances are not thread-safe: each concurrent
    worker owns its own source (use :meth:`spawn` for independent children).
    """

    __slots__ = ("seed", "_seq", "_rng")

    def __init__(self, seed) -> None:
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
            self.seed = seed.entropy
        else:
            self.seed = int(seed)
            if self.seed < 0:
                raise ValueError("seed must be nonnegative")
            self._seq = np.random.SeedSequence(self.seed)
        self._rng = np.random.default_rng(self._seq)

    def spawn(self) -> "RandomSource":
        """Independent child source (deterministic given this source's seed)."""
        (child,) = self._seq.spawn(1)
        return RandomSource(child)

    def uniform_int(self, bound: int) -> int:
        return int(self._rng.integers(bound))

    def uniform(self) -> float:
        return float(self._rng.random())

    def normal(self) -> float:
        return float(self._rng.standard_normal())

    def integers(self, bound: int, size: int) -> np.ndarray:
        return self._rng.integers(0, bound, size=size, dtype=np.int64)

    def uniforms(self, size: int) -> np.ndarray:
        return self._rng.random(size)

    def normals(self, size: int) -> np.ndarray:
        return self._rng.standard_normal(size)

    def laplaces(self, scale: float, size: int) -> np.ndarray:
        return self._rng.laplace(0.0, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._rng.permutation(n)


def os_entropy_seed() -> int:
    """Fresh 64-bit seed from OS entropy (used by simulation clients)."""
    return int.from_bytes(os.urandom(8), "little")


def _check_pow2(m: int) -> int:
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"{m} is not a power of two")
    return m


def gray_encode(index: int, m: int) -> int:
    """Binary-reflected Gray code of ``index`` within a power-of-two alphabet."""
    _check_pow2(m)
    if not 0 <= index < m:
        raise ValueError(f"index {index} out of range [0, {m})")
    return index ^ (index >> 1)


def gray_decode(code: int, m: int) -> int:
    """Inverse of :func:`gray_encode`."""
    _check_pow2(m)
    if not 0 <= code < m:
        raise ValueError(f"code {code} out of range [0, {m})")
    out = code
    shift = 1
    while (code >> shift) > 0:
        out ^= code >> shift
        shift += 1
    return out


def qfunc(x: float) -> float:
    """Gaussian tail probability P(X > x) for standard normal X."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def normal_quantile(confidence: float) -> float:
    """Two-sided standard-normal quantile: z such that P(|X| <= z) = confidence."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    return statistics.NormalDist().inv_cdf(0.5 + confidence / 2.0)


def hamming(a: SymbolBlock, b: SymbolBlock) -> int:
    """Hamming distance between equal-length blocks over the same alphabet."""
    if a.q != b.q:
        raise ValueError("alphabet mismatch")
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return int(np.count_nonzero(a.data != b.data))


def levenshtein(a: SymbolBlock, b: SymbolBlock) -> int:
    """Minimum number of insertions, deletions and substitutions from a to b."""
    if a.q != b.q:
        raise ValueError("alphabet mismatch")
    x, y = a.data, b.data
    if x.size == 0 or y.size == 0:
        return int(max(x.size, y.size))
    # Row-vectorized DP: the sequential insert scan cur[j] = min(cur[j-1]+1, m[j])
    # collapses to a running minimum of m[j] - j.
    prev = np.arange(y.size + 1, dtype=np.int64)
    idx = np.arange(y.size + 1, dtype=np.int64)
    for i in range(x.size):
        sub = prev[:-1] + (y != x[i])
        m = np.minimum(prev[1:] + 1, sub)
        m = np.concatenate(([i + 1], m))
        prev = np.minimum.accumulate(m - idx) + idx
    return int(prev[-1])
