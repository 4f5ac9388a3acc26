"""Random and quasi-random normal streams.

Two kinds of stream are provided:

* ``HaltonQuasi`` -- column ``j`` is the radical inverse in the ``j``-th prime
  base, mapped through the inverse normal CDF. Columns from
  ``SCRAMBLE_FROM`` onwards use a fixed digit permutation per base.
* ``SeededPseudo`` -- Philox-backed normals. Every entry ``(p, j)`` is a pure
  function of ``(seed, p, j)``: rows are produced in fixed-size blocks, each
  block/column pair drawing from its own Philox key. Optional antithetic
  pairing emits rows as ``(z, -z)``.

Both are deterministic regardless of how many rows or columns are requested
or in which order blocks are generated.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .errors import DomainError

HALTON_BURN_IN = 20
SCRAMBLE_FROM = 10
BLOCK_ROWS = 1 << 14


class StreamKind(enum.Enum):
    HALTON = "HaltonQuasi"
    PSEUDO = "SeededPseudo"


@lru_cache(maxsize=None)
def first_primes(count: int) -> tuple[int, ...]:
    primes: list[int] = []
    cand = 2
    while len(primes) < count:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return tuple(primes)


@lru_cache(maxsize=None)
def digit_permutation(base: int) -> np.ndarray:
    """Fixed permutation of ``0..base-1`` that keeps 0 in place.

    Drawn once from ``numpy.random.default_rng(base)``.
    """
    perm = np.arange(base)
    perm[1:] = np.random.default_rng(base).permutation(np.arange(1, base))
    perm.setflags(write=False)
    return perm


def halton(index: int, base: int) -> float:
    """Radical inverse of ``index`` in ``base``."""
    if index < 1:
        raise DomainError("Halton index must be >= 1")
    return float(radical_inverse(np.array([index]), base)[0])


def radical_inverse(indices: np.ndarray, base: int, perm: np.ndarray | None = None) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape)
    f = 1.0 / base
    while np.any(idx > 0):
        digit = idx % base
        if perm is not None:
            digit = perm[digit]
        out += digit * f
        idx //= base
        f /= base
    return out


def inv_norm_cdf(u):
    """Standard normal quantile; raises outside ``(0, 1)``."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
        raise DomainError("inverse normal CDF needs 0 < u < 1")
    out = ndtri(u)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NormalStream:
    kind: StreamKind
    dimension: int
    seed: int = 0
    skip: int = HALTON_BURN_IN
    antithetic: bool = False

    @classmethod
    def halton(cls, dimension: int, skip: int = HALTON_BURN_IN) -> "NormalStream":
        return cls(StreamKind.HALTON, dimension, skip=skip)

    @classmethod
    def pseudo(cls, dimension: int, seed: int, antithetic: bool = True) -> "NormalStream":
        return cls(StreamKind.PSEUDO, dimension, seed=seed, antithetic=antithetic)


def _philox_block(seed: int, col: int, block: int, rows: int) -> np.ndarray:
    key = np.array([seed & (2**64 - 1), (col << 32) | block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(rows)


def _pseudo_base_rows(seed: int, start: int, stop: int, cols: int) -> np.ndarray:
    out = np.empty((stop - start, cols))
    first_block, last_block = start // BLOCK_ROWS, (stop - 1) // BLOCK_ROWS
    for b in range(first_block, last_block + 1):
        lo = max(start, b * BLOCK_ROWS)
        hi = min(stop, (b + 1) * BLOCK_ROWS)
        for j in range(cols):
            col = _philox_block(seed, j, b, BLOCK_ROWS)
            out[lo - start : hi - start, j] = col[lo - b * BLOCK_ROWS : hi - b * BLOCK_ROWS]
    return out


def normal_matrix(stream: NormalStream, rows: int, cols: int, start: int = 0) -> np.ndarray:
    """Rows ``start .. start+rows-1`` and the first ``cols`` columns of the stream."""
    if cols > stream.dimension:
        raise DomainError(f"stream dimension {stream.dimension} < requested {cols}")
    if rows == 0:
        return np.empty((0, cols))
    if stream.kind is StreamKind.HALTON:
        idx = np.arange(start, start + rows) + 1 + stream.skip
        out = np.empty((rows, cols))
        for j, base in enumerate(first_primes(cols)):
            perm = digit_permutation(base) if j >= SCRAMBLE_FROM else None
            out[:, j] = ndtri(radical_inverse(idx, base, perm))
        return out
    if not stream.antithetic:
        return _pseudo_base_rows(stream.seed, start, start + rows, cols)
    stop = start + rows
    base = _pseudo_base_rows(stream.seed, start // 2, (stop + 1) // 2, cols)
    pairs = np.empty((2 * base.shape[0], cols))
    pairs[0::2] = base
    pairs[1::2] = -base
    offset = start - 2 * (start // 2)
    return pairs[offset : offset + rows]
