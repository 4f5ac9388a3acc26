"""Moving-average state processes.

Three representations of the information needed to price a Bermudan
moving-average call are used throughout the package:

* ``FullA``: the last partial averages ``A_n``. Component ``i`` (1-based)
  is the mean of the last ``M + 1 - i`` observed prices, except the last
  component which is the spot itself.
* ``ReducedB``: ``A_n`` without its first component. It is the sufficient
  statistic for the continuation value.
* ``SimilarityC``: ``B_n`` without its last component, divided by the spot.
  The spot is carried separately as a scale.

All vectors are stored oldest-average-first, spot-last. The batched helpers
(``*_batch``) operate row-wise on 2-D arrays and are what the engines use.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError


class Representation(enum.Enum):
    FULL_A = "FullA"
    REDUCED_B = "ReducedB"
    SIMILARITY_C = "SimilarityC"


@dataclass(frozen=True)
class OptionSpec:
    """Bermudan moving-average call with ``N`` monitoring dates on ``(0, T]``.

    The payoff at ``t_n`` is ``max(0, S_{t_n} - mean(S_{t_{n-M+1}}, ..., S_{t_n}))``
    and exercise is allowed at ``t_n`` for ``n = M, ..., N``.
    """

    maturity: float
    n_dates: int
    window: int

    def __post_init__(self):
        if not self.maturity > 0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        if not 2 <= self.window <= self.n_dates:
            raise DomainError(
                f"need 2 <= M <= N, got M={self.window}, N={self.n_dates}"
            )

    @property
    def dt(self) -> float:
        return self.maturity / self.n_dates

    def time(self, n: int) -> float:
        return n * self.maturity / self.n_dates

    @property
    def exercise_indices(self) -> range:
        return range(self.window, self.n_dates + 1)


class Dims(NamedTuple):
    d_a: int
    d_b: int
    d_c: int
    d_e: int | None


def dims(n: int, M: int, N: int, J: int | None = None) -> Dims:
    """Dimensions of A_n, B_n, C_n and (optionally) the rough-Bergomi features."""
    if not M <= n <= N:
        raise DomainError(f"time index n={n} outside [{M}, {N}]")
    d_a = min(M, N - n + 2)
    d_e = None if J is None else min(N - n, J) + 1
    return Dims(d_a, d_a - 1, d_a - 2, d_e)


def window_sizes(n: int, M: int, N: int) -> list[int]:
    """Number of prices averaged by each component of A_n (spot counts as 1)."""
    d_a = dims(n, M, N).d_a
    return [M + 1 - i for i in range(1, d_a)] + [1]


@dataclass(frozen=True)
class AverageState:
    time_index: int
    values: np.ndarray
    representation: Representation
    scale: float | None = None
    window: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def spot(self) -> float:
        if self.representation is Representation.SIMILARITY_C:
            return float(self.scale)
        return float(self.values[-1])


def _require(state: AverageState, rep: Representation):
    if state.representation is not rep:
        raise DomainError(
            f"expected {rep.value} state, got {state.representation.value}"
        )


def payoff(A: AverageState) -> float:
    """``max(0, spot - mean of the last M prices)`` for a FullA state."""
    _require(A, Representation.FULL_A)
    return max(0.0, float(A.values[-1] - A.values[0]))


def advance(A: AverageState, s_next: float, M: int, N: int) -> AverageState:
    """Update A_n to A_{n+1} after observing ``s_next``."""
    _require(A, Representation.FULL_A)
    if not s_next > 0:
        raise DomainError(f"next spot must be positive, got {s_next}")
    n = A.time_index
    if n + 1 > N:
        raise DomainError(f"cannot advance past maturity (n={n}, N={N})")
    d_next = dims(n + 1, M, N).d_a
    a = A.values
    out = np.empty(d_next)
    for i in range(1, d_next):
        out[i - 1] = ((M - i) * a[i] + s_next) / (M + 1 - i)
    out[-1] = s_next
    return AverageState(n + 1, out, Representation.FULL_A, window=M)


def drop_first(A: AverageState) -> AverageState:
    _require(A, Representation.FULL_A)
    return AverageState(A.time_index, A.values[1:], Representation.REDUCED_B, window=A.window)


def reconstruct_full(b_first_prev: float, B_next: AverageState, M: int) -> AverageState:
    """Recover A_{n+1} from the first component of B_n and B_{n+1}."""
    _require(B_next, Representation.REDUCED_B)
    first = ((M - 1) * b_first_prev + B_next.values[-1]) / M
    return AverageState(
        B_next.time_index,
        np.concatenate([[first], B_next.values]),
        Representation.FULL_A,
        window=M,
    )


def similarity_reduce(B: AverageState) -> AverageState:
    _require(B, Representation.REDUCED_B)
    spot = float(B.values[-1])
    if not spot > 0:
        raise DomainError(f"spot must be positive, got {spot}")
    return AverageState(
        B.time_index, B.values[:-1] / spot, Representation.SIMILARITY_C,
        scale=spot, window=B.window,
    )


def similarity_expand(C: AverageState) -> AverageState:
    _require(C, Representation.SIMILARITY_C)
    values = np.concatenate([C.values * C.scale, [C.scale]])
    return AverageState(C.time_index, values, Representation.REDUCED_B, window=C.window)


# ---------------------------------------------------------------------------
# batched helpers


def advance_b_batch(B: np.ndarray, s_next: np.ndarray, M: int, d_b_next: int):
    """Row-wise transition B_n -> (first component of A_{n+1}, B_{n+1}).

    ``B`` has shape ``(..., d_b)`` and ``s_next`` broadcasts against
    ``B[..., 0]``. Returns ``(a_first, B_next)`` with ``B_next`` of shape
    ``(..., d_b_next)``.
    """
    s_next = np.asarray(s_next, dtype=float)
    a_first = ((M - 1) * B[..., 0] + s_next) / M
    shape = np.broadcast_shapes(B.shape[:-1], s_next.shape) + (d_b_next,)
    B_next = np.empty(shape)
    for j in range(1, d_b_next):
        B_next[..., j - 1] = ((M - j - 1) * B[..., j] + s_next) / (M - j)
    B_next[..., -1] = s_next
    return a_first, B_next


def full_a_from_spots(spots: np.ndarray, n: int, M: int, N: int) -> np.ndarray:
    """A_n for every path in ``spots`` (shape ``(P, n_cols)``, column k = t_k)."""
    sizes = window_sizes(n, M, N)
    csum = np.cumsum(spots[:, : n + 1], axis=1)
    out = np.empty((spots.shape[0], len(sizes)))
    for i, w in enumerate(sizes):
        lo = n - w
        tot = csum[:, n] - (csum[:, lo] if lo >= 0 else 0.0)
        out[:, i] = tot / w
    out[:, -1] = spots[:, n]
    return out


def reduced_b_from_spots(spots: np.ndarray, n: int, M: int, N: int) -> np.ndarray:
    return full_a_from_spots(spots, n, M, N)[:, 1:]


def payoff_batch(A: np.ndarray) -> np.ndarray:
    return np.maximum(A[..., -1] - A[..., 0], 0.0)


def to_similarity_batch(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    spot = B[..., -1]
    return B[..., :-1] / spot[..., None], spot
