"""Price result record and Monte Carlo summary helpers."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

Z95 = 1.96


@dataclass
class PriceResult:
    """Price with its 95% confidence radius.

    For antithetic Monte Carlo the iid samples are the pair means, so
    ``ci_radius = 1.96 * sample_std / sqrt(n_paths / 2)`` with
    ``sample_std`` the standard deviation of the discounted pair means.
    Deterministic engines report ``ci_radius = 0``.
    """

    price: float
    ci_radius: float
    n_paths: int
    runtime_s: float
    engine: str
    config: dict[str, Any] = field(default_factory=dict)
    sample_std: float = 0.0
    surrogate: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.ci_radius < 0:
            raise ValueError("negative confidence radius")

    @property
    def n_samples(self) -> int:
        return self.n_paths // 2 if self.config.get("antithetic", True) else self.n_paths


def summarise(samples: np.ndarray, discount: float = 1.0) -> tuple[float, float, float]:
    """Mean, 95% radius and standard deviation of iid discounted samples."""
    samples = discount * np.asarray(samples, dtype=float)
    n = samples.size
    mean = float(np.mean(samples))
    std = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    return mean, Z95 * std / math.sqrt(n), std


def pair_means(values: np.ndarray) -> np.ndarray:
    """Average consecutive antithetic rows ``(z, -z)``."""
    return 0.5 * (values[0::2] + values[1::2])


def chunked(fn: Callable[[int, int], np.ndarray], total: int, chunk: int,
            threads: int = 1) -> np.ndarray:
    """Evaluate ``fn(lo, hi)`` over fixed row blocks and concatenate in order.

    Block boundaries depend only on ``chunk``, so results do not depend on
    ``threads``.
    """
    bounds: Sequence[tuple[int, int]] = [
        (lo, min(total, lo + chunk)) for lo in range(0, total, chunk)
    ]
    if threads <= 1 or len(bounds) <= 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
