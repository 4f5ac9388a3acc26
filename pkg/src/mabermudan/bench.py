"""Forward Monte Carlo evaluation of an exercise policy."""
from __future__ import annotations

import math
import time

import numpy as np

from .errors import DomainError
from .models import ModelParams
from .paths import normals_per_step, simulate
from .results import PriceResult, chunked, pair_means, summarise
from .sequences import NormalStream, normal_matrix
from .state import OptionSpec, full_a_from_spots, payoff_batch

__all__ = ["PriceResult", "evaluate_policy", "paths_for_ci"]

CHUNK = 1 << 14
MIN_PILOT = 10_000


def evaluate_policy(surrogate, option: OptionSpec, model: ModelParams, n_paths: int,
                    seed: int, threads: int = 1) -> PriceResult:
    """Exercise at the first date ``n >= M`` with a positive payoff >= surrogate continuation.

    Exercising a zero payoff would only forfeit the rest of the path.

    ``surrogate(n, B, features)`` must cover ``n = M..N``. Paths are
    pseudo-random antithetic pairs; the CI is built from pair means.
    """
    if n_paths < 2 or n_paths % 2:
        raise DomainError("n_paths must be a positive even number")
    t0 = time.perf_counter()
    M, N = option.window, option.n_dates
    k = normals_per_step(model)
    stream = NormalStream.pseudo(k * N, seed, antithetic=True)
    J = getattr(surrogate, "rb_memory", None)
    needs_features = getattr(surrogate, "needs_features", False)

    def block(lo, hi):
        z = normal_matrix(stream, hi - lo, k * N, start=lo)
        paths = simulate(model, option, z)
        value = np.zeros(hi - lo)
        alive = np.ones(hi - lo, dtype=bool)
        for n in range(M, N + 1):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            A = full_a_from_spots(paths.spots[idx], n, M, N)
            feats = None
            if needs_features:
                feats = paths.features(n, J)[idx]
            psi = payoff_batch(A)
            ex = (psi > 0) & (psi >= surrogate(n, A[:, 1:], feats))
            value[idx[ex]] = math.exp(-model.rate * option.time(n)) * psi[ex]
            alive[idx[ex]] = False
        return pair_means(value)

    samples = chunked(block, n_paths, CHUNK, threads)
    mean, radius, std = summarise(samples)
    return PriceResult(
        price=mean, ci_radius=radius, n_paths=n_paths, runtime_s=time.perf_counter() - t0,
        engine="forward", config={"seed": seed, "antithetic": True}, sample_std=std,
    )


def paths_for_ci(target_radius: float, pilot: PriceResult) -> int:
    """Antithetic path count whose 95% radius should match ``target_radius``."""
    if target_radius <= 0:
        raise DomainError("target radius must be positive")
    if pilot.n_paths < MIN_PILOT:
        raise DomainError(f"pilot needs at least {MIN_PILOT} paths")
    if pilot.sample_std == 0:
        return pilot.n_paths
    pairs = math.ceil((1.96 * pilot.sample_std / target_radius) ** 2)
    return 2 * pairs
