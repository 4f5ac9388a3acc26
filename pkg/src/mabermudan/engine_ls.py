"""Longstaff-Schwartz regression baseline."""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DomainError
from .models import ModelParams, RoughBergomiParams
from .paths import PathBlock, normals_per_step, simulate
from .results import PriceResult, chunked, pair_means, summarise
from .sequences import NormalStream, normal_matrix
from .state import OptionSpec, dims, full_a_from_spots, payoff_batch

RIDGE = 1e-10
SIM_CHUNK = 1 << 16


@dataclass(frozen=True)
class LsConfig:
    n_paths: int = 100_000
    degree: int = 2
    rb_memory: int = 3
    seed: int = 0
    antithetic: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.degree < 1:
            raise DomainError("degree must be at least 1")
        if self.n_paths < 2 or (self.antithetic and self.n_paths % 2):
            raise DomainError("n_paths must be positive (and even with antithetic pairs)")


def n_basis(dim: int, degree: int) -> int:
    return math.comb(dim + degree, degree)


def monomials(Z: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= ``degree`` in the columns of ``Z``, constant first."""
    cols = [np.ones(Z.shape[0])]
    for k in range(1, degree + 1):
        for idx in combinations_with_replacement(range(Z.shape[1]), k):
            cols.append(np.prod(Z[:, idx], axis=1))
    return np.column_stack(cols)


def least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normal-equation solve with a ridge fallback for singular designs."""
    G = X.T @ X
    rhs = X.T @ y
    try:
        c = cho_factor(G, lower=True, check_finite=False)
        beta = cho_solve(c, rhs, check_finite=False)
        if np.all(np.isfinite(beta)) and np.linalg.cond(G) < 1e14:
            return beta
    except LinAlgError:
        pass
    warnings.warn("singular regression design, using ridge fallback", RuntimeWarning)
    lam = RIDGE * np.trace(G)
    return np.linalg.solve(G + lam * np.eye(G.shape[0]), rhs)


@dataclass
class _LsStep:
    center: np.ndarray
    scale: np.ndarray
    beta: np.ndarray


@dataclass
class LsSurrogate:
    """Fitted continuation regressions, usable by the forward benchmark."""

    option: OptionSpec
    degree: int
    rb_memory: int | None
    steps: dict[int, _LsStep] = field(default_factory=dict)

    @property
    def needs_features(self) -> bool:
        return self.rb_memory is not None

    def predictors(self, B, features=None) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if self.needs_features:
            return np.hstack([features, B])
        return B

    def __call__(self, n: int, B, features=None) -> np.ndarray:
        B = np.asarray(B, dtype=float)
        if n == self.option.n_dates:
            return np.zeros(B.shape[0])
        s = self.steps[n]
        Z = (self.predictors(B, features) - s.center) / s.scale
        return monomials(Z, self.degree) @ s.beta


def simulate_paths(option: OptionSpec, model: ModelParams, n_paths: int, seed: int,
                   antithetic: bool = True, n_steps: int | None = None,
                   threads: int = 1) -> PathBlock:
    """Pseudo-random paths in fixed blocks, concatenated in order."""
    k = normals_per_step(model)
    steps = option.n_dates if n_steps is None else n_steps
    stream = NormalStream.pseudo(k * steps, seed, antithetic=antithetic)
    is_rb = isinstance(model, RoughBergomiParams)

    def block(lo, hi):
        z = normal_matrix(stream, hi - lo, k * steps, start=lo)
        p = simulate(model, option, z)
        return np.hstack([p.spots, z]) if is_rb else p.spots

    out = chunked(block, n_paths, SIM_CHUNK, threads)
    if is_rb:
        from .paths import rb_covariance
        return PathBlock(out[:, : steps + 1], out[:, steps + 1 :], rb_covariance(option, model))
    return PathBlock(out)


def price_ls(option: OptionSpec, model: ModelParams, cfg: LsConfig = LsConfig()) -> PriceResult:
    """Backward cashflow regression over all paths.

    Exercise happens where the payoff is positive and at least the fitted
    continuation; exercising a zero payoff would only discard the realised
    future cashflow.
    """
    t0 = time.perf_counter()
    M, N = option.window, option.n_dates
    is_rb = isinstance(model, RoughBergomiParams)
    J = cfg.rb_memory if is_rb else None
    d = dims(M, M, N, J)
    if cfg.n_paths < 10 * n_basis(d.d_b + (d.d_e or 0), cfg.degree):
        raise DomainError("need at least 10 paths per basis function")
    paths = simulate_paths(option, model, cfg.n_paths, cfg.seed, cfg.antithetic, threads=cfg.threads)
    disc = math.exp(-model.rate * option.dt)
    sur = LsSurrogate(option, cfg.degree, J)

    value = payoff_batch(full_a_from_spots(paths.spots, N, M, N))
    for n in range(N - 1, M - 1, -1):
        value *= disc
        A = full_a_from_spots(paths.spots, n, M, N)
        X = sur.predictors(A[:, 1:], paths.features(n, J) if is_rb else None)
        center = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        basis = monomials((X - center) / scale, cfg.degree)
        beta = least_squares(basis, value)
        sur.steps[n] = _LsStep(center, scale, beta)
        psi = payoff_batch(A)
        ex = (psi > 0) & (psi >= basis @ beta)
        value[ex] = psi[ex]

    samples = pair_means(value) if cfg.antithetic else value
    mean, radius, std = summarise(samples, math.exp(-model.rate * option.time(M)))
    return PriceResult(
        price=mean, ci_radius=radius, n_paths=cfg.n_paths, runtime_s=time.perf_counter() - t0,
        engine="ls", config=asdict(cfg), sample_std=std, surrogate=sur,
    )
