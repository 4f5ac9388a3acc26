"""GPR-GHQ backward induction.

At each exercise date ``n = N-2, ..., M`` (``N-1, ..., M`` for rough
Bergomi) the continuation value is computed exactly by Gauss-Hermite
quadrature at ``P`` quasi-random training states, using the surrogate
learned at ``n + 1``, and a Gaussian process is fitted to those values. The
price is a Monte Carlo average of ``max(payoff, continuation)`` at ``t_M``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import gpr
from .errors import DomainError, EngineError, NumericalError
from .models import (BlackScholesParams, ModelParams, RoughBergomiParams,
                     one_step_call, spot_step)
from .paths import normals_per_step, rb_covariance, simulate
from .quadrature import GhRule, gh_rule
from .rbergomi import feature_horizon, spot_from_variance, variance_from_fbm
from .results import PriceResult, chunked, pair_means, summarise
from .sequences import NormalStream, normal_matrix
from .state import (OptionSpec, advance_b_batch, dims, full_a_from_spots, payoff_batch,
                    reduced_b_from_spots, to_similarity_batch)

log = logging.getLogger(__name__)

FINAL_SEED_SALT = 0x5EED_F1A1
CHUNK = 1 << 15


@dataclass(frozen=True)
class GprGhqConfig:
    n_train: int = 1000
    quad_order: int = 16
    rb_memory: int = 3
    mc_final_paths: int = 2_000_000
    seed: int = 0
    use_similarity: bool = True
    # likelihood search on the first rows only; None uses all of them
    hyper_subset: int | None = 500
    # start each likelihood search from the previous step's optimum
    warm_start: bool = True
    # lower bound on the standardised GPR noise; absorbs quadrature error
    noise_floor: float | None = 1e-4
    threads: int = 1

    def __post_init__(self):
        if not 1 <= self.n_train <= gpr.MAX_TRAIN:
            raise DomainError(f"n_train must be in [1, {gpr.MAX_TRAIN}]")
        if not 1 <= self.quad_order <= 128:
            raise DomainError("quad_order must be in [1, 128]")
        if self.rb_memory < 0:
            raise DomainError("rb_memory must be nonnegative")
        if self.mc_final_paths < 2 or self.mc_final_paths % 2:
            raise DomainError("mc_final_paths must be a positive even number")


@dataclass
class StepSurrogate:
    kind: str  # "zero", "shortcut", "scalar" or "gpr"
    gp: gpr.GprModel | None = None
    scalar: float = 0.0


class ContinuationSurrogate:
    """Continuation values ``C_n`` for ``n = M..N`` as callables of the state.

    ``representation`` is ``"B"`` (fit on ``B_n``), ``"C"`` (similarity
    reduced: fit on ``C_n``, rescaled by the spot) or ``"EB"`` (rough
    Bergomi: conditioning features followed by ``B_n``).
    """

    def __init__(self, option: OptionSpec, model: ModelParams, representation: str,
                 rb_memory: int | None = None):
        self.option = option
        self.model = model
        self.representation = representation
        self.rb_memory = rb_memory
        self.steps: dict[int, StepSurrogate] = {option.n_dates: StepSurrogate("zero")}

    @property
    def needs_features(self) -> bool:
        return self.representation == "EB"

    def __call__(self, n: int, B: np.ndarray, features: np.ndarray | None = None) -> np.ndarray:
        o = self.option
        d = dims(n, o.window, o.n_dates, self.rb_memory if self.needs_features else None)
        B = np.asarray(B, dtype=float)
        if B.ndim != 2 or B.shape[1] != d.d_b:
            raise EngineError(f"step {n}: expected B of width {d.d_b}, got shape {B.shape}")
        step = self.steps[n]
        if step.kind == "zero":
            return np.zeros(B.shape[0])
        if step.kind == "shortcut":
            return terminal_shortcut(B, self.model, o)
        if step.kind == "scalar":
            return B[:, -1] * step.scalar
        if self.representation == "C":
            C, spot = to_similarity_batch(B)
            return spot * step.gp(C)
        if self.representation == "EB":
            if features is None or features.shape != (B.shape[0], d.d_e):
                raise EngineError(f"step {n}: expected {d.d_e} conditioning features")
            return step.gp(np.hstack([features, B]))
        return step.gp(B)


def terminal_shortcut(B: np.ndarray, model: ModelParams, option: OptionSpec) -> np.ndarray:
    """Closed-form ``C_{N-1}``: ``(M-1)/M`` calls struck at the mean of the last ``M-1`` prices."""
    M, N = option.window, option.n_dates
    B = np.atleast_2d(B)
    return (M - 1) / M * one_step_call(model, B[:, -1], B[:, 0], option.time(N - 1), option.time(N))


def _bellman(payoff, cont, probs, discount):
    return discount * (np.maximum(payoff, cont) @ probs)


def ghq_step(X: np.ndarray, n: int, next_surrogate: ContinuationSurrogate,
             model: ModelParams, option: OptionSpec, rule: GhRule,
             gaussians: np.ndarray | None = None) -> np.ndarray:
    """Quadrature continuation values at the training states ``X`` of step ``n``.

    For single-factor models ``X`` holds ``B_n`` rows. For rough Bergomi
    ``X`` holds ``(E features, B_n)`` rows and ``gaussians`` the ``2n``
    normals that generated each row.
    """
    M, N = option.window, option.n_dates
    disc = math.exp(-model.rate * option.dt)
    z, w = rule.normal_nodes, rule.probabilities
    d_next = dims(n + 1, M, N).d_b
    if isinstance(model, RoughBergomiParams):
        return _ghq_step_rb(X, n, next_surrogate, model, option, z, w, gaussians, disc)
    B = X
    if B.shape[1] != dims(n, M, N).d_b:
        raise EngineError(f"step {n}: training states have width {B.shape[1]}")
    s_next = spot_step(model, B[:, -1:], z[None, :], option.time(n), option.time(n + 1))
    a_first, B_next = advance_b_batch(B[:, None, :], s_next, M, d_next)
    pay = payoff_batch(np.stack([a_first, s_next], axis=-1))
    P, Q = s_next.shape
    cont = next_surrogate(n + 1, B_next.reshape(P * Q, d_next)).reshape(P, Q)
    return _bellman(pay, cont, w, disc)


def _ghq_step_rb(X, n, next_surrogate, p: RoughBergomiParams, option, z, w, G, disc):
    M, N = option.window, option.n_dates
    J = next_surrogate.rb_memory
    d = dims(n, M, N, J)
    if X.shape[1] != d.d_e + d.d_b:
        raise EngineError(f"step {n}: expected {d.d_e}+{d.d_b} predictors, got {X.shape[1]}")
    cov = rb_covariance(option, p)
    L = cov.chol
    dt = option.dt
    B = X[:, d.d_e:]
    g = G[:, : 2 * n]
    # current variance from the realised fBm value E_{n,n}
    v_now = variance_from_fbm(X[:, 0], option.time(n), p) if n > 0 else np.full(X.shape[0], p.xi(0.0))
    Q = z.size
    z1 = np.repeat(z, Q)
    z2 = np.tile(z, Q)
    probs = np.repeat(w, Q) * np.tile(w, Q)
    dw = (g @ L[2 * n, : 2 * n])[:, None] + L[2 * n, 2 * n] * z1[None, :]
    s_next = spot_from_variance(B[:, -1:], v_now[:, None], dw, dt, p.rate)
    d_next = dims(n + 1, M, N, J)
    a_first, B_next = advance_b_batch(B[:, None, :], s_next, M, d_next.d_b)
    pay = payoff_batch(np.stack([a_first, s_next], axis=-1))
    P, QQ = s_next.shape
    feats = np.empty((P, QQ, d_next.d_e))
    for k, h in enumerate(feature_horizon(n + 1, N, J)):
        row = L[2 * h - 1]
        feats[:, :, k] = (g @ row[: 2 * n])[:, None] + row[2 * n] * z1 + row[2 * n + 1] * z2
    cont = next_surrogate(
        n + 1, B_next.reshape(P * QQ, d_next.d_b), feats.reshape(P * QQ, d_next.d_e)
    ).reshape(P, QQ)
    return _bellman(pay, cont, probs, disc)


def _training_set(option: OptionSpec, model: ModelParams, cfg: GprGhqConfig, last: int):
    k = normals_per_step(model)
    z = normal_matrix(NormalStream.halton(k * last), cfg.n_train, k * last)
    return simulate(model, option, z)


def _final_seed(seed: int) -> int:
    return (seed ^ FINAL_SEED_SALT) & (2**63 - 1)


def _chunked_ghq(X, n, surrogate, model, option, rule, G, threads):
    def block(lo, hi):
        return ghq_step(X[lo:hi], n, surrogate, model, option, rule,
                        None if G is None else G[lo:hi])
    return chunked(block, X.shape[0], max(1, CHUNK // (rule.order ** normals_per_step(model))), threads)


def backward_induction(option: OptionSpec, model: ModelParams, cfg: GprGhqConfig) -> ContinuationSurrogate:
    M, N = option.window, option.n_dates
    is_rb = isinstance(model, RoughBergomiParams)
    similarity = cfg.use_similarity and isinstance(model, BlackScholesParams)
    rep = "EB" if is_rb else ("C" if similarity else "B")
    J = cfg.rb_memory if is_rb else None
    sur = ContinuationSurrogate(option, model, rep, J)
    rule = gh_rule(cfg.quad_order)
    if is_rb:
        start = N - 1
    else:
        if N - 1 >= M:
            sur.steps[N - 1] = StepSurrogate("shortcut")
        start = N - 2
    if start < M:
        return sur

    if similarity and M == 2:
        # B_n = (S_n): one unit-spot state determines the continuation value
        unit = np.ones((1, 1))
        for n in range(start, M - 1, -1):
            c = float(ghq_step(unit, n, sur, model, option, rule)[0])
            sur.steps[n] = StepSurrogate("scalar", scalar=c)
        return sur

    paths = _training_set(option, model, cfg, start)
    scale = float(model.spot0)
    warm = None
    for n in range(start, M - 1, -1):
        B = reduced_b_from_spots(paths.spots, n, M, N)
        if is_rb:
            X = np.hstack([paths.features(n, J), B])
            y = _chunked_ghq(X, n, sur, model, option, rule, paths.gaussians, cfg.threads)
        else:
            X = B
            y = _chunked_ghq(X, n, sur, model, option, rule, None, cfg.threads)
        if not np.all(np.isfinite(y)):
            raise EngineError(f"non-finite quadrature responses at step {n}")
        if np.max(np.abs(y)) < 1e-12 * scale:
            sur.steps[n] = StepSurrogate("zero")
            continue
        if similarity:
            X, spot = to_similarity_batch(B)
            y = y / spot
        try:
            gp = gpr.fit(X, y, hyper_subset=cfg.hyper_subset,
                         init=warm if cfg.warm_start else None,
                         noise_floor=cfg.noise_floor)
        except (NumericalError, DomainError, np.linalg.LinAlgError) as exc:
            raise EngineError(f"GPR fit failed at step {n}: {exc}") from exc
        log.debug("step %d: hyperparams %s", n, gp.hyperparams)
        sur.steps[n] = StepSurrogate("gpr", gp=gp)
        if gp.y_scale > 0:
            warm = gp.hyperparams
    return sur


def final_value(surrogate: ContinuationSurrogate, option: OptionSpec, model: ModelParams,
                n_paths: int, seed: int, threads: int = 1):
    """Antithetic Monte Carlo of ``exp(-r t_M) max(payoff_M, C_M(B_M))``."""
    M, N = option.window, option.n_dates
    k = normals_per_step(model)
    stream = NormalStream.pseudo(k * M, seed, antithetic=True)
    J = surrogate.rb_memory

    def block(lo, hi):
        z = normal_matrix(stream, hi - lo, k * M, start=lo)
        paths = simulate(model, option, z)
        A = full_a_from_spots(paths.spots, M, M, N)
        feats = paths.features(M, J) if surrogate.needs_features else None
        cont = surrogate(M, A[:, 1:], feats)
        return pair_means(np.maximum(payoff_batch(A), cont))

    samples = chunked(block, n_paths, CHUNK, threads)
    return summarise(samples, math.exp(-model.rate * option.time(M)))


def price(option: OptionSpec, model: ModelParams, cfg: GprGhqConfig = GprGhqConfig()) -> PriceResult:
    """Backward induction followed by the final Monte Carlo step."""
    t0 = time.perf_counter()
    sur = backward_induction(option, model, cfg)
    mean, radius, std = final_value(sur, option, model, cfg.mc_final_paths,
                                    _final_seed(cfg.seed), cfg.threads)
    if mean < 0:
        raise EngineError(f"negative price {mean}")
    return PriceResult(
        price=mean, ci_radius=radius, n_paths=cfg.mc_final_paths,
        runtime_s=time.perf_counter() - t0, engine="gprghq",
        config={**asdict(cfg), "antithetic": True}, sample_std=std, surrogate=sur,
    )


def export_surrogate(result: PriceResult) -> ContinuationSurrogate:
    if result.surrogate is None:
        raise EngineError("result carries no surrogate")
    return result.surrogate
