"""Similarity-reduced binomial chain for the moving-average Bermudan call.

On a CRR tree the last ``M`` prices relative to the current spot are fixed
by the ``M - 1`` most recent up/down moves, so the continuation value at
unit spot is a function of an ``(M-1)``-bit mask. Bit 0 holds the most
recent move (1 = up). Backward induction needs two arrays of length
``2**(M-1)``.
"""
from __future__ import annotations

import math
import time

import numpy as np

from .errors import DomainError, ResourceGuardError
from .models import BlackScholesParams
from .results import PriceResult
from .state import OptionSpec

MAX_WINDOW = 30
# bytes per mask held at once (masks, successors, payoffs, values, scratch)
BYTES_PER_STATE = 96
MEMORY_BUDGET = 2 << 30


def crr_factors(model: BlackScholesParams, dt: float) -> tuple[float, float, float]:
    """Up factor, down factor and risk-neutral up probability."""
    u = math.exp(model.vol * math.sqrt(dt))
    d = 1.0 / u
    growth = math.exp(model.rate * dt)
    if not d < growth < u:
        raise DomainError("CRR probabilities outside (0, 1); refine the time grid")
    return u, d, (growth - d) / (u - d)


def bc_payoff(mask, M: int, vol: float, dt: float):
    """Payoff at unit spot for the price history encoded by ``mask``.

    The price ``j`` steps back is ``exp(-vol sqrt(dt) sum_{i<j} (2 s_i - 1))``.
    Accepts a scalar or an integer array of masks.
    """
    mask = np.asarray(mask, dtype=np.int64)
    step = vol * math.sqrt(dt)
    log_price = np.zeros(mask.shape)
    total = np.ones(mask.shape)
    for j in range(1, M):
        bit = (mask >> (j - 1)) & 1
        log_price -= step * (2.0 * bit - 1.0)
        total += np.exp(log_price)
    out = np.maximum(1.0 - total / M, 0.0)
    return float(out) if out.ndim == 0 else out


def _check_window(M: int, budget: int = MEMORY_BUDGET):
    if M > MAX_WINDOW:
        raise ResourceGuardError(f"binomial chain needs 2^{M - 1} states; window limited to {MAX_WINDOW}")
    need = BYTES_PER_STATE << (M - 1)
    if need > budget:
        raise ResourceGuardError(
            f"binomial chain with M={M} needs about {need / 2**30:.1f} GiB; budget is {budget / 2**30:.1f} GiB"
        )


def price_bc(option: OptionSpec, model: BlackScholesParams,
             memory_budget: int = MEMORY_BUDGET) -> PriceResult:
    """Exact CRR price of the moving-average Bermudan call.

    Raises :class:`ResourceGuardError` if ``M > 30`` or the state arrays
    would exceed ``memory_budget`` bytes.
    """
    if not isinstance(model, BlackScholesParams):
        raise DomainError("the binomial chain supports Black-Scholes only")
    M, N = option.window, option.n_dates
    _check_window(M, memory_budget)
    t0 = time.perf_counter()
    dt = option.dt
    u, d, p_up = crr_factors(model, dt)
    p_dw = 1.0 - p_up
    disc = math.exp(-model.rate * dt)

    full = (1 << (M - 1)) - 1
    masks = np.arange(full + 1, dtype=np.int64)
    up = ((masks << 1) | 1) & full
    dw = (masks << 1) & full
    psi = bc_payoff(masks, M, model.vol, dt)
    psi_up, psi_dw = psi[up], psi[dw]

    cont = np.zeros(full + 1)
    for _ in range(N - 1, M - 1, -1):
        cont = disc * (p_up * u * np.maximum(psi_up, cont[up])
                       + p_dw * d * np.maximum(psi_dw, cont[dw]))

    n_up = np.zeros(full + 1)
    for i in range(M - 1):
        n_up += (masks >> i) & 1
    prob = p_up**n_up * p_dw ** (M - 1 - n_up)
    spot_ratio = u ** (2 * n_up - (M - 1))
    value = (model.spot0 * math.exp(-model.rate * dt * M) * (u * p_up + d * p_dw)
             * float(np.sum(prob * spot_ratio * np.maximum(psi, cont))))
    return PriceResult(
        price=value, ci_radius=0.0, n_paths=0, runtime_s=time.perf_counter() - t0,
        engine="bc", config={"states": full + 1, "antithetic": False},
    )
