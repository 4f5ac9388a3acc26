"""Brute-force nested quadrature for the two-period problem (N = M + 1).

Only used as a test oracle. Every level integrates over one standard normal
increment with Gauss-Legendre on a truncated line; kinks are located first
so that each piece is smooth.
"""
import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from mabermudan.models import BlackScholesParams, spot_step

Z_MAX = 10.0


def _gl(a, b, order):
    """Nodes and weights for int_a^b f(z) phi(z) dz; a, b broadcast."""
    x, w = leggauss(order)
    a, b = np.asarray(a, float)[..., None], np.asarray(b, float)[..., None]
    z = 0.5 * (b - a) * x + 0.5 * (b + a)
    wt = 0.5 * (b - a) * w * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return z, wt


def _continuation(model, window, t_from, t_to, M, order):
    """exp(-r dt) E[(S' - mean(window[1:], S'))^+] for the last M prices ``window``."""
    s = window[..., -1]
    tail = np.sum(window[..., 1:], axis=-1)
    strike = tail / (M - 1)
    # log S' is affine in the normal, so the kink S' = strike is explicit
    l0 = np.log(spot_step(model, s, 0.0, t_from, t_to))
    sd = np.log(spot_step(model, s, 1.0, t_from, t_to)) - l0
    z_star = np.clip((np.log(strike) - l0) / sd, -Z_MAX, Z_MAX)
    z, w = _gl(z_star, Z_MAX, order)
    s_next = spot_step(model, s[..., None], z, t_from, t_to)
    pay = s_next - (tail[..., None] + s_next) / M
    return math.exp(-model.rate * (t_to - t_from)) * np.sum(w * np.maximum(pay, 0.0), axis=-1)


def _last_level(model, prev, t_from, t_to, M, order):
    """E over the final exercise-date increment of max(payoff_M, C_M), prev = (..., M-1) prices."""
    s_prev = prev[..., -1]
    dt = t_to - t_from

    def gap(z):
        s = spot_step(model, s_prev, z, t_from, t_to)
        window = np.concatenate([prev, s[..., None]], axis=-1)
        pay = s - window.mean(axis=-1)
        return pay - _continuation(model, window, t_to, t_to + dt, M, order)

    lo, hi = np.full(s_prev.shape, -Z_MAX), np.full(s_prev.shape, Z_MAX)
    grid = np.linspace(-Z_MAX, Z_MAX, 81)
    signs = np.stack([gap(np.full(s_prev.shape, g)) > 0 for g in grid], axis=-1)
    changes = np.sum(signs[..., 1:] != signs[..., :-1], axis=-1)
    assert np.all(changes <= 1), "expected a single exercise boundary"
    has = changes == 1
    idx = np.argmax(signs, axis=-1)
    lo = np.where(has, grid[np.maximum(idx - 1, 0)], Z_MAX)
    hi = np.where(has, grid[idx], Z_MAX)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = gap(mid) > 0
        hi = np.where(pos & has, mid, hi)
        lo = np.where(~pos & has, mid, lo)
    cross = np.where(has, 0.5 * (lo + hi), Z_MAX)

    total = np.zeros(s_prev.shape)
    for a, b in ((np.full(s_prev.shape, -Z_MAX), cross), (cross, np.full(s_prev.shape, Z_MAX))):
        z, w = _gl(a, b, order)
        s = spot_step(model, s_prev[..., None], z, t_from, t_to)
        window = np.concatenate([np.broadcast_to(prev[..., None, :], z.shape + prev.shape[-1:]),
                                 s[..., None]], axis=-1)
        pay = np.maximum(s - window.mean(axis=-1), 0.0)
        cont = _continuation(model, window, t_to, t_to + dt, M, order)
        total += np.sum(w * np.maximum(pay, cont), axis=-1)
    return total


def two_period_price(model, T, M, inner_order=48, outer_order=120):
    """Price of the Bermudan with exercise dates t_M and t_{M+1} = T."""
    N = M + 1
    dt = T / N
    disc = math.exp(-model.rate * M * dt)
    if isinstance(model, BlackScholesParams):
        # homogeneity: value = E[S_1] * value of the path rescaled to S_1 = 1
        scale = model.spot0 * math.exp(model.rate * dt)
        first = np.ones((1, 1))
        levels, start = M - 2, 1
    else:
        scale = 1.0
        first = np.full((1, 1), model.spot0)
        levels, start = M - 1, 0
    # outer levels: integrate prices S_{start+1} .. S_{M-1}
    x, w = _gl(-Z_MAX, Z_MAX, outer_order)
    prev, weight = first, np.ones(1)
    for k in range(levels):
        n = start + k
        s = spot_step(model, prev[:, -1:], x[None, :], n * dt, (n + 1) * dt)
        prev = np.concatenate([np.repeat(prev, outer_order, axis=0), s.reshape(-1, 1)], axis=1)
        weight = np.outer(weight, w).ravel()
    if start == 0:
        prev = prev[:, 1:] if prev.shape[1] > M - 1 else prev
    n_last = M - 1
    val = 0.0
    for lo in range(0, prev.shape[0], 2000):
        val += float(weight[lo:lo + 2000] @ _last_level(model, prev[lo:lo + 2000],
                                                       n_last * dt, M * dt, M, inner_order))
    return disc * scale * val


@lru_cache(maxsize=None)
def two_period_comparison(model_name, M):
    """(engine result, quadrature value) for T = 0.2, shared across test modules."""
    from mabermudan.engine_gprghq import GprGhqConfig, price
    from mabermudan.models import ClewlowStricklandParams
    from mabermudan.state import OptionSpec

    model = BlackScholesParams() if model_name == "bs" else ClewlowStricklandParams.flat(100.0)
    res = price(OptionSpec(0.2, M + 1, M), model, GprGhqConfig(mc_final_paths=100_000_000))
    return res, two_period_price(model, 0.2, M)
