"""Model parameter records, one-step transition laws and European calls."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import ndtr

from .errors import DomainError


def norm_cdf(x):
    return ndtr(x)


@dataclass(frozen=True)
class BlackScholesParams:
    spot0: float = 100.0
    rate: float = 0.05
    vol: float = 0.3

    def __post_init__(self):
        if not self.spot0 > 0:
            raise DomainError("spot0 must be positive")
        if not self.vol > 0:
            raise DomainError("vol must be positive")

    name = "bs"


class FlatCurve:
    """Constant forward curve ``F(0, t) = level``."""

    def __init__(self, level: float):
        if not level > 0:
            raise DomainError("forward level must be positive")
        self.level = float(level)

    def __call__(self, t):
        return np.full(np.shape(t), self.level) if np.ndim(t) else self.level

    def __repr__(self):
        return f"FlatCurve({self.level})"

    def __eq__(self, other):
        return isinstance(other, FlatCurve) and other.level == self.level

    def __hash__(self):
        return hash(("flat", self.level))


@dataclass(frozen=True)
class ClewlowStricklandParams:
    forward_curve: Callable[[float], float]
    rate: float = 0.05
    mean_rev: float = 5.0
    vol: float = 0.5

    def __post_init__(self):
        if not self.mean_rev > 0:
            raise DomainError("mean reversion speed must be positive")
        if not self.vol > 0:
            raise DomainError("vol must be positive")

    name = "cs"

    @classmethod
    def flat(cls, level: float = 100.0, **kw) -> "ClewlowStricklandParams":
        return cls(forward_curve=FlatCurve(level), **kw)

    @property
    def spot0(self) -> float:
        return float(self.forward_curve(0.0))


@dataclass(frozen=True)
class RoughBergomiParams:
    """Rough-Bergomi parameters. ``xi0`` is a level or a callable curve."""

    spot0: float = 100.0
    rate: float = 0.05
    hurst: float = 0.07
    eta: float = 1.9
    rho: float = -0.9
    xi0: Union[float, Callable[[float], float]] = 0.09

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise DomainError("Hurst parameter must lie in (0, 1)")
        if not self.eta >= 0:
            raise DomainError("eta must be nonnegative")
        if not -1 <= self.rho <= 1:
            raise DomainError("rho must lie in [-1, 1]")
        if not self.spot0 > 0:
            raise DomainError("spot0 must be positive")

    name = "rbergomi"

    def xi(self, t):
        if callable(self.xi0):
            return self.xi0(t)
        return self.xi0


ModelParams = Union[BlackScholesParams, ClewlowStricklandParams, RoughBergomiParams]


# ---------------------------------------------------------------------------
# Black-Scholes


def bs_step(s, z, dt: float, p: BlackScholesParams):
    """Exact lognormal step ``s * exp((r - vol^2/2) dt + vol sqrt(dt) z)``."""
    return s * np.exp((p.rate - 0.5 * p.vol**2) * dt + p.vol * math.sqrt(dt) * z)


def bs_call(s, k, tau: float, p: BlackScholesParams):
    """Black-Scholes call on spot ``s`` with strike ``k`` and time to expiry ``tau``.

    Vectorised over ``s`` and ``k``. Nonpositive strikes give the forward
    contract value ``s - k exp(-r tau)``.
    """
    if tau < 0:
        raise DomainError(f"negative time to expiry {tau}")
    s, k = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(k, dtype=float))
    disc = math.exp(-p.rate * tau)
    out = np.empty(s.shape)
    pos = k > 0
    out[~pos] = s[~pos] - k[~pos] * disc
    if tau == 0:
        out[pos] = np.maximum(s[pos] - k[pos], 0.0)
    else:
        sk, kk = s[pos], k[pos]
        vs = p.vol * math.sqrt(tau)
        d1 = (np.log(sk / kk) + (p.rate + 0.5 * p.vol**2) * tau) / vs
        d2 = d1 - vs
        out[pos] = sk * ndtr(d1) - kk * disc * ndtr(d2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Clewlow-Strickland


def cs_beta(t, p: ClewlowStricklandParams):
    return np.log(p.forward_curve(t)) + p.vol**2 / (4 * p.mean_rev) * (
        np.exp(-2 * p.mean_rev * np.asarray(t, dtype=float)) - 1
    )


def cs_moments(s, t_from: float, t_to: float, p: ClewlowStricklandParams):
    """Conditional mean and variance of ``ln S_{t_to}`` given ``S_{t_from} = s``."""
    delta = t_to - t_from
    decay = math.exp(-p.mean_rev * delta)
    m = decay * (np.log(s) - cs_beta(t_from, p)) + cs_beta(t_to, p)
    v = p.vol**2 * (1 - math.exp(-2 * p.mean_rev * delta)) / (2 * p.mean_rev)
    return m, v


def cs_step(s, z, t_from: float, t_to: float, p: ClewlowStricklandParams):
    if not t_from < t_to:
        raise DomainError("need t_from < t_to")
    m, v = cs_moments(s, t_from, t_to, p)
    return np.exp(m + math.sqrt(v) * z)


def cs_call(s, k, t_from: float, t_to: float, p: ClewlowStricklandParams):
    """Call on ``S_{t_to}`` struck at ``k`` seen from ``S_{t_from} = s``."""
    m, v = cs_moments(np.asarray(s, dtype=float), t_from, t_to, p)
    k = np.asarray(k, dtype=float)
    m, k = np.broadcast_arrays(m, k)
    disc = math.exp(-p.rate * (t_to - t_from))
    fwd = np.exp(m + 0.5 * v)
    if v == 0:
        out = disc * np.maximum(np.exp(m) - k, 0.0)
    else:
        out = np.empty(m.shape)
        pos = k > 0
        out[~pos] = disc * (fwd[~pos] - k[~pos])
        sv = math.sqrt(v)
        d1 = (m[pos] - np.log(k[pos]) + v) / sv
        out[pos] = disc * (fwd[pos] * ndtr(d1) - k[pos] * ndtr(d1 - sv))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# generic helpers used by the engines


def one_step_call(model: ModelParams, s, k, t_from: float, t_to: float):
    """European call over one monitoring interval, for models with a closed form."""
    if isinstance(model, BlackScholesParams):
        return bs_call(s, k, t_to - t_from, model)
    if isinstance(model, ClewlowStricklandParams):
        return cs_call(s, k, t_from, t_to, model)
    raise DomainError(f"no closed-form one-step call for {type(model).__name__}")


def spot_step(model: ModelParams, s, z, t_from: float, t_to: float):
    """One-step spot transition for the Markov (single-factor) models."""
    if isinstance(model, BlackScholesParams):
        return bs_step(s, z, t_to - t_from, model)
    if isinstance(model, ClewlowStricklandParams):
        return cs_step(s, z, t_from, t_to, model)
    raise DomainError(f"{type(model).__name__} is not a single-factor model")


def spot0(model: ModelParams) -> float:
    return float(model.spot0)
