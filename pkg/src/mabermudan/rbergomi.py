"""Exact-covariance simulation of the rough-Bergomi model.

The Gaussian vector ``R = (dW1_1, Wt_1, dW1_2, Wt_2, ..., dW1_N, Wt_N)``
(Brownian increments of the spot driver interleaved with the
Riemann-Liouville fBm on the grid) is sampled as ``Lambda @ G`` with
``Lambda`` the Cholesky factor of its covariance. Zero-based, row ``2k``
of ``R`` is ``dW1_{k+1}`` and row ``2k + 1`` is ``Wt_{k+1}``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, NumericalError
from .models import RoughBergomiParams

log = logging.getLogger(__name__)

LEGENDRE_ORDER = 200
NUGGETS = (0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10)


def fbm_cross_integral(ratio, H: float, order: int = LEGENDRE_ORDER):
    """``int_0^1 (1-s)^(H-1/2) (ratio-s)^(H-1/2) ds`` for ``ratio > 1``.

    Substituting ``1 - s = y^a`` with ``a = 1/(H+1/2)`` removes the endpoint
    singularity and leaves ``a * int_0^1 (ratio - 1 + y^a)^(H-1/2) dy``.
    """
    ratio = np.asarray(ratio, dtype=float)
    x, w = leggauss(order)
    y = 0.5 * (x + 1.0)
    a = 1.0 / (H + 0.5)
    vals = (ratio[..., None] - 1.0 + y**a) ** (H - 0.5)
    return a * 0.5 * (vals @ w)


def _cov_w_fbm(t_n, t_m_prev, t_m, H, rho):
    c = 2 * rho * math.sqrt(2 * H) / (2 * H + 1)
    return c * ((t_n - t_m_prev) ** (H + 0.5) - (t_n - t_m) ** (H + 0.5))


def covariance_matrix(N: int, T: float, H: float, rho: float) -> np.ndarray:
    if not 0 < H < 1:
        raise DomainError("Hurst parameter must lie in (0, 1)")
    dt = T / N
    t = dt * np.arange(N + 1)
    S = np.zeros((2 * N, 2 * N))
    for n in range(1, N + 1):
        i_w, i_f = 2 * (n - 1), 2 * (n - 1) + 1
        S[i_w, i_w] = dt
        S[i_f, i_f] = t[n] ** (2 * H)
        # dW1_m against Wt_n for m <= n; zero for m > n
        for m in range(1, n + 1):
            S[2 * (m - 1), i_f] = S[i_f, 2 * (m - 1)] = _cov_w_fbm(t[n], t[m - 1], t[m], H, rho)
        if n > 1:
            m = np.arange(1, n)
            cross = 2 * H * t[m] ** (2 * H) * fbm_cross_integral(t[n] / t[m], H)
            S[i_f, 2 * (m - 1) + 1] = cross
            S[2 * (m - 1) + 1, i_f] = cross
    return S


@dataclass(frozen=True)
class RbCovariance:
    n_steps: int
    maturity: float
    hurst: float
    rho: float
    sigma_matrix: np.ndarray
    chol: np.ndarray
    nugget: float

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    def fbm_row(self, h: int) -> np.ndarray:
        """Row of ``Lambda`` generating ``Wt_{t_h}`` (``h >= 1``)."""
        return self.chol[2 * h - 1]


def _cholesky_with_nugget(S: np.ndarray):
    scale = np.trace(S) / S.shape[0]
    for eps in NUGGETS:
        try:
            L = np.linalg.cholesky(S + eps * scale * np.eye(S.shape[0]))
        except np.linalg.LinAlgError:
            continue
        if eps:
            log.warning("rough-Bergomi covariance needed nugget %.1e", eps)
        return L, eps
    w = np.linalg.eigvalsh(S)
    raise NumericalError(
        f"covariance not positive definite after nugget {NUGGETS[-1]:.0e}; "
        f"min eigenvalue {w[0]:.3e}, max {w[-1]:.3e}"
    )


@lru_cache(maxsize=16)
def build_covariance(N: int, T: float, H: float, rho: float) -> RbCovariance:
    S = covariance_matrix(N, T, H, rho)
    L, eps = _cholesky_with_nugget(S)
    S.setflags(write=False)
    L.setflags(write=False)
    return RbCovariance(N, T, H, rho, S, L, eps)


@dataclass
class RbPaths:
    """Simulated paths, stored row-per-path.

    ``spots`` and ``variances`` have shape ``(P, n_steps + 1)``;
    ``gaussians`` is the driving ``G`` (``(P, 2 * n_steps)``) and ``R`` the
    correlated vector ``Lambda @ G``.
    """

    spots: np.ndarray
    variances: np.ndarray
    gaussians: np.ndarray
    R: np.ndarray


def variance_from_fbm(fbm, t, p: RoughBergomiParams):
    return p.xi(t) * np.exp(p.eta * fbm - 0.5 * p.eta**2 * np.asarray(t) ** (2 * p.hurst))


def spot_from_variance(s, v, dw, dt: float, rate: float):
    return s * np.exp((rate - 0.5 * v) * dt + np.sqrt(v) * dw)


def simulate_paths(cov: RbCovariance, p: RoughBergomiParams, G: np.ndarray,
                   n_steps: int | None = None) -> RbPaths:
    """Euler-Maruyama paths from standard normals ``G`` (``P x 2k``, ``k <= N``)."""
    k = G.shape[1] // 2 if n_steps is None else n_steps
    if G.shape[1] < 2 * k:
        raise DomainError("need 2 normals per simulated step")
    G = G[:, : 2 * k]
    L = cov.chol[: 2 * k, : 2 * k]
    R = G @ L.T
    dt = cov.dt
    P = G.shape[0]
    spots = np.empty((P, k + 1))
    var = np.empty((P, k + 1))
    spots[:, 0] = p.spot0
    var[:, 0] = p.xi(0.0)
    for n in range(k):
        spots[:, n + 1] = spot_from_variance(spots[:, n], var[:, n], R[:, 2 * n], dt, p.rate)
        var[:, n + 1] = variance_from_fbm(R[:, 2 * n + 1], (n + 1) * dt, p)
    return RbPaths(spots, var, G, R)


def feature_horizon(n: int, N: int, J: int) -> range:
    return range(n, min(N, n + J) + 1)


def conditioning_features(cov: RbCovariance, g_prefix: np.ndarray, n: int, J: int) -> np.ndarray:
    """``E_{h,n} = Lambda[row of Wt_h, :2n] @ G[:2n]`` for ``h = n .. min(N, n+J)``.

    ``g_prefix`` is ``(P, >= 2n)`` or a single vector. Output has one column
    per ``h``; the first column is the realised ``Wt_{t_n}``.
    """
    if J < 0:
        raise DomainError("J must be nonnegative")
    N = cov.n_steps
    if not 1 <= n <= N:
        raise DomainError(f"time index {n} outside [1, {N}]")
    g = np.atleast_2d(g_prefix)[:, : 2 * n]
    rows = np.stack([cov.fbm_row(h)[: 2 * n] for h in feature_horizon(n, N, J)])
    out = g @ rows.T
    return out[0] if np.ndim(g_prefix) == 1 else out
