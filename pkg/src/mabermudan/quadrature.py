"""Gauss-Hermite quadrature (physicists' convention, weight ``exp(-x^2)``)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError

MAX_ORDER = 128


@dataclass(frozen=True)
class GhRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def normal_nodes(self) -> np.ndarray:
        """Nodes for a standard normal variable, ``sqrt(2) * u_q``."""
        return math.sqrt(2.0) * self.nodes

    @property
    def probabilities(self) -> np.ndarray:
        """Weights divided by ``sqrt(pi)``; they sum to one."""
        return self.weights / math.sqrt(math.pi)


def _orthonormal_hermite(Q: int, x: np.ndarray):
    """Orthonormal Hermite functions ``h_{Q-1}(x), h_Q(x)`` by the three-term recurrence."""
    h_prev = np.zeros_like(x)
    h = np.full_like(x, math.pi**-0.25)
    for k in range(Q):
        h_next = math.sqrt(2.0 / (k + 1)) * x * h - math.sqrt(k / (k + 1)) * h_prev
        h_prev, h = h, h_next
    return h_prev, h


@lru_cache(maxsize=None)
def _rule(Q: int) -> GhRule:
    k = np.arange(1, Q)
    x, _ = eigh_tridiagonal(np.zeros(Q), np.sqrt(k / 2.0))
    # Newton polish; h_Q' = sqrt(2Q) h_{Q-1}
    for _ in range(3):
        h_qm1, h_q = _orthonormal_hermite(Q, x)
        x = x - h_q / (math.sqrt(2.0 * Q) * h_qm1)
    h_qm1, _ = _orthonormal_hermite(Q, x)
    w = 1.0 / (Q * h_qm1**2)
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if Q % 2:
        x[Q // 2] = 0.0
    x.setflags(write=False)
    w.setflags(write=False)
    return GhRule(Q, x, w)


def gh_rule(Q: int) -> GhRule:
    """Nodes are the roots of ``H_Q``; the rule is exact for degree ``<= 2Q - 1``."""
    if not (isinstance(Q, (int, np.integer)) and 1 <= Q <= MAX_ORDER):
        raise DomainError(f"quadrature order must be in [1, {MAX_ORDER}], got {Q}")
    return _rule(int(Q))


def gh_expect(f, mu: float, sigma: float, Q: int) -> float:
    """``E[f(G)]`` for ``G ~ N(mu, sigma^2)`` with a ``Q``-point rule.

    ``f`` must accept a numpy array of abscissae.
    """
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if sigma == 0:
        return float(f(np.array([mu]))[0])
    rule = gh_rule(Q)
    values = np.asarray(f(mu + math.sqrt(2.0) * sigma * rule.nodes), dtype=float)
    return float(rule.weights @ values / math.sqrt(math.pi))
