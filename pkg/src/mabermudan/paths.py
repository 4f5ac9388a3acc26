"""Path simulation shared by the engines and the forward benchmark."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rbergomi
from .models import ModelParams, RoughBergomiParams, spot_step
from .state import OptionSpec


def normals_per_step(model: ModelParams) -> int:
    return 2 if isinstance(model, RoughBergomiParams) else 1


def rb_covariance(option: OptionSpec, model: RoughBergomiParams) -> rbergomi.RbCovariance:
    return rbergomi.build_covariance(option.n_dates, float(option.maturity),
                                     float(model.hurst), float(model.rho))


@dataclass
class PathBlock:
    """Spots ``(P, k+1)`` on ``t_0..t_k``; for rough Bergomi also ``G``."""

    spots: np.ndarray
    gaussians: np.ndarray | None = None
    cov: rbergomi.RbCovariance | None = None

    def features(self, n: int, J: int) -> np.ndarray:
        return rbergomi.conditioning_features(self.cov, self.gaussians, n, J)


def simulate(model: ModelParams, option: OptionSpec, z: np.ndarray) -> PathBlock:
    """Turn standard normals into paths.

    ``z`` has ``k`` columns per step for ``k = normals_per_step(model)``;
    the number of simulated steps is ``z.shape[1] // k``.
    """
    if isinstance(model, RoughBergomiParams):
        cov = rb_covariance(option, model)
        paths = rbergomi.simulate_paths(cov, model, z)
        return PathBlock(paths.spots, z, cov)
    steps = z.shape[1]
    spots = np.empty((z.shape[0], steps + 1))
    spots[:, 0] = model.spot0
    for n in range(steps):
        spots[:, n + 1] = spot_step(model, spots[:, n], z[:, n],
                                    option.time(n), option.time(n + 1))
    return PathBlock(spots)
