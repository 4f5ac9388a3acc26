"""Gaussian process regression with a squared-exponential kernel.

The prior mean is linear in the predictors and fitted by least squares;
the kernel hyperparameters (signal variance, isotropic length scale, noise
variance) maximise the log marginal likelihood of the residuals. Only the
posterior mean is used.

Inside :func:`fit` the inputs are standardised column-wise and the residuals
are scaled to unit variance, so the stored hyperparameters and ``theta``
refer to that standardised problem. :func:`predict` undoes the scaling.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, LinAlgError
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

MAX_TRAIN = 15000
NUGGETS = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)
NM_MAXITER = 200
NM_XATOL = 1e-2  # in log hyperparameters
NM_FATOL = 1e-3
# multiplicative offsets on the median-distance length scale for the 3 starts
START_LENGTH_FACTORS = (1.0, 0.25, 4.0)
SOLVE_RTOL = 1e-7  # accepted relative residual of the kernel solve during the search
SIMPLEX_STEP = 1.0
REJECTED = 1e300  # objective value for infeasible hyperparameters  # initial Nelder-Mead edge in log units
LOG_BOUNDS = (
    (math.log(1e-4), math.log(1e4)),  # signal variance
    (math.log(1e-3), math.log(1e3)),  # length scale
    (math.log(1e-10), math.log(1.0)),  # noise variance
)
PREDICT_CHUNK = 16384


class Hyperparams(NamedTuple):
    signal_var: float
    length_scale: float
    noise_var: float


@dataclass(frozen=True)
class GprModel:
    train_x: np.ndarray
    mean_coeffs: np.ndarray
    signal_var: float
    length_scale: float
    noise_var: float
    theta: np.ndarray
    x_center: np.ndarray
    x_scale: np.ndarray
    y_scale: float

    @property
    def dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def hyperparams(self) -> Hyperparams:
        return Hyperparams(self.signal_var, self.length_scale, self.noise_var)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return predict(self, X)


def kernel(x, x_prime, signal_var: float, length_scale: float):
    """Squared-exponential covariance between two points (or row sets)."""
    x, x_prime = np.asarray(x, dtype=float), np.asarray(x_prime, dtype=float)
    d2 = np.sum((x - x_prime) ** 2, axis=-1)
    return signal_var * np.exp(-0.5 * d2 / length_scale**2)


def gram(X, Y, signal_var: float, length_scale: float) -> np.ndarray:
    return signal_var * np.exp(-0.5 * cdist(X, Y, "sqeuclidean") / length_scale**2)


def _design(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def ols_mean(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares intercept and slopes; intercept-only if rank deficient."""
    A = _design(X)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        warnings.warn("rank-deficient GPR mean design, using intercept only", RuntimeWarning)
        coef = np.zeros(A.shape[1])
        coef[0] = float(np.mean(y))
    return coef


def _factor(K: np.ndarray, noise_var: float, signal_var: float, nuggets=NUGGETS):
    n = K.shape[0]
    for eps in nuggets:
        try:
            A = K.copy()
            A[np.diag_indices(n)] += noise_var + eps * signal_var
            return cholesky(A, lower=True, check_finite=False)
        except LinAlgError:
            continue
    raise NumericalError("kernel matrix not positive definite after maximum nugget")


def _lml_from_sqdist(D2: np.ndarray, r: np.ndarray, hp: Hyperparams, strict: bool = False) -> float:
    # strict: reject kernels whose solve, nugget included, misses the requested
    # system, so the search stays away from numerically singular matrices
    K = hp.signal_var * np.exp(-0.5 * D2 / hp.length_scale**2)
    L = _factor(K, hp.noise_var, hp.signal_var, NUGGETS[:1] if strict else NUGGETS)
    alpha = cho_solve((L, True), r, check_finite=False)
    if strict:
        resid = K @ alpha + hp.noise_var * alpha - r
        if np.max(np.abs(resid)) > SOLVE_RTOL * np.max(np.abs(r)):
            raise NumericalError("kernel solve not accurate")
    n = r.shape[0]
    return float(
        -0.5 * r @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)
    )


def log_marginal_likelihood(X, y, hyperparams, mean_coeffs=None) -> float:
    """Gaussian log evidence of ``y - mu(X)`` under ``K + noise_var * I``.

    ``mean_coeffs`` defaults to the least-squares linear mean.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    hp = Hyperparams(*hyperparams)
    if mean_coeffs is None:
        mean_coeffs = ols_mean(X, y)
    r = y - _design(X) @ np.asarray(mean_coeffs, dtype=float)
    D2 = cdist(X, X, "sqeuclidean")
    return _lml_from_sqdist(D2, r, hp)


def _median_distance(Z: np.ndarray) -> float:
    sub = Z[:2000]
    d = pdist(sub)
    med = float(np.median(d)) if d.size else 1.0
    return med if med > 0 else 1.0


def _search_bounds(noise_floor: float | None = None):
    if noise_floor is None:
        return LOG_BOUNDS
    lo = min(max(math.log(noise_floor), LOG_BOUNDS[2][0]), LOG_BOUNDS[2][1])
    return LOG_BOUNDS[:2] + ((lo, LOG_BOUNDS[2][1]),)


def _clip(logp: np.ndarray, bounds=LOG_BOUNDS) -> np.ndarray:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.clip(logp, lo, hi)


def _simplex(x0: np.ndarray, bounds, step: float = SIMPLEX_STEP) -> np.ndarray:
    """Initial simplex with absolute steps in log space, stepping inwards at bounds.

    scipy's default uses relative 5% steps, which collapse for log values
    near 0 (e.g. a unit signal variance).
    """
    pts = [x0]
    for i, (lo, hi) in enumerate(bounds):
        v = x0.copy()
        v[i] = x0[i] + step if x0[i] + step <= hi else x0[i] - step
        v[i] = min(max(v[i], lo), hi)
        pts.append(v)
    return np.array(pts)


def optimise_hyperparams(Z: np.ndarray, r: np.ndarray, subset: int | None = None,
                         init: Hyperparams | None = None,
                         noise_floor: float | None = None) -> Hyperparams:
    """Nelder-Mead over log hyperparameters.

    Starts from three deterministic points, or from ``init`` alone when a
    warm start is available. If ``subset`` is given, the likelihood is
    evaluated on the first ``subset`` rows only. ``noise_floor`` raises the
    lower bound of the (standardised) noise variance.
    """
    bounds = _search_bounds(noise_floor)
    if subset is not None and Z.shape[0] > subset:
        Z, r = Z[:subset], r[:subset]
    D2 = cdist(Z, Z, "sqeuclidean")
    var = float(np.var(r))
    ell0 = _median_distance(Z)

    def objective(logp):
        hp = Hyperparams(*np.exp(_clip(logp, bounds)))
        try:
            val = _lml_from_sqdist(D2, r, hp, strict=True)
        except NumericalError:
            return REJECTED
        return -val if np.isfinite(val) else REJECTED

    def search(starts):
        best = None
        for x0 in starts:
            res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                           options={"maxiter": NM_MAXITER, "xatol": NM_XATOL, "fatol": NM_FATOL,
                                    "initial_simplex": _simplex(x0, bounds)})
            if best is None or res.fun < best.fun:
                best = res
        return best

    best = None
    if init is not None:
        best = search([_clip(np.log(np.asarray(init, dtype=float)), bounds)])
    if best is None or not best.fun < REJECTED:
        # no warm start, or it found no feasible point
        best = search([_clip(np.log([var, ell0 * f, 1e-4 * var]), bounds) for f in START_LENGTH_FACTORS])
    if not best.fun < REJECTED:
        raise NumericalError("log marginal likelihood not finite at any start")
    return Hyperparams(*np.exp(_clip(best.x, bounds)))


def fit(X, y, hyperparams=None, *, noise_var: float | None = None,
        hyper_subset: int | None = None, init: Hyperparams | None = None,
        noise_floor: float | None = None) -> GprModel:
    """Fit the GPR surrogate.

    Parameters
    ----------
    X : (P, D) array
    y : (P,) array
    hyperparams : optional ``(signal_var, length_scale, noise_var)`` in the
        standardised space; skips the likelihood search when given.
    noise_var : fixes the noise variance (standardised units) during the
        search, e.g. for interpolation.
    hyper_subset : evaluate the likelihood on the first rows only.
    init : warm start for the likelihood search (a single start replaces
        the three default ones).
    noise_floor : lower bound for the standardised noise variance in the
        search.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    P, D = X.shape
    if P > MAX_TRAIN:
        raise DomainError(f"at most {MAX_TRAIN} training points, got {P}")
    if y.shape != (P,):
        raise DomainError("y must have one entry per training row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite training data")
    if D == 0:
        return GprModel(X, np.array([float(np.mean(y))]), 1.0, 1.0, 0.0,
                        np.zeros(0), np.zeros(0), np.ones(0), 1.0)
    if P < D + 2:
        raise DomainError(f"need at least D+2={D + 2} training points, got {P}")

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - center) / scale
    coef_z = ols_mean(Z, y)
    resid = y - _design(Z) @ coef_z
    y_scale = float(np.std(resid))
    # mean coefficients in raw units
    slopes = coef_z[1:] / scale
    mean_coeffs = np.concatenate([[coef_z[0] - slopes @ center], slopes])

    if y_scale <= 1e-14 * max(1.0, float(np.max(np.abs(y)))):
        hp = Hyperparams(1.0, _median_distance(Z), 0.0) if hyperparams is None else Hyperparams(*hyperparams)
        return GprModel(X, mean_coeffs, hp.signal_var, hp.length_scale, hp.noise_var,
                        np.zeros(P), center, scale, 0.0)

    r = resid / y_scale
    if hyperparams is not None:
        hp = Hyperparams(*hyperparams)
    elif noise_var is not None:
        hp = _optimise_fixed_noise(Z, r, noise_var, hyper_subset)
    else:
        hp = optimise_hyperparams(Z, r, hyper_subset, init, noise_floor)
    K = gram(Z, Z, hp.signal_var, hp.length_scale)
    L = _factor(K, hp.noise_var, hp.signal_var)
    theta = cho_solve((L, True), r, check_finite=False)
    return GprModel(X, mean_coeffs, hp.signal_var, hp.length_scale, hp.noise_var,
                    theta, center, scale, y_scale)


def _optimise_fixed_noise(Z, r, noise_var, subset):
    if subset is not None and Z.shape[0] > subset:
        Z, r = Z[:subset], r[:subset]
    D2 = cdist(Z, Z, "sqeuclidean")
    ell0 = _median_distance(Z)

    def objective(logp):
        lp = _clip(np.array([logp[0], logp[1], LOG_BOUNDS[2][0]]))
        hp = Hyperparams(math.exp(lp[0]), math.exp(lp[1]), noise_var)
        try:
            return -_lml_from_sqdist(D2, r, hp, strict=True)
        except NumericalError:
            return REJECTED

    best = None
    for factor in START_LENGTH_FACTORS:
        x0 = np.log([1.0, ell0 * factor])
        res = minimize(objective, x0, method="Nelder-Mead", bounds=LOG_BOUNDS[:2],
                       options={"maxiter": NM_MAXITER, "xatol": NM_XATOL, "fatol": NM_FATOL,
                                "initial_simplex": _simplex(x0, LOG_BOUNDS[:2])})
        if best is None or res.fun < best.fun:
            best = res
    if not best.fun < REJECTED:
        raise NumericalError("log marginal likelihood not finite at any start")
    return Hyperparams(math.exp(best.x[0]), math.exp(best.x[1]), noise_var)


def predict(m: GprModel, X_star) -> np.ndarray:
    """Posterior mean ``mu(X*) + K(X*, X) theta`` (rescaled)."""
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star[:, None] if m.dim <= 1 else X_star[None, :]
    if X_star.shape[1] != m.dim:
        raise DomainError(f"expected {m.dim} columns, got {X_star.shape[1]}")
    out = _design(X_star) @ m.mean_coeffs
    if m.dim == 0 or m.y_scale == 0.0:
        return out
    Ztrain = (m.train_x - m.x_center) / m.x_scale
    for lo in range(0, X_star.shape[0], PREDICT_CHUNK):
        Zs = (X_star[lo : lo + PREDICT_CHUNK] - m.x_center) / m.x_scale
        out[lo : lo + PREDICT_CHUNK] += m.y_scale * (
            gram(Zs, Ztrain, m.signal_var, m.length_scale) @ m.theta
        )
    return out
