"""Closed-form reference targets for the reverse drift, plus a Monte-Carlo
estimator that cross-checks them without sharing any algebra.

With the forward process X_t = X_0 e^{-t/2} + sqrt(1-e^{-t}) N, the marginal
density is a Gaussian mixture over the data, and three equivalent target
functions describe the reverse drift (sign convention S = -grad log p):

    S(X,t)   = E[(X_t - X_0 e^{-t/2}) / (1-e^{-t}) | X_t = X]
    eps(X,t) = sqrt(1-e^{-t}) * S(X,t)
    f(X,t)   = E[X_0 | X_t = X]
             with S = X/(1-e^{-t}) - e^{-t/2}/(1-e^{-t}) * f

Families with a closed form:

- isotropic Gaussian data:  S = (X - mu e^{-t/2}) / (sigma^2 e^{-t} + 1-e^{-t}),
  finite down to t = 0;
- data on the x-axis with standard-normal first coordinate:
  S = (X1, X2/(1-e^{-t})) -- the second component blows up like X2/t;
- point clouds: f is a softmax-weighted atom average;
- point clouds convolved with N(0, sigma^2 I): like the Gaussian case the
  score stays bounded at t = 0, with softmax weights over the atoms.

For data on a lower-dimensional support the score behaves like
(X - y_X)/t as t -> 0, y_X the closest support point; the smoothed family
is the bounded contrast to that blow-up.

Singular-family oracles reject times below 1e-12 instead of clamping:
clamping would silently hide the very blow-up these functions quantify.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import softmax

from .core import (
    DegenerateEstimateError,
    TargetKind,
    UnsupportedDistributionError,
    omt,
    sub_rng,
)
from .distributions import (
    DataDistribution,
    IsotropicGaussian,
    LineGaussian,
    PointCloud,
    SmoothedCloud,
    sample_data,
)

__all__ = [
    "OracleTargets",
    "McEstimate",
    "eps_from_score",
    "score_from_eps",
    "f_from_score",
    "score_from_f",
    "oracle_score_gaussian",
    "oracle_f_pointcloud",
    "oracle_score_pointcloud",
    "oracle_targets_line",
    "oracle_score_smoothed",
    "mc_oracle_f",
    "analytic_target_fn",
    "analytic_score_fn",
    "analytic_targets",
]

_T_MIN = 1e-12


def _check_positive_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < _T_MIN:
        raise ValueError(f"time must be >= {_T_MIN:g} for this target, got {t!r}")
    return t


def _check_nonneg_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"time must be >= 0, got {t!r}")
    return t


@dataclass(frozen=True)
class OracleTargets:
    """The three parameterizations of the reverse drift at one (X, t)."""

    s: np.ndarray
    eps: np.ndarray
    f: np.ndarray


class McEstimate(NamedTuple):
    value: np.ndarray
    ess: float


# --- parameterization algebra ----------------------------------------------

def eps_from_score(s, t):
    return np.sqrt(omt(t)) * np.asarray(s)


def score_from_eps(eps, t):
    _check_positive_time(np.min(t))
    return np.asarray(eps) / np.sqrt(omt(t))


def f_from_score(s, x, t):
    return np.exp(t / 2.0) * (np.asarray(x) - omt(t) * np.asarray(s))


def score_from_f(f, x, t):
    _check_positive_time(np.min(t))
    v = omt(t)
    return (np.asarray(x) - np.exp(-t / 2.0) * np.asarray(f)) / v


def _targets_from_score(s, x, t) -> OracleTargets:
    return OracleTargets(s=s, eps=eps_from_score(s, t), f=f_from_score(s, x, t))


def _targets_from_f(f, x, t) -> OracleTargets:
    s = score_from_f(f, x, t)
    return OracleTargets(s=s, eps=eps_from_score(s, t), f=np.asarray(f))


# --- closed forms ------------------------------------------------------------

def oracle_score_gaussian(mu, sigma: float, x, t: float) -> np.ndarray:
    """Score for N(mu, sigma^2 I) data; finite for all t >= 0."""
    t = _check_nonneg_time(t)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    denom = sigma**2 * np.exp(-t) + omt(t)
    return (x - np.asarray(mu) * np.exp(-t / 2.0)) / denom


def _cloud_logits(points, log_weights, x, t, denom):
    # logits of the posterior over atoms given X_t = x; scipy softmax
    # subtracts the max internally so the 1/t scale near t=0 is safe.
    x = np.asarray(x, dtype=float)
    diff = x[..., None, :] - points * np.exp(-t / 2.0)
    return -np.sum(diff**2, axis=-1) / (2.0 * denom) + log_weights


def oracle_f_pointcloud(cloud: PointCloud, x, t: float) -> np.ndarray:
    """Conditional data mean for point-cloud data: softmax-weighted atoms."""
    t = _check_positive_time(t)
    logits = _cloud_logits(cloud.points, np.log(cloud.weights), x, t, omt(t))
    return softmax(logits, axis=-1) @ cloud.points


def oracle_score_pointcloud(cloud: PointCloud, x, t: float) -> np.ndarray:
    """Score for point-cloud data, derived from the conditional mean."""
    return score_from_f(oracle_f_pointcloud(cloud, x, t), x, t)


def oracle_targets_line(x, t: float) -> OracleTargets:
    """All three targets for data on the x-axis with N(0,1) first coordinate.

    S = (x1, x2/(1-e^{-t})); eps = (sqrt(1-e^{-t}) x1, x2/sqrt(1-e^{-t}));
    f = (x1 e^{-t/2}, 0).
    """
    t = _check_positive_time(t)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("line targets are defined in R^2")
    v = float(omt(t))
    s = np.stack([x[..., 0], x[..., 1] / v], axis=-1)
    eps = np.stack([np.sqrt(v) * x[..., 0], x[..., 1] / np.sqrt(v)], axis=-1)
    f = np.stack([x[..., 0] * np.exp(-t / 2.0), np.zeros_like(x[..., 1])], axis=-1)
    return OracleTargets(s=s, eps=eps, f=f)


def oracle_score_smoothed(cloud: PointCloud, sigma: float, x, t: float) -> np.ndarray:
    """Score for a point cloud convolved with N(0, sigma^2 I).

    The convolution keeps the effective noise variance at
    sigma^2 e^{-t} + 1 - e^{-t} >= sigma^2 min(1, e^{-t}) > 0, so the score
    stays bounded all the way to t = 0 (contrast with the bare cloud).
    """
    t = _check_nonneg_time(t)
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=float)
    denom = sigma**2 * np.exp(-t) + omt(t)
    logits = _cloud_logits(cloud.points, np.log(cloud.weights), x, t, denom)
    f_hat = softmax(logits, axis=-1) @ cloud.points
    return (x - np.exp(-t / 2.0) * f_hat) / denom


# --- Monte-Carlo oracle ------------------------------------------------------

def mc_oracle_f(
    dist: DataDistribution,
    x,
    t: float,
    n: int,
    bandwidth: float,
    seed,
    observe_time: float = 0.0,
) -> McEstimate:
    """Kernel-regression estimate of E[X_{t'} | X_t = x] from forward draws.

    Draws n pairs by simulating the forward process, weights the observed
    X_{t'} values (t' = observe_time, default 0 for the clean data) with a
    Gaussian kernel in ||X_t - x|| of the given bandwidth, and returns the
    weighted mean together with the effective sample size
    (sum w)^2 / sum w^2.  Used purely as an independent cross-check: it
    shares no algebra with the closed forms above.

    Raises DegenerateEstimateError when the effective sample size drops
    below 30.
    """
    t = _check_positive_time(t)
    t_obs = _check_nonneg_time(observe_time)
    if not 0.0 <= t_obs < t:
        raise ValueError(f"observe_time must lie in [0, t), got {t_obs} with t={t}")
    if n < 1_000:
        raise ValueError(f"need n >= 1000 forward draws, got {n}")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    x = np.asarray(x, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else sub_rng(int(seed), 0)

    x0 = sample_data(dist, n, rng)
    if t_obs > 0.0:
        x_obs = x0 * np.exp(-t_obs / 2.0) + np.sqrt(omt(t_obs)) * rng.standard_normal(x0.shape)
        lag = t - t_obs
    else:
        x_obs = x0
        lag = t
    xt = x_obs * np.exp(-lag / 2.0) + np.sqrt(omt(lag)) * rng.standard_normal(x0.shape)

    d2 = np.sum((xt - x) ** 2, axis=1)
    logw = -(d2 - d2.min()) / (2.0 * bandwidth**2)
    w = np.exp(logw)
    wsum = w.sum()
    ess = float(wsum**2 / np.sum(w**2))
    if ess < 30.0:
        raise DegenerateEstimateError(
            f"effective sample size {ess:.1f} < 30 at x={x.tolist()}, t={t:g}"
        )
    return McEstimate(value=(w @ x_obs) / wsum, ess=ess)


# --- dispatch over distribution families -------------------------------------

def analytic_target_fn(dist: DataDistribution, kind: TargetKind) -> Callable:
    """Exact target function (x, t) -> array for the given parameterization.

    Supported: point clouds, the isotropic Gaussian, the line family, and
    smoothed clouds.  The spiral curve has no closed form.
    """
    kind = TargetKind(kind)
    if isinstance(dist, LineGaussian):
        attr = {"SCORE_S": "s", "EPSILON": "eps", "COND_EXP_F": "f"}[kind.value]
        return lambda x, t: getattr(oracle_targets_line(x, t), attr)
    if isinstance(dist, PointCloud):
        base_f = lambda x, t: oracle_f_pointcloud(dist, x, t)
        if kind is TargetKind.COND_EXP_F:
            return base_f
        if kind is TargetKind.SCORE_S:
            return lambda x, t: score_from_f(base_f(x, t), x, t)
        return lambda x, t: eps_from_score(score_from_f(base_f(x, t), x, t), t)
    if isinstance(dist, IsotropicGaussian):
        base_s = lambda x, t: oracle_score_gaussian(dist.mu, dist.sigma, x, t)
    elif isinstance(dist, SmoothedCloud):
        base_s = lambda x, t: oracle_score_smoothed(dist.base, dist.sigma, x, t)
    else:
        raise UnsupportedDistributionError(
            f"no closed-form target for {type(dist).__name__}"
        )
    if kind is TargetKind.SCORE_S:
        return base_s
    if kind is TargetKind.EPSILON:
        return lambda x, t: eps_from_score(base_s(x, t), t)
    return lambda x, t: f_from_score(base_s(x, t), x, t)


def analytic_score_fn(dist: DataDistribution) -> Callable:
    """Exact score (x, t) -> S(x, t); the drift source for exact sampling."""
    return analytic_target_fn(dist, TargetKind.SCORE_S)


def analytic_targets(dist: DataDistribution, x, t: float) -> OracleTargets:
    """All three exact targets at one (x, t); see analytic_target_fn."""
    if isinstance(dist, LineGaussian):
        return oracle_targets_line(x, t)
    if isinstance(dist, PointCloud):
        return _targets_from_f(oracle_f_pointcloud(dist, x, t), x, t)
    if isinstance(dist, IsotropicGaussian):
        return _targets_from_score(oracle_score_gaussian(dist.mu, dist.sigma, x, t), x, t)
    if isinstance(dist, SmoothedCloud):
        return _targets_from_score(oracle_score_smoothed(dist.base, dist.sigma, x, t), x, t)
    raise UnsupportedDistributionError(f"no closed-form targets for {type(dist).__name__}")
