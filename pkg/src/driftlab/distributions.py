"""Target data distributions and their exact geometric metadata.

Five families cover the experiments:

- PointCloud         -- weighted atoms in R^d (support is the atom set)
- IsotropicGaussian  -- N(mu, sigma^2 I), full support
- LineGaussian       -- X = (X1, 0) with X1 ~ N(0,1); support is the x-axis
- SpiralCurve        -- X = (U cos U, U sin U), U ~ Unif[u_min, u_max]
- SmoothedCloud      -- a PointCloud convolved with N(0, sigma^2 I), full support

The first, third and fourth are supported on lower-dimensional sets, the
regime where the reverse drift blows up as t -> 0; `nearest_manifold_point`
returns the closest support point used to quantify that blow-up.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, optimize

from .core import ConfigError, UnsupportedDistributionError, sub_rng

__all__ = [
    "PointCloud",
    "IsotropicGaussian",
    "LineGaussian",
    "SpiralCurve",
    "SmoothedCloud",
    "DataDistribution",
    "sample_data",
    "nearest_manifold_point",
    "data_mean",
    "dist_to_config",
    "dist_from_config",
    "load_pointcloud_csv",
    "four_point_cloud",
    "five_point_cloud",
    "twenty_point_cloud",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PointCloud:
    """Weighted atoms; weights must be positive and sum to one."""

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("point cloud needs at least one point of equal dimension")
        if not np.isfinite(pts).all():
            raise ValueError("point cloud coordinates must be finite")
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must have one entry per point")
            if not np.isfinite(w).all() or (w <= 0).any():
                raise ValueError("weights must be positive and finite")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        object.__setattr__(self, "points", _frozen_array(pts))
        object.__setattr__(self, "weights", _frozen_array(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class IsotropicGaussian:
    mu: np.ndarray
    sigma: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if not np.isfinite(mu).all():
            raise ValueError("mu must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "mu", _frozen_array(mu))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class LineGaussian:
    """X = (X1, 0) in R^2 with X1 standard normal."""

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class SpiralCurve:
    """X = (U cos U, U sin U) in R^2 with U uniform on [u_min, u_max]."""

    u_min: float = 1.0
    u_max: float = 13.0

    def __post_init__(self):
        if not (np.isfinite(self.u_min) and np.isfinite(self.u_max) and self.u_min < self.u_max):
            raise ValueError(f"need u_min < u_max, got [{self.u_min}, {self.u_max}]")

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class SmoothedCloud:
    """A point cloud convolved with isotropic Gaussian noise of scale sigma."""

    base: PointCloud
    sigma: float

    def __post_init__(self):
        if not isinstance(self.base, PointCloud):
            raise ValueError("base must be a PointCloud")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.base.dim


DataDistribution = Union[PointCloud, IsotropicGaussian, LineGaussian, SpiralCurve, SmoothedCloud]


def sample_data(dist: DataDistribution, n: int, seed) -> np.ndarray:
    """Draw n i.i.d. samples as an (n, d) array; deterministic per seed."""
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else sub_rng(int(seed), 0)
    if isinstance(dist, PointCloud):
        idx = rng.choice(len(dist.points), size=n, p=dist.weights)
        return dist.points[idx].copy()
    if isinstance(dist, IsotropicGaussian):
        return dist.mu + dist.sigma * rng.standard_normal((n, dist.dim))
    if isinstance(dist, LineGaussian):
        out = np.zeros((n, 2))
        out[:, 0] = rng.standard_normal(n)
        return out
    if isinstance(dist, SpiralCurve):
        u = rng.uniform(dist.u_min, dist.u_max, size=n)
        return np.column_stack([u * np.cos(u), u * np.sin(u)])
    if isinstance(dist, SmoothedCloud):
        idx = rng.choice(len(dist.base.points), size=n, p=dist.base.weights)
        return dist.base.points[idx] + dist.sigma * rng.standard_normal((n, dist.dim))
    raise UnsupportedDistributionError(f"unknown distribution {type(dist).__name__}")


# Spiral nearest-point search: coarse scan, then bounded refinement of the
# bracketing cell.  The objective has few local minima at this scale.
_SPIRAL_GRID = 4096


def _spiral_point(u):
    u = np.asarray(u, dtype=float)
    return np.stack([u * np.cos(u), u * np.sin(u)], axis=-1)


def nearest_manifold_point(dist: DataDistribution, x) -> np.ndarray:
    """Closest point of the support to x (ties broken by lowest index).

    Only defined for distributions supported on a lower-dimensional set;
    full-support families raise UnsupportedDistributionError.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(dist, PointCloud):
        d2 = np.sum((dist.points - x) ** 2, axis=1)
        return dist.points[int(np.argmin(d2))].copy()
    if isinstance(dist, LineGaussian):
        return np.array([x[0], 0.0])
    if isinstance(dist, SpiralCurve):
        us = np.linspace(dist.u_min, dist.u_max, _SPIRAL_GRID)
        d2 = np.sum((_spiral_point(us) - x) ** 2, axis=1)
        i = int(np.argmin(d2))
        lo = us[max(i - 1, 0)]
        hi = us[min(i + 1, len(us) - 1)]
        res = optimize.minimize_scalar(
            lambda u: float(np.sum((_spiral_point(u) - x) ** 2)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        u_best = res.x if res.fun <= d2[i] else us[i]
        return _spiral_point(u_best)
    raise UnsupportedDistributionError(
        f"{type(dist).__name__} has full support; no nearest support point exists"
    )


def data_mean(dist: DataDistribution) -> np.ndarray:
    """Exact mean of the distribution (quadrature for the spiral)."""
    if isinstance(dist, PointCloud):
        return dist.weights @ dist.points
    if isinstance(dist, IsotropicGaussian):
        return dist.mu.copy()
    if isinstance(dist, LineGaussian):
        return np.zeros(2)
    if isinstance(dist, SpiralCurve):
        width = dist.u_max - dist.u_min
        mx, _ = integrate.quad(lambda u: u * np.cos(u), dist.u_min, dist.u_max, limit=200)
        my, _ = integrate.quad(lambda u: u * np.sin(u), dist.u_min, dist.u_max, limit=200)
        return np.array([mx, my]) / width
    if isinstance(dist, SmoothedCloud):
        return data_mean(dist.base)
    raise UnsupportedDistributionError(f"unknown distribution {type(dist).__name__}")


# --- configuration / file formats -----------------------------------------

def dist_to_config(dist: DataDistribution) -> dict:
    """JSON-serializable description (inverse of dist_from_config)."""
    if isinstance(dist, PointCloud):
        return {
            "kind": "point_cloud",
            "points": dist.points.tolist(),
            "weights": dist.weights.tolist(),
        }
    if isinstance(dist, IsotropicGaussian):
        return {"kind": "gaussian", "mu": dist.mu.tolist(), "sigma": dist.sigma}
    if isinstance(dist, LineGaussian):
        return {"kind": "line"}
    if isinstance(dist, SpiralCurve):
        return {"kind": "spiral", "u_min": dist.u_min, "u_max": dist.u_max}
    if isinstance(dist, SmoothedCloud):
        return {
            "kind": "smoothed_cloud",
            "base": dist_to_config(dist.base),
            "sigma": dist.sigma,
        }
    raise UnsupportedDistributionError(f"unknown distribution {type(dist).__name__}")


def dist_from_config(cfg: dict) -> DataDistribution:
    """Build a distribution from its JSON description (tag + parameters).

    Point clouds may reference a CSV file instead of inline coordinates:
    {"kind": "point_cloud", "csv": "path", "has_weights": false}.
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("distribution config must be an object with a 'kind' tag")
    kind = cfg["kind"]
    extra = dict(cfg)
    extra.pop("kind")
    try:
        if kind == "point_cloud":
            if "csv" in extra:
                return load_pointcloud_csv(extra.pop("csv"), has_weights=extra.pop("has_weights", False))
            points = extra.pop("points")
            weights = extra.pop("weights", None)
            _reject_unknown(kind, extra)
            return PointCloud(points, None if weights is None else np.asarray(weights))
        if kind == "gaussian":
            mu = extra.pop("mu")
            sigma = extra.pop("sigma")
            _reject_unknown(kind, extra)
            return IsotropicGaussian(mu, sigma)
        if kind == "line":
            _reject_unknown(kind, extra)
            return LineGaussian()
        if kind == "spiral":
            u_min = extra.pop("u_min", 1.0)
            u_max = extra.pop("u_max", 13.0)
            _reject_unknown(kind, extra)
            return SpiralCurve(u_min, u_max)
        if kind == "smoothed_cloud":
            base = dist_from_config(extra.pop("base"))
            sigma = extra.pop("sigma")
            _reject_unknown(kind, extra)
            if not isinstance(base, PointCloud):
                raise ConfigError("smoothed_cloud base must be a point cloud")
            return SmoothedCloud(base, sigma)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {kind!r} distribution config: {exc}") from exc
    raise ConfigError(f"unknown distribution kind {kind!r}")


def _reject_unknown(kind, extra):
    if extra:
        raise ConfigError(f"unknown field(s) for {kind!r}: {', '.join(sorted(extra))}")


def load_pointcloud_csv(path, has_weights: bool = False) -> PointCloud:
    """Load a point cloud from CSV: one point per row, optional trailing
    weight column (enabled by has_weights); a non-numeric first row is
    treated as a header and skipped."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if i == 0:
                    continue
                raise ConfigError(f"{path}: non-numeric value in row {i + 1}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if has_weights:
        if data.shape[1] < 2:
            raise ConfigError(f"{path}: need at least one coordinate plus a weight column")
        w = data[:, -1]
        return PointCloud(data[:, :-1], w / w.sum())
    return PointCloud(data)


def save_pointcloud_csv(path, cloud: PointCloud, with_weights: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"x{i + 1}" for i in range(cloud.dim)]
        writer.writerow(header + (["weight"] if with_weights else []))
        for p, w in zip(cloud.points, cloud.weights):
            row = [repr(float(v)) for v in p]
            if with_weights:
                row.append(repr(float(w)))
            writer.writerow(row)


# --- stock experiment clouds (frozen coordinates) --------------------------

def four_point_cloud() -> PointCloud:
    """Four collinear atoms used in the network-capacity comparison."""
    return PointCloud([[1.0, -3.0], [1.0, -1.0], [1.0, 1.0], [1.0, 3.0]])


def five_point_cloud() -> PointCloud:
    """Five equal-weight atoms: a compact cluster away from the origin with
    one close pair, so absorption and loss-floor diagnostics are both
    well-conditioned."""
    return PointCloud([
        [1.40, 1.15],
        [2.04, 1.21],
        [2.85, 1.65],
        [1.50, 2.25],
        [2.55, 2.45],
    ])


def twenty_point_cloud() -> PointCloud:
    """Twenty equal-weight atoms with pairwise separation >= 1.1."""
    return PointCloud([
        [1.95, 1.97], [0.10, -1.37], [-2.85, -0.75], [-0.59, -2.91],
        [-2.89, 3.19], [-0.42, 3.03], [-0.69, -0.04], [1.13, -2.81],
        [2.43, -2.79], [-1.75, 2.53], [1.96, -1.17], [-2.25, 1.27],
        [-0.33, 1.91], [-1.69, -1.15], [1.92, 0.05], [0.72, 2.82],
        [3.15, 1.43], [-3.18, -1.95], [-3.07, 0.36], [-1.73, -2.80],
    ])
