"""Shared numeric conventions, the sampling time grid, and run configuration.

Conventions used throughout the package:

- A point is a 1-D float64 array of length d >= 1; a batch is a 2-D array
  of shape (n, d). All public operations expect and produce finite values.
- The forward noising process is the Ornstein-Uhlenbeck SDE
  dX_t = -X_t/2 dt + dW_t, whose transition over a step of length dt has
  signal coefficient alpha = e^{-dt} and noise variance beta = 1 - e^{-dt}.
- Sampling runs on a geometric time grid t_1 < ... < t_K = T with constant
  ratio r = (T/t_1)^{1/(K-1)}, so that the step length Delta t_k stays
  proportional to t_k where the reverse drift scales like 1/t.
- All randomness derives from a single 64-bit seed.  Independent consumers
  draw from `sub_rng(seed, slot)` with a fixed integer slot, so adding a
  new consumer never perturbs the streams of existing ones.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, fields
from typing import Iterator

import numpy as np

__all__ = [
    "DriftLabError",
    "ConfigError",
    "UnsupportedDistributionError",
    "DegenerateEstimateError",
    "NonFiniteDriftError",
    "TrainingDiverged",
    "TargetKind",
    "Schedule",
    "StepQuantities",
    "RunConfig",
    "build_exp_schedule",
    "step_quantities",
    "sub_rng",
    "omt",
]


class DriftLabError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DriftLabError):
    """Invalid or malformed configuration input."""


class UnsupportedDistributionError(DriftLabError):
    """Operation requested on a distribution family that cannot support it."""


class DegenerateEstimateError(DriftLabError):
    """A Monte-Carlo estimate has too little effective data to be trusted."""


class NonFiniteDriftError(DriftLabError):
    """A drift evaluation produced NaN/Inf; carries the offending point and time."""

    def __init__(self, x, t: float):
        self.x = np.asarray(x)
        self.t = float(t)
        super().__init__(f"non-finite drift at x={self.x.tolist()}, t={self.t:g}")


class TrainingDiverged(DriftLabError):
    """Loss became non-finite; carries the last finite model and loss trace."""

    def __init__(self, step: int, model, loss_trace):
        self.step = step
        self.model = model
        self.loss_trace = list(loss_trace)
        super().__init__(f"non-finite training loss at step {step}")


class TargetKind(enum.Enum):
    """The three trainable parameterizations of the reverse drift.

    SCORE_S    -- the score itself, S(X,t) = -grad_X log p(X,t)
    EPSILON    -- the injected-noise predictor, eps = sqrt(1-e^{-t}) * S
    COND_EXP_F -- the conditional data mean f(X,t) = E[X_0 | X_t = X],
                  bounded whenever the data has bounded support
    """

    SCORE_S = "SCORE_S"
    EPSILON = "EPSILON"
    COND_EXP_F = "COND_EXP_F"


def omt(t):
    """1 - e^{-t}, computed without cancellation for small t."""
    return -np.expm1(-np.asarray(t, dtype=float))


def sub_rng(seed: int, *slot: int) -> np.random.Generator:
    """Generator for stream `slot` derived from the master seed.

    Counter-based split: the child stream depends only on (seed, slot), not
    on how many other streams exist or in which order they were created.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(slot)))


@dataclass(frozen=True)
class Schedule:
    """Geometric time grid t_1 < ... < t_K = T used by the reverse sampler."""

    t1: float
    T: float
    K: int
    grid: np.ndarray

    def __post_init__(self):
        self.grid.flags.writeable = False

    def times(self) -> Iterator[float]:
        return iter(self.grid)


@dataclass(frozen=True)
class StepQuantities:
    """Per-step bookkeeping for the step [t_k, t_{k+1}] of a schedule.

    dt        = t_{k+1} - t_k
    beta      = 1 - e^{-dt}   (noise variance injected over the step)
    alpha     = e^{-dt}       (signal retained over the step, 1 - beta)
    alpha_bar = e^{-t_k}      (signal retained since time zero)
    """

    dt: float
    beta: float
    alpha: float
    alpha_bar: float


def build_exp_schedule(t1: float, T: float, K: int) -> Schedule:
    """Geometric grid t_k = t1 * r^{k-1} with r = (T/t1)^{1/(K-1)}.

    Endpoints are exact; the constant ratio keeps dt_k/t_k fixed, matching
    the 1/t growth of the reverse drift near the end of sampling.
    """
    t1 = float(t1)
    T = float(T)
    K = int(K)
    if not (0.0 < t1 < T) or not np.isfinite(t1) or not np.isfinite(T):
        raise ValueError(f"need 0 < t1 < T, got t1={t1}, T={T}")
    if K < 2:
        raise ValueError(f"need K >= 2 grid points, got K={K}")
    grid = np.geomspace(t1, T, K)
    return Schedule(t1=t1, T=T, K=K, grid=grid)


def step_quantities(schedule: Schedule, k: int) -> StepQuantities:
    """Quantities for step k (1-indexed, 1 <= k < K) of the schedule."""
    if not 1 <= k < schedule.K:
        raise IndexError(f"step index {k} outside [1, {schedule.K - 1}]")
    t_lo = float(schedule.grid[k - 1])
    t_hi = float(schedule.grid[k])
    dt = t_hi - t_lo
    return StepQuantities(
        dt=dt,
        beta=float(omt(dt)),
        alpha=float(np.exp(-dt)),
        alpha_bar=float(np.exp(-t_lo)),
    )


_KIND_ALIASES = {k.value: k for k in TargetKind}


@dataclass(frozen=True)
class RunConfig:
    """Configuration for a training run; defaults follow the reference setup
    (T=10, K=200 grid points, 1e6 training samples in batches of 1e4,
    Adam with learning rate 1e-3)."""

    seed: int = 0
    dim: int = 2
    t1: float = 0.01
    T: float = 10.0
    K: int = 200
    num_samples: int = 1_000_000
    batch_size: int = 10_000
    learning_rate: float = 1e-3
    num_epochs: int = 2
    target_kind: TargetKind = TargetKind.COND_EXP_F
    hidden_layers: tuple = (16, 16)
    weighting: str = "default"

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if not (0.0 < self.t1 < self.T):
            raise ConfigError(f"need 0 < t1 < T, got t1={self.t1}, T={self.T}")
        if self.K < 2:
            raise ConfigError(f"need K >= 2, got {self.K}")
        if min(self.num_samples, self.batch_size, self.num_epochs) < 1:
            raise ConfigError("num_samples, batch_size and num_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.hidden_layers or any(int(h) < 1 for h in self.hidden_layers):
            raise ConfigError(f"hidden_layers must be positive, got {self.hidden_layers}")
        if self.weighting not in ("default", "uniform"):
            raise ConfigError(f"weighting must be 'default' or 'uniform', got {self.weighting!r}")

    def schedule(self) -> Schedule:
        return build_exp_schedule(self.t1, self.T, self.K)

    def layer_sizes(self) -> tuple:
        """Full network shape: input is (X, t) concatenated, output is d-dimensional."""
        return (self.dim + 1, *(int(h) for h in self.hidden_layers), self.dim)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dim": self.dim,
            "t1": self.t1,
            "T": self.T,
            "K": self.K,
            "num_samples": self.num_samples,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "num_epochs": self.num_epochs,
            "target_kind": self.target_kind.value,
            "hidden_layers": list(self.hidden_layers),
            "weighting": self.weighting,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"run config must be a JSON object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        kwargs = dict(data)
        if "target_kind" in kwargs:
            raw = kwargs["target_kind"]
            if raw not in _KIND_ALIASES:
                raise ConfigError(
                    f"target_kind must be one of {sorted(_KIND_ALIASES)}, got {raw!r}"
                )
            kwargs["target_kind"] = _KIND_ALIASES[raw]
        if "hidden_layers" in kwargs:
            kwargs["hidden_layers"] = tuple(int(h) for h in kwargs["hidden_layers"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)
