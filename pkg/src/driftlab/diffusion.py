"""Forward noising, the three training losses, and the reverse-time sampler.

Forward process (exact solution of dX = -X/2 dt + dW):

    X_t = X_0 e^{-t/2} + sqrt(1-e^{-t}) N,   N ~ N(0, I)

Training minimizes a weighted MSE against one of three targets built from
the same (X_0, t, N) draw:

    SCORE_S     target N / sqrt(1-e^{-t}),  default weight 1-e^{-t}
    EPSILON     target N,                   default weight 1
    COND_EXP_F  target X_0,                 default weight 1/(e^t - 1)

The SCORE_S weight makes the weighted score loss equal the noise-prediction
loss; the COND_EXP_F weight aligns the per-time loss floor, whose exact
value E||X_0 - f(X_t,t)||^2 grows like e^t - 1.

Sampling integrates the reverse-time SDE on the geometric grid with a
splitting step: explicit Euler on the score drift, then the exact
half-flow of the linear part plus fresh noise,

    Xbar = X - dt * S(X, t_hi)
    X    = e^{dt/2} Xbar + sqrt(1-e^{-dt}) N.

The final step t_1 -> 0 applies the deterministic part only: the score may
be singular at t = 0, and skipping the last noise injection leaves point
cloud samples on their atoms.  For comparison, `ddpm_step` implements the
discrete-update form (X - beta/sqrt(1-alpha_bar) eps) / sqrt(alpha)
+ sqrt(beta) N, which agrees with the splitting step to second order in dt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import (
    NonFiniteDriftError,
    RunConfig,
    Schedule,
    TargetKind,
    TrainingDiverged,
    omt,
    sub_rng,
)
from .distributions import DataDistribution, sample_data
from .mlp import MlpModel, adam_step, init_adam, init_mlp, mlp_forward, mlp_loss_grad
from .oracles import score_from_eps, score_from_f

__all__ = [
    "DriftFn",
    "TrainingBatch",
    "forward_sample",
    "make_target",
    "lambda_weight",
    "make_training_batch",
    "train",
    "as_score",
    "splitting_step",
    "ddpm_step",
    "backward_sample",
]

# A drift provider maps a batch (n, d) and a scalar time to S(x, t) of the
# same shape: either a closed-form target or an adapted trained network.
DriftFn = Callable[[np.ndarray, float], np.ndarray]


def forward_sample(x0, t, seed) -> tuple:
    """Diffuse x0 to time t; returns (xt, noise) with the drawn noise.

    x0 may be a point (d,) or a batch (n, d); t a scalar or per-row array.
    """
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    if (t < 0).any():
        raise ValueError("time must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else sub_rng(int(seed), 0)
    noise = rng.standard_normal(x0.shape)
    t_col = t[..., None] if t.ndim == x0.ndim - 1 else t
    xt = x0 * np.exp(-t_col / 2.0) + np.sqrt(omt(t_col)) * noise
    return xt, noise


def make_target(kind: TargetKind, x0, xt, noise, t) -> np.ndarray:
    """Regression target for one parameterization from a forward draw."""
    kind = TargetKind(kind)
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    t = np.asarray(t, dtype=float)
    if (t <= 0).any():
        raise ValueError("time must be > 0 for training targets")
    if kind is TargetKind.COND_EXP_F:
        return x0.copy()
    if kind is TargetKind.EPSILON:
        return noise.copy()
    t_col = t[..., None] if t.ndim == noise.ndim - 1 else t
    return noise / np.sqrt(omt(t_col))


def lambda_weight(kind: TargetKind, t, choice: str = "default"):
    """Per-time loss weight; `choice='uniform'` overrides every kind to 1."""
    kind = TargetKind(kind)
    t = np.asarray(t, dtype=float)
    if (t <= 0).any():
        raise ValueError("time must be > 0")
    if choice == "uniform":
        return np.ones_like(t)
    if choice != "default":
        raise ValueError(f"weighting must be 'default' or 'uniform', got {choice!r}")
    if kind is TargetKind.COND_EXP_F:
        return 1.0 / np.expm1(t)
    if kind is TargetKind.EPSILON:
        return np.ones_like(t)
    return omt(t)


@dataclass(frozen=True)
class TrainingBatch:
    """One forward-diffused minibatch with its regression target and weights.

    Satisfies xt = x0 e^{-t/2} + sqrt(1-e^{-t}) noise row by row.
    """

    x0: np.ndarray
    t: np.ndarray
    noise: np.ndarray
    xt: np.ndarray
    target: np.ndarray
    weight: np.ndarray

    def net_inputs(self) -> np.ndarray:
        return np.column_stack([self.xt, self.t])


def make_training_batch(kind: TargetKind, x0, t, noise, weighting: str = "default") -> TrainingBatch:
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    noise = np.asarray(noise, dtype=float)
    xt = x0 * np.exp(-t[:, None] / 2.0) + np.sqrt(omt(t))[:, None] * noise
    return TrainingBatch(
        x0=x0,
        t=t,
        noise=noise,
        xt=xt,
        target=make_target(kind, x0, xt, noise, t),
        weight=lambda_weight(kind, t, weighting),
    )


def train(dist: DataDistribution, config: RunConfig) -> tuple:
    """Fit a network to the configured target on `dist`.

    Draws a dataset of config.num_samples points once, then runs
    config.num_epochs shuffled passes in batches of config.batch_size; each
    step draws fresh times (uniform over the sampling grid) and noise, and
    takes one Adam step on the weighted MSE.  Returns (model, loss_trace)
    with one loss value per step.  Deterministic per config.seed and
    single-threaded.

    Raises TrainingDiverged (carrying the last finite model) if the loss
    leaves the finite range.
    """
    schedule = config.schedule()
    kind = config.target_kind
    data = sample_data(dist, config.num_samples, sub_rng(config.seed, 1))
    if data.shape[1] != config.dim:
        raise ValueError(
            f"distribution is {data.shape[1]}-dimensional but config.dim={config.dim}"
        )
    shuffle_rng = sub_rng(config.seed, 2)
    times_rng = sub_rng(config.seed, 3)
    noise_rng = sub_rng(config.seed, 4)

    model = init_mlp(config.layer_sizes(), sub_rng(config.seed, 5))
    state = init_adam(model, lr=config.learning_rate)
    loss_trace = []

    batches_per_epoch = config.num_samples // config.batch_size
    if batches_per_epoch == 0:
        raise ValueError("batch_size exceeds num_samples")
    for _ in range(config.num_epochs):
        perm = shuffle_rng.permutation(config.num_samples)
        for j in range(batches_per_epoch):
            rows = perm[j * config.batch_size:(j + 1) * config.batch_size]
            x0 = data[rows]
            t = schedule.grid[times_rng.integers(0, schedule.K, size=len(rows))]
            noise = noise_rng.standard_normal(x0.shape)
            batch = make_training_batch(kind, x0, t, noise, config.weighting)
            loss, grads = mlp_loss_grad(model, batch.net_inputs(), batch.target, batch.weight)
            if not np.isfinite(loss):
                raise TrainingDiverged(len(loss_trace), model, loss_trace)
            model, state = adam_step(model, grads, state)
            loss_trace.append(loss)
    return model, loss_trace


def as_score(kind: TargetKind, model: Union[MlpModel, Callable]) -> DriftFn:
    """Adapt a trained network (or a raw target function) into a score.

    SCORE_S passes through; EPSILON divides by sqrt(1-e^{-t}); COND_EXP_F
    applies S = x/(1-e^{-t}) - e^{-t/2}/(1-e^{-t}) f(x,t).  `model` is
    either an MlpModel evaluated on (X, t) rows, or any callable
    (x, t) -> array with the same meaning (e.g. a closed-form target).
    """
    kind = TargetKind(kind)
    if isinstance(model, MlpModel):
        def raw(x, t):
            x = np.asarray(x, dtype=float)
            return mlp_forward(model, np.column_stack([x, np.full(len(x), t)]))
    else:
        raw = model

    if kind is TargetKind.SCORE_S:
        return lambda x, t: np.asarray(raw(x, t), dtype=float)
    if kind is TargetKind.EPSILON:
        return lambda x, t: score_from_eps(raw(x, t), t)
    return lambda x, t: score_from_f(raw(x, t), np.asarray(x, dtype=float), t)


def _checked_drift(drift: DriftFn, x: np.ndarray, t: float) -> np.ndarray:
    s = np.asarray(drift(x, t), dtype=float)
    if s.shape != x.shape:
        raise ValueError(f"drift returned shape {s.shape}, expected {x.shape}")
    if not np.isfinite(s).all():
        bad = np.argwhere(~np.isfinite(s).all(axis=-1)).ravel()
        raise NonFiniteDriftError(x[bad[0]] if x.ndim == 2 else x, t)
    return s


def splitting_step(x, t_hi: float, t_lo: float, drift: DriftFn, noise) -> np.ndarray:
    """One reverse step from t_hi down to t_lo with the given noise draw."""
    if not 0.0 < t_lo < t_hi:
        raise ValueError(f"need 0 < t_lo < t_hi, got {t_lo}, {t_hi}")
    x = np.asarray(x, dtype=float)
    dt = t_hi - t_lo
    x_bar = x - dt * _checked_drift(drift, x, t_hi)
    return np.exp(dt / 2.0) * x_bar + np.sqrt(omt(dt)) * np.asarray(noise)


def ddpm_step(xt, t_hi: float, t_lo: float, eps_provider: Callable, noise_or_seed) -> np.ndarray:
    """One discrete-update reverse step from t_hi down to t_lo.

    X <- (X - beta/sqrt(1-alpha_bar) eps(X, t_hi)) / sqrt(alpha) + sqrt(beta) N
    with alpha = e^{-dt}, beta = 1-e^{-dt}, alpha_bar = e^{-t_hi}.
    `noise_or_seed` is either the noise array itself (for paired
    comparisons) or a seed/Generator.
    """
    if not 0.0 < t_lo < t_hi:
        raise ValueError(f"need 0 < t_lo < t_hi, got {t_lo}, {t_hi}")
    x = np.asarray(xt, dtype=float)
    if isinstance(noise_or_seed, (np.ndarray, list)):
        noise = np.asarray(noise_or_seed, dtype=float)
    else:
        rng = (noise_or_seed if isinstance(noise_or_seed, np.random.Generator)
               else sub_rng(int(noise_or_seed), 0))
        noise = rng.standard_normal(x.shape)
    dt = t_hi - t_lo
    beta = float(omt(dt))
    alpha = np.exp(-dt)
    alpha_bar = np.exp(-t_hi)
    eps = np.asarray(eps_provider(x, t_hi), dtype=float)
    if not np.isfinite(eps).all():
        raise NonFiniteDriftError(x, t_hi)
    return (x - beta / np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(alpha) + np.sqrt(beta) * noise


def backward_sample(
    drift: DriftFn,
    schedule: Schedule,
    n: int,
    dim: int,
    seed,
    snapshot_times: Optional[list] = None,
):
    """Generate n samples by integrating the reverse SDE from t_K down to 0.

    Starts from N(0, I) at t_K (the forward marginal there retains less than
    e^{-T/2} of the data), applies the splitting step down the grid, and
    finishes with the noise-free step from t_1 to 0.

    With `snapshot_times` (grid times and/or 0.0), also returns a dict
    mapping each requested time to a copy of the state when the sampler
    reached it.  Returns samples, or (samples, snapshots) when
    snapshot_times is given.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else sub_rng(int(seed), 0)
    want = list(snapshot_times) if snapshot_times is not None else []
    snaps = {}

    def record(t_now, state):
        for t_req in want:
            if abs(t_req - t_now) <= 1e-9 * max(1.0, abs(t_req)):
                snaps[t_req] = state.copy()

    x = rng.standard_normal((n, dim))
    record(schedule.grid[-1], x)
    for k in range(schedule.K - 1, 0, -1):
        t_hi = float(schedule.grid[k])
        t_lo = float(schedule.grid[k - 1])
        noise = rng.standard_normal((n, dim))
        x = splitting_step(x, t_hi, t_lo, drift, noise)
        record(t_lo, x)
    t1 = float(schedule.grid[0])
    x = np.exp(t1 / 2.0) * (x - t1 * _checked_drift(drift, x, t1))
    record(0.0, x)
    if snapshot_times is None:
        return x
    return x, snaps
