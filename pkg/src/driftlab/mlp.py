"""Small fully-connected network with hand-written backprop and Adam.

Layout: affine -> tanh -> ... -> affine (linear output, since the regression
targets are unbounded or data-scaled).  The network input is the point X
with the raw time t appended as an extra coordinate, so for d-dimensional
data the layer sizes run (d+1, hidden..., d).

Weights are stored as (fan_in, fan_out) matrices applied as x @ W + b on
row batches.  Initialization is uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)]
with zero biases, deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import sub_rng

__all__ = [
    "MlpModel",
    "MlpGrads",
    "AdamState",
    "init_mlp",
    "mlp_forward",
    "mlp_loss_grad",
    "init_adam",
    "adam_step",
    "param_count",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class MlpModel:
    layer_sizes: tuple
    weights: tuple
    biases: tuple

    @property
    def dim_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def dim_out(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class MlpGrads:
    weights: tuple
    biases: tuple


@dataclass(frozen=True)
class AdamState:
    m_w: tuple
    v_w: tuple
    m_b: tuple
    v_b: tuple
    step: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_mlp(layer_sizes, seed) -> MlpModel:
    """Fresh model; uniform weights scaled by 1/sqrt(fan_in), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 3:
        raise ValueError(f"need at least one hidden layer, got sizes {sizes}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    rng = seed if isinstance(seed, np.random.Generator) else sub_rng(int(seed), 0)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))


def _check_input(model: MlpModel, x) -> tuple:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.dim_in:
        raise ValueError(
            f"input shape {x.shape} incompatible with network input size {model.dim_in}"
        )
    return x, single


def mlp_forward(model: MlpModel, x) -> np.ndarray:
    """Evaluate the network on a point (d_in,) or a batch (n, d_in)."""
    a, single = _check_input(model, x)
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ W + b)
    out = a @ model.weights[-1] + model.biases[-1]
    return out[0] if single else out


def mlp_loss_grad(model: MlpModel, inputs, targets, weights) -> tuple:
    """Weighted MSE loss and its exact gradients.

    loss = mean_i w_i ||target_i - net(input_i)||^2; returns (loss, MlpGrads).
    """
    x, _ = _check_input(model, inputs)
    targets = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = x.shape[0]
    if targets.shape != (n, model.dim_out):
        raise ValueError(f"targets shape {targets.shape} != {(n, model.dim_out)}")
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} != {(n,)}")

    acts = [x]
    a = x
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ W + b)
        acts.append(a)
    y = a @ model.weights[-1] + model.biases[-1]

    resid = y - targets
    loss = float(np.mean(w * np.sum(resid**2, axis=1)))

    delta = (2.0 / n) * w[:, None] * resid
    n_layers = len(model.weights)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        d_w[layer] = acts[layer].T @ delta
        d_b[layer] = delta.sum(axis=0)
        if layer > 0:
            # tanh'(z) expressed through the stored activation
            delta = (delta @ model.weights[layer].T) * (1.0 - acts[layer] ** 2)
    return loss, MlpGrads(weights=tuple(d_w), biases=tuple(d_b))


def init_adam(model: MlpModel, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m_w=tuple(np.zeros_like(W) for W in model.weights),
        v_w=tuple(np.zeros_like(W) for W in model.weights),
        m_b=tuple(np.zeros_like(b) for b in model.biases),
        v_b=tuple(np.zeros_like(b) for b in model.biases),
        step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(model: MlpModel, grads: MlpGrads, state: AdamState) -> tuple:
    """One Adam update with bias correction; returns (model, state) as new values."""
    if len(grads.weights) != len(model.weights):
        raise ValueError("gradient structure does not match the model")
    step = state.step + 1
    c1 = 1.0 - state.beta1**step
    c2 = 1.0 - state.beta2**step
    new_w, new_b = [], []
    m_w, v_w, m_b, v_b = [], [], [], []
    for W, b, dW, db, mW, vW, mb, vb in zip(
        model.weights, model.biases, grads.weights, grads.biases,
        state.m_w, state.v_w, state.m_b, state.v_b,
    ):
        if dW.shape != W.shape or db.shape != b.shape:
            raise ValueError("gradient shapes do not match the model")
        mW = state.beta1 * mW + (1.0 - state.beta1) * dW
        vW = state.beta2 * vW + (1.0 - state.beta2) * dW**2
        new_w.append(W - state.lr * (mW / c1) / (np.sqrt(vW / c2) + state.eps))
        m_w.append(mW)
        v_w.append(vW)
        mb = state.beta1 * mb + (1.0 - state.beta1) * db
        vb = state.beta2 * vb + (1.0 - state.beta2) * db**2
        new_b.append(b - state.lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps))
        m_b.append(mb)
        v_b.append(vb)
    model = MlpModel(model.layer_sizes, tuple(new_w), tuple(new_b))
    state = AdamState(tuple(m_w), tuple(v_w), tuple(m_b), tuple(v_b), step,
                      state.lr, state.beta1, state.beta2, state.eps)
    return model, state


def param_count(model: MlpModel) -> int:
    return sum(W.size + b.size for W, b in zip(model.weights, model.biases))


def save_checkpoint(model: MlpModel, path, **meta) -> None:
    """Write the model as JSON: layer sizes plus row-major parameter arrays.

    Extra keyword metadata (e.g. target_kind) is stored under "meta".
    """
    doc = {
        "layer_sizes": list(model.layer_sizes),
        "weights": [W.ravel(order="C").tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "meta": meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> tuple:
    """Load a checkpoint, validating shapes; returns (model, meta)."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        flat_w = doc["weights"]
        flat_b = doc["biases"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed checkpoint {path}: {exc}") from exc
    n_layers = len(sizes) - 1
    if len(flat_w) != n_layers or len(flat_b) != n_layers:
        raise ValueError(
            f"checkpoint {path}: expected {n_layers} layers, "
            f"got {len(flat_w)} weight and {len(flat_b)} bias arrays"
        )
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        W = np.asarray(flat_w[i], dtype=float)
        b = np.asarray(flat_b[i], dtype=float)
        if W.size != fan_in * fan_out or b.size != fan_out:
            raise ValueError(
                f"checkpoint {path}: layer {i} arrays do not match sizes "
                f"({fan_in}x{fan_out})"
            )
        weights.append(W.reshape(fan_in, fan_out, order="C"))
        biases.append(b)
    model = MlpModel(sizes, tuple(weights), tuple(biases))
    if not all(np.isfinite(W).all() for W in weights):
        raise ValueError(f"checkpoint {path}: non-finite parameters")
    return model, doc.get("meta", {})
