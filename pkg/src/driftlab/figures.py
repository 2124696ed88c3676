"""Matplotlib renderings of the run artifacts, written next to the CSVs.

Every function returns the saved path.  Rendering is file-only (Agg); the
CSVs remain the primary machine-readable output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_samples",
    "plot_snapshots",
    "plot_error_curves",
    "plot_loss_trace",
    "plot_lambda_fit",
    "plot_sample_grid",
]

_SCATTER = dict(s=4, alpha=0.35, linewidths=0, color="tab:blue")


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _scatter_panel(ax, samples, overlay=None, title=""):
    samples = np.atleast_2d(samples)
    ax.scatter(samples[:, 0], samples[:, 1], **_SCATTER)
    if overlay is not None:
        overlay = np.atleast_2d(overlay)
        ax.scatter(overlay[:, 0], overlay[:, 1], s=28, marker="x", color="tab:red")
    ax.set_title(title, fontsize=9)
    ax.set_aspect("equal", adjustable="datalim")


def plot_samples(path, samples, overlay=None, title="") -> Path:
    """Scatter of a 2-d sample batch, optionally with target atoms marked."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    _scatter_panel(ax, samples, overlay, title)
    return _save(fig, path)


def plot_snapshots(path, snapshots, overlay=None) -> Path:
    """Row of scatters, one per (time, batch) pair, latest time first."""
    items = sorted(snapshots.items(), key=lambda kv: -kv[0])
    fig, axes = plt.subplots(1, len(items), figsize=(2.6 * len(items), 2.9))
    axes = np.atleast_1d(axes)
    for ax, (t, batch) in zip(axes, items):
        _scatter_panel(ax, batch, overlay, title=f"t = {t:g}")
    return _save(fig, path)


def plot_error_curves(path, curves, ylabel="error", logx=True, logy=True) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for curve in curves:
        ax.plot(curve.times, curve.values, marker=".", lw=1.2, label=curve.label or None)
    if logx:
        ax.set_xscale("log")
    if logy and all((c.values > 0).all() for c in curves):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if any(c.label for c in curves):
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_loss_trace(path, losses) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(np.arange(len(losses)), losses, lw=0.7)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("weighted loss")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_lambda_fit(path, curve, c_fit: float) -> Path:
    """Estimated loss floor vs the fitted C(e^t - 1) shape, log-log."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(curve.times, curve.values, "o", ms=4, label="estimate")
    tt = np.geomspace(curve.times.min(), curve.times.max(), 200)
    ax.plot(tt, c_fit * np.expm1(tt), lw=1.2, label=f"C(e^t - 1), C={c_fit:.3g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("E ||X0 - f(Xt, t)||^2")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_sample_grid(path, batches, overlay=None) -> Path:
    """Row of scatters for labelled batches, e.g. one per sweep value."""
    items = list(batches.items())
    fig, axes = plt.subplots(1, len(items), figsize=(3.0 * len(items), 3.2))
    axes = np.atleast_1d(axes)
    for ax, (label, batch) in zip(axes, items):
        _scatter_panel(ax, batch, overlay, title=str(label))
    return _save(fig, path)
