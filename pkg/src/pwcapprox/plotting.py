"""Figures written next to the CSV outputs of ``study`` and ``sample``."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_study(rows, path, title=None):
    """Log-log plot of sampled error and the 2.5 kappa delta bound."""
    delta = np.array([r.delta for r in rows])
    err = np.array([r.max_error for r in rows])
    bound = np.array([r.bound for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(delta, bound, "k--", label="bound 2.5 kappa delta")
    ax.loglog(delta, np.maximum(err, np.finfo(float).tiny), "o-", label="sampled max error")
    ax.set_xlabel("delta")
    ax.set_ylabel("max |f - p|")
    if title:
        ax.set_title(title)
    ax.legend()
    _finish(fig, path)


def plot_samples(points, values, winners, path, target=None, title=None):
    """Model values over a sample grid: a curve for one variable, a filled
    contour for two.  Higher dimensions are not drawn."""
    points = np.asarray(points)
    n = points.shape[1]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if n == 1:
        x = points[:, 0]
        if target is not None:
            ax.plot(x, target, color="0.6", lw=2, label="f")
        w = np.asarray(winners).reshape(len(x), -1)[:, 0]
        breaks = np.flatnonzero(np.diff(w)) + 1
        for seg in np.split(np.arange(len(x)), breaks):
            ax.plot(x[seg], values[seg], lw=1)
        ax.set_xlabel("x1")
        ax.set_ylabel("p(x)")
        if target is not None:
            ax.legend()
    elif n == 2:
        xs = np.unique(points[:, 0])
        ys = np.unique(points[:, 1])
        Z = np.asarray(values).reshape(len(xs), len(ys))
        cs = ax.contourf(xs, ys, Z.T, levels=30)
        fig.colorbar(cs, ax=ax)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        plt.close(fig)
        raise ValueError(f"cannot draw a {n}-dimensional model")
    if title:
        ax.set_title(title)
    _finish(fig, path)
