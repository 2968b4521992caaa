"""Figure rendering for run reports.

Every report path that writes delimited output also renders a small set of
matplotlib figures next to it (PNG, Agg backend, no display required).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_field(field, path: str, title: str = "") -> str:
    g = field.grid
    fig, ax = plt.subplots(figsize=(7, 3))
    im = ax.pcolormesh(g.x, g.y, field.values, shading="auto", cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label="u")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def fig_series(series, columns, path: str, logy: bool = False, title: str = "") -> str:
    t = series.column("t")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for col in columns:
        ax.plot(t, series.column(col), label=col)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def fig_crest(times, y, c_matrix, path: str, label: str = "c(t, y)") -> str:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    im = ax.pcolormesh(y, times, np.asarray(c_matrix), shading="auto", cmap="viridis")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("t")
    return _save(fig, path)


def fig_eigenvalue_curve(etas, lams, residuals, path: str) -> str:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].plot(etas, np.real(lams), label="Re")
    axes[0].plot(etas, np.imag(lams), label="Im")
    axes[0].set_xlabel("eta")
    axes[0].set_ylabel("lambda")
    axes[0].legend(fontsize=8)
    axes[0].grid(alpha=0.3)
    axes[1].semilogy(etas, residuals)
    axes[1].set_xlabel("eta")
    axes[1].set_ylabel("weighted residual")
    axes[1].grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
