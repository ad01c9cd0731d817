"""Figures written next to CSV tables (Agg backend, no timestamps in metadata)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reports import atomic_write  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=_META)
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def line_plot(path, x, ys: dict, xlabel: str, ylabel: str, logx=False, logy=False, title=None):
    """One or more curves against a shared x axis."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", ms=3, label=label)
    ax.set_xscale("log" if logx else "linear")
    ax.set_yscale("log" if logy else "linear")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ys) > 1:
        ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def spectrum_plot(path, values, title=None):
    v = np.asarray(values, float)
    k = np.arange(1, len(v) + 1)
    keep = v > 0
    return line_plot(path, k[keep], {"s_k / s_1": v[keep] / v[0]}, "k", "s_k / s_1",
                     logx=True, logy=True, title=title)


def points_plot(path, points, labels, title=None):
    """Scatter of classified sample points (first two coordinates)."""
    pts = np.atleast_2d(np.asarray(points, float))
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for lab in sorted(set(labels)):
        sel = np.array([x == lab for x in labels])
        ax.scatter(pts[sel, 0], pts[sel, 1] if pts.shape[1] > 1 else np.zeros(sel.sum()), s=12, label=lab)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
