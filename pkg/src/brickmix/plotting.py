"""Figures written next to the CLI's delimited reports."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.5,
    "savefig.dpi": 120,
}


def _figure(width: float = 5.0):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, width * golden))


def _save(fig, path):
    fig.tight_layout()
    # no software or date tags, so reruns give identical bytes
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_mixing(curve, path, title: str = ""):
    """Worst-start TV against rounds on a log scale, with the gap envelope."""
    with plt.rc_context(_RC):
        fig, ax = _figure()
        t = np.asarray(curve.t)
        eps = np.maximum(np.asarray(curve.epsilon), 1e-300)
        ax.semilogy(t, eps, marker="o", markersize=3, label="exact epsilon(t)")
        ax.semilogy(t, curve.envelope, linestyle="--", label=f"envelope, gap={curve.gap:.4g}")
        ax.set_xlabel("t")
        ax.set_ylabel("TV to uniform on distinct tuples")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_kwise(report, path, title: str = ""):
    """Histogram of per-start TV values."""
    with plt.rc_context(_RC):
        fig, ax = _figure()
        tv = np.asarray([float(v) for v in report.tv])
        weights = None if report.weights is None else np.asarray(report.weights, dtype=float)
        ax.hist(tv, bins=min(40, max(1, len(np.unique(tv)))), weights=weights, color="0.4")
        ax.axvline(float(report.epsilon), color="C3", linestyle="--", label="epsilon (max)")
        ax.set_xlabel("TV of start row to uniform")
        ax.set_ylabel("starts")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_collision(stats, path):
    """Witness-row distance distribution with Hoeffding intervals against the exact pmf."""
    rows = [r for r in stats.rows if r["quantity"] == "distance_pmf" and r["pair"] == "1-2"]
    with plt.rc_context(_RC):
        fig, ax = _figure()
        d = np.array([r["value"] for r in rows])
        est = np.array([r["estimate"] for r in rows])
        lo = est - np.array([r["ci_lo"] for r in rows])
        hi = np.array([r["ci_hi"] for r in rows]) - est
        ax.errorbar(d, est, yerr=[lo, hi], fmt="o", capsize=3, label="simulated")
        ax.plot(d, [r["exact"] for r in rows], "x", color="C3", label="uniform distinct pair")
        ax.set_xlabel("Hamming distance of the witness rows")
        ax.set_ylabel("probability")
        ax.set_title(f"side={stats.side}, k={stats.k}, trials={stats.trials}")
        ax.legend(frameon=False)
        _save(fig, path)
