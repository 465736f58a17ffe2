"""Matplotlib figures for CLI reports.

Needs the ``plot`` extra. Figures are written with a fixed style and no
timestamp metadata, so identical inputs give identical PNG bytes.
"""

from __future__ import annotations

import os

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
FIG_WIDTH = 5.0

RC = {
    "figure.figsize": (FIG_WIDTH, FIG_WIDTH * GOLDEN),
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3.5,
    "svg.hashsalt": "specdim",
}

# PNG metadata that would otherwise embed the matplotlib version
_METADATA = {"Software": None}


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on installed extras
        raise ImportError("plotting needs matplotlib; install with `pip install artifact[plot]`") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="png", metadata=_METADATA)
    return path


def plot_dimension_estimate(estimates, path, title=None):
    """Local slopes against ``eps`` for one or more ``DimensionEstimate`` objects.

    The shaded band is the estimation window of the first estimate.
    """
    plt = _pyplot()
    estimates = list(estimates)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for est in estimates:
            s = est.series
            mid = np.sqrt(s.eps[:-1] * s.eps[1:])
            label = f"{s.kind} q={s.q:g}  reg {est.regression_est:.3f}"
            ax.semilogx(mid, s.local_slopes, "o-", label=label)
        if estimates:
            lo, hi = estimates[0].window
            eps = estimates[0].series.eps
            ax.axvspan(eps[hi], eps[lo], color="0.85", zorder=0)
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("local slope")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_dynamics(results, path, title=None):
    """Log-log trajectories of ``DynamicsResult`` objects with the fit window shaded."""
    plt = _pyplot()
    results = list(results)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for res in results:
            label = f"{res.quantity}  reg {res.regression_exponent:.3f}"
            ax.loglog(res.times, res.values, "o-", label=label)
        if results and results[0].window is not None:
            lo, hi = results[0].window
            ax.axvspan(results[0].times[lo], results[0].times[hi], color="0.85", zorder=0)
        ax.set_xlabel("t")
        ax.set_ylabel("time average")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out


def plot_spectral_measure(m, path, title=None):
    """Stem plot of atom weights (log scale)."""
    plt = _pyplot()
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.vlines(m.atoms, np.min(m.weights) * 0.5, m.weights, lw=0.6)
        ax.set_yscale("log")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel("weight")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out
