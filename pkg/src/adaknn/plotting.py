"""SVG figures for reports. Rendering is deterministic: fixed hash salt, no date stamp."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "adaknn", "svg.fonttype": "none", "font.size": 9}
_META = {"Date": None, "Creator": "adaknn"}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_rates(reports, path, title: str = "MSE against n") -> None:
    """Log-log MSE curves with standard-error bars and the fitted slope in the legend."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for rep in reports:
            n = np.array([r.n for r in rep.rows], dtype=float)
            m = np.array([r.mse for r in rep.rows])
            se = np.array([r.mse_stderr for r in rep.rows])
            if np.any(m <= 0):
                continue
            ax.errorbar(n, m, yerr=se, marker="o", ms=3, capsize=2,
                        label=f"{rep.label} (slope {rep.slope:.3f})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("MSE")
        ax.set_title(title)
        if ax.lines:
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_floor(probe, path, mse_rows=None) -> None:
    """Probe floor estimate against n, optionally with a k-NN MSE curve for comparison."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        rows = probe.usable()
        if rows:
            ax.plot([r.n for r in rows], [r.floor_estimate for r in rows], "s-", ms=3,
                    label="floor estimate")
        if mse_rows:
            ax.plot([r.n for r in mse_rows], [r.mse for r in mse_rows], "o-", ms=3, label="k-NN MSE")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("squared error")
        ax.set_title("minimax floor estimate")
        if ax.lines:
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_dimension_histogram(d_hats, path) -> None:
    d = np.asarray([v for v in d_hats if np.isfinite(v)], dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        if d.size:
            ax.hist(d, bins=min(30, max(5, d.size // 5)))
        ax.set_xlabel("local dimension estimate")
        ax.set_ylabel("count")
        fig.tight_layout()
        _save(fig, path)
