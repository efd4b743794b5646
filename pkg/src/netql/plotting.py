"""Static figures for sweeps and single runs (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_heatmaps", "plot_boundary", "plot_histogram", "plot_trajectory"]


def plot_heatmaps(result, path) -> None:
    """One panel per N: divergence proportion over (p, T)."""
    Ns = sorted({c.N for c in result.cells})
    fig, axes = plt.subplots(1, len(Ns), figsize=(4 * len(Ns), 3.5), squeeze=False)
    for ax, N in zip(axes[0], Ns):
        cells = [c for c in result.cells if c.N == N]
        Ts = sorted({c.T for c in cells})
        ps = sorted({c.p for c in cells})
        grid = np.zeros((len(Ts), len(ps)))
        counts = np.zeros_like(grid)
        for c in cells:
            i, j = Ts.index(c.T), ps.index(c.p)
            grid[i, j] += c.proportion
            counts[i, j] += 1
        grid /= np.maximum(counts, 1)
        im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0, vmax=1, cmap="viridis",
                       extent=[ps[0], ps[-1], Ts[0], Ts[-1]])
        ax.set_title(f"N = {N}")
        ax.set_xlabel("p")
        ax.set_ylabel("T")
    fig.colorbar(im, ax=axes[0].tolist(), label="proportion diverged")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_boundary(result, path) -> None:
    """Smallest all-converged T against p, one line per N."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for N in sorted({r[0] for r in result.rows}):
        rows = sorted((p, t) for n, p, _, t in result.rows if n == N)
        ax.plot([p for p, _ in rows], [np.nan if t is None else t for _, t in rows], marker="o", label=f"N = {N}")
    ax.set_xlabel("p")
    ax.set_ylabel("min T (all converged)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_histogram(result, path, bins: int = 30) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for p, vals in zip(result.p_within, result.by_community()):
        ax.hist(vals, bins=bins, range=(0, 1), histtype="step", label=f"p = {p:g}")
    ax.set_xlabel("max strategy variation (tail)")
    ax.set_ylabel("count")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trajectory(traj, path) -> None:
    """Action probabilities over time, one panel per agent (capped at 6)."""
    n_agents = len(traj.offsets) - 1
    shown = min(n_agents, 6)
    fig, axes = plt.subplots(shown, 1, figsize=(6, 1.6 * shown + 0.5), sharex=True, squeeze=False)
    for k in range(shown):
        ax = axes[k, 0]
        a, b = traj.offsets[k], traj.offsets[k + 1]
        for j in range(a, b):
            ax.plot(traj.steps, traj.strategies[:, j], lw=0.8, label=f"a{j - a}")
        ax.set_ylim(0, 1)
        ax.set_ylabel(f"x_{k}")
    axes[0, 0].legend(loc="upper right", fontsize="small", ncol=3)
    axes[-1, 0].set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
