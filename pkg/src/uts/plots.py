"""matplotlib renderings of the loss log and attention maps (written to files, never shown)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_losses(rows: list[dict[str, float]], path, columns=("l_abs", "l_ext", "l_inc", "total")) -> Path:
    epochs = [r["epoch"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    for c in columns:
        if c in rows[0] and c != "l_inc":
            axes[0].plot(epochs, [r[c] for r in rows], marker=".", label=c)
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("loss")
    axes[0].legend(frameon=False, fontsize=8)
    axes[1].plot(epochs, [r["l_inc"] for r in rows], marker=".", color="C3", label="l_inc")
    if "consistency" in rows[0]:
        axes[1].plot(epochs, [r["consistency"] for r in rows], marker=".", color="C4", label="word/event")
    axes[1].set_xlabel("epoch")
    axes[1].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_time_attention(pi: np.ndarray, tokens: list[str], path, title: str = "") -> Path:
    """Heatmap of pi with decode steps on the x axis and events on the y axis."""
    fig, ax = plt.subplots(figsize=(max(4, 0.3 * len(pi) + 1.5), 0.4 * pi.shape[1] + 1.5))
    im = ax.imshow(pi.T, aspect="auto", cmap="Blues", vmin=0.0, vmax=1.0, origin="lower")
    ax.set_xticks(range(len(tokens)))
    ax.set_xticklabels(tokens, rotation=90, fontsize=7)
    ax.set_ylabel("event")
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.04)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_two_level(dump: dict, step: int, path, max_words: int = 11) -> Path:
    """Event attention at one step above the word attention of the first three events."""
    beta = dump["beta"][step]
    alpha = dump["alpha"][step]
    n_show = min(3, len(beta))
    fig, axes = plt.subplots(1 + n_show, 1, figsize=(5, 1.2 * (1 + n_show)))
    axes = np.atleast_1d(axes)
    axes[0].imshow(beta[None, :], aspect="auto", cmap="Reds", vmin=0.0)
    axes[0].set_yticks([])
    axes[0].set_xticks(range(len(beta)))
    axes[0].set_title(f"step {step}: {dump['tokens'][step]}", fontsize=9)
    for e in range(n_show):
        n = min(dump["event_lengths"][e], max_words)
        ax = axes[1 + e]
        ax.imshow(alpha[e, :n][None, :], aspect="auto", cmap="Blues", vmin=0.0)
        ax.set_yticks([])
        ax.set_xticks(range(n))
        ax.set_xticklabels(dump["words"][e][:n], rotation=45, fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
