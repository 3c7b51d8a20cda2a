"""Matplotlib renderings of the report outputs (saved to files, never shown)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .cnn import TrainHistory  # noqa: E402
from .dsp import Psd, idw_interpolate  # noqa: E402
from .recording import LABELS  # noqa: E402

_CLASS_COLORS = {0: "tab:gray", 1: "tab:blue", 2: "tab:red"}


def psd_figure(psd: Psd, path: str | Path, channel: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.semilogy(psd.freqs, psd.power, lw=1.0, color="tab:blue")
    ax.set_xlim(0, min(60.0, psd.freqs[-1]))
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("power (uV$^2$/Hz)")
    title = "Welch power spectral density"
    if channel:
        title += f" - {channel}"
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def evoked_figure(times: np.ndarray, waves_by_channel: dict[str, dict[int, np.ndarray]],
                  path: str | Path) -> None:
    """One panel per channel, one line per class."""
    n = len(waves_by_channel)
    fig, axes = plt.subplots(1, n, figsize=(5.0 * n, 3.4), sharey=True, squeeze=False)
    for ax, (channel, waves) in zip(axes[0], waves_by_channel.items()):
        for label in sorted(waves):
            ax.plot(times, waves[label], lw=1.0, label=LABELS[label],
                    color=_CLASS_COLORS[label])
        ax.axvline(0.0, color="k", lw=0.6, ls="--")
        ax.set_title(channel)
        ax.set_xlabel("time (s)")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("amplitude (uV)")
    axes[0][-1].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def topo_figure(channels: Sequence[str], coords: np.ndarray, values: np.ndarray,
                path: str | Path, title: str = "") -> None:
    """Interpolated head map (inverse-distance weighting on a 64x64 grid
    clipped to the head disc) with electrode positions overlaid."""
    grid, _ = idw_interpolate(values, coords)
    lim = np.nanmax(np.abs(grid))
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    im = ax.imshow(grid, origin="lower", extent=(-1, 1, -1, 1), cmap="RdBu_r",
                   vmin=-lim, vmax=lim)
    ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="k", lw=1.2))
    # nose marker
    ax.plot([-0.08, 0.0, 0.08], [0.99, 1.08, 0.99], color="k", lw=1.2)
    ax.scatter(coords[:, 0], coords[:, 1], s=6, c="k", zorder=3)
    ax.set_xlim(-1.15, 1.15)
    ax.set_ylim(-1.15, 1.15)
    ax.set_aspect("equal")
    ax.axis("off")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.75, label="mean amplitude (uV)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def history_figure(history: TrainHistory, path: str | Path) -> None:
    epochs = np.arange(1, len(history) + 1)
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    ax_acc.plot(epochs, history.train_acc, label="train", color="tab:blue")
    ax_acc.plot(epochs, history.val_acc, label="validation", color="tab:orange")
    ax_acc.axvline(history.best_epoch + 1, color="k", lw=0.6, ls="--")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend(fontsize=8)
    ax_acc.grid(alpha=0.3)
    ax_loss.plot(epochs, history.train_loss, label="train", color="tab:blue")
    ax_loss.plot(epochs, history.val_loss, label="validation", color="tab:orange")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(fontsize=8)
    ax_loss.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
