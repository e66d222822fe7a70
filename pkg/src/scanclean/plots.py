"""Figure rendering for CLI reports.

Every report-producing command saves a PNG next to its delimited output.
Headless by design: the Agg backend is forced before pyplot loads.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_LABEL_CMAP = "tab20"


def save_depth_image(depth: np.ndarray, path, title="range image") -> None:
    fig, ax = plt.subplots(figsize=(14, 3.2))
    shown = np.ma.masked_where(depth <= 0, depth)
    im = ax.imshow(shown, aspect="auto", cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="depth [m]", pad=0.01)
    ax.set_title(title)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("ring")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_label_image(labels: np.ndarray, path, title="cluster labels") -> None:
    fig, ax = plt.subplots(figsize=(14, 3.2))
    # Scramble ids so neighboring clusters get distinct colors.
    lab64 = labels.astype(np.int64)
    scrambled = np.where(lab64 > 0, (lab64 * 2654435761) % 20 + 1, 0)
    shown = np.ma.masked_where(labels <= 0, scrambled)
    ax.imshow(shown, aspect="auto", cmap=_LABEL_CMAP, interpolation="nearest", vmin=1, vmax=20)
    ax.set_title(title)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("ring")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_mask_image(mask: np.ndarray, path, title="mask") -> None:
    fig, ax = plt.subplots(figsize=(14, 3.2))
    ax.imshow(mask, aspect="auto", cmap="gray", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("ring")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_mu_trace(frame_ids, mus, path, beta0s=None) -> None:
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(frame_ids, mus, lw=1.2, color="tab:blue", label="degeneration degree")
    ax.set_xlabel("frame")
    ax.set_ylabel("mu")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    if beta0s is not None:
        ax2 = ax.twinx()
        ax2.plot(frame_ids, beta0s, lw=1.0, color="tab:orange", label="mapped threshold")
        ax2.set_ylabel("threshold [deg]")
    ax.set_title("per-frame degeneration")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_rpe_plot(trans_errors, path, rot_errors=None) -> None:
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(trans_errors, lw=1.0, color="tab:blue")
    ax.set_xlabel("frame")
    ax.set_ylabel("translational RPE [m]")
    ax.grid(alpha=0.3)
    if rot_errors is not None:
        ax2 = ax.twinx()
        ax2.plot(np.degrees(rot_errors), lw=0.8, color="tab:red", alpha=0.7)
        ax2.set_ylabel("rotational RPE [deg]")
    ax.set_title("relative pose error")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_iou_hist(ious, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(ious, bins=np.linspace(0, 1, 21), color="tab:blue", edgecolor="white")
    ax.axvline(0.5, color="tab:red", ls="--", lw=1, label="0.5")
    ax.set_xlabel("per-box IoU")
    ax.set_ylabel("boxes")
    ax.legend()
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def save_latency_bars(stage_names, p50_ms, p95_ms, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.8))
    pos = np.arange(len(stage_names))
    ax.bar(pos - 0.2, p50_ms, width=0.4, label="p50", color="tab:blue")
    ax.bar(pos + 0.2, p95_ms, width=0.4, label="p95", color="tab:orange")
    ax.set_xticks(pos, stage_names, rotation=30, ha="right")
    ax.set_ylabel("latency [ms]")
    ax.legend()
    ax.set_title("per-stage latency")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
