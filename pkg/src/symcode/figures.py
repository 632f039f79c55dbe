"""Report figures rendered to files next to the machine-readable outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_KIND_ORDER = ("discrete", "nfold", "continuous", "none")


def classification_figure(classification, path, threshold: float = None) -> None:
    """Class counts and the per-vertex error histogram."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))

    counts = classification.counts()
    kinds = [k for k in _KIND_ORDER if k in counts]
    ax1.bar(kinds, [counts[k] for k in kinds], color="#4878a8")
    ax1.set_ylabel("vertices")
    ax1.set_title("symmetry classes")

    errs = np.asarray(classification.errors, dtype=float)
    errs = errs[np.isfinite(errs)]
    if errs.size:
        # log-scale bins; collapse exact zeros into the first bin
        positive = errs[errs > 0]
        if positive.size:
            lo = max(positive.min() / 10, 1e-12)
            bins = np.logspace(np.log10(lo), np.log10(errs.max() + 1e-12), 32)
            ax2.hist(np.maximum(errs, lo), bins=bins, color="#a85448")
            ax2.set_xscale("log")
        else:
            ax2.hist(errs, bins=16, color="#a85448")
        if threshold:
            ax2.axvline(threshold, color="k", linestyle="--", linewidth=1,
                        label=f"threshold {threshold:.3g}")
            ax2.legend(fontsize=8)
    ax2.set_xlabel("symmetry error")
    ax2.set_ylabel("vertices")
    ax2.set_title("error distribution")

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def codemap_figure(maps, path) -> None:
    """Code map, masks and depth of one rendered view."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))

    codes = np.ma.masked_less(maps.code_map, 0)
    im = axes[0].imshow(codes, cmap="turbo", interpolation="nearest")
    axes[0].set_title(f"code map (d={maps.d})")
    fig.colorbar(im, ax=axes[0], fraction=0.046)

    overlay = np.zeros(maps.visible.shape + (3,))
    overlay[maps.amodal] = (0.85, 0.55, 0.25)
    overlay[maps.visible] = (0.25, 0.55, 0.85)
    axes[1].imshow(overlay, interpolation="nearest")
    axes[1].set_title("visible over amodal")

    depth = np.ma.masked_less_equal(maps.depth, 0)
    im = axes[2].imshow(depth, cmap="viridis", interpolation="nearest")
    axes[2].set_title("depth")
    fig.colorbar(im, ax=axes[2], fraction=0.046)

    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def eval_figure(ar_tuple, vsd_errors_at_tau, cut: float, path) -> None:
    """AR breakdown bars plus the single-tau VSD error distribution."""
    ar, ar_vsd, ar_mssd, ar_mspd = ar_tuple
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))

    names = ("AR", "AR_VSD", "AR_MSSD", "AR_MSPD")
    values = (ar, ar_vsd, ar_mssd, ar_mspd)
    ax1.bar(names, values, color=("#444444", "#4878a8", "#6a9a58", "#a85448"))
    ax1.set_ylim(0, 1.05)
    ax1.set_title("average recall")
    for i, v in enumerate(values):
        ax1.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)

    errs = np.asarray(list(vsd_errors_at_tau), dtype=float)
    errs = np.clip(errs[np.isfinite(errs)], 0, 1)
    if errs.size:
        ax2.hist(errs, bins=np.linspace(0, 1, 21), color="#4878a8")
    ax2.axvline(cut, color="k", linestyle="--", linewidth=1, label=f"cut {cut}")
    ax2.set_xlabel("VSD error")
    ax2.set_ylabel("instances")
    ax2.set_title("VSD at fixed tau")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
