"""Figures for metric logs: test accuracy and number of correct labels."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}


def _finetune_start(records):
    for r in records:
        if r.stage == "finetune":
            return r.epoch
    return None


def _draw(ax_acc, ax_lab, records, n_train, label, color):
    epochs = [r.epoch for r in records]
    ax_acc.plot(epochs, [100.0 * r.mean_acc for r in records], color=color, lw=1.2, label=label)
    if n_train and all(r.label_acc is not None for r in records):
        ax_lab.plot(epochs, [r.label_acc * n_train for r in records], color=color, lw=1.2, label=label)
    for r in records:
        if r.retrained:
            ax_acc.axvline(r.epoch, color=color, ls=":", lw=0.8)


def plot_runs(runs: dict, path, n_train=None, title=None):
    """Two panels, one curve per run: mean test accuracy (%) and the number
    of correct training labels. Restarts are dotted verticals."""
    with plt.rc_context(STYLE):
        fig, (ax_acc, ax_lab) = plt.subplots(1, 2, figsize=(9, 3.4))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i, (name, records) in enumerate(runs.items()):
            if records:
                _draw(ax_acc, ax_lab, records, n_train, name, colors[i % len(colors)])
        first = next((r for r in runs.values() if r), None)
        start = _finetune_start(first) if first else None
        for ax in (ax_acc, ax_lab):
            if start is not None:
                ax.axvspan(start - 0.5, first[-1].epoch + 0.5, color="0.92", zorder=0)
            ax.set_xlabel("epoch")
        ax_acc.set_ylabel("test accuracy (%)")
        ax_lab.set_ylabel("number of correct labels")
        ax_acc.legend(loc="lower right", frameon=False)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
