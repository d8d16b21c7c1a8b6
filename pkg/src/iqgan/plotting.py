"""Figures written next to the CSV reports.  Headless (Agg) only."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}
# fixed metadata keeps PNG bytes stable across reruns
_PNG_META = {"Software": None}


def _figure(width=3.4, ratio=0.75):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, width * ratio))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_convergence(curves, path, title=None):
    """``curves`` maps a label to a list of TrainRecord."""
    fig, ax = _figure()
    for label, records in curves.items():
        ax.plot([r.epoch + 1 for r in records], [r.fidelity for r in records], marker="o",
                markersize=2.5, linewidth=1.2, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("fidelity")
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(frameon=False)
    _save(fig, path)


def plot_objective_trace(trace, path):
    fig, ax = _figure()
    ax.plot(np.arange(len(trace)), trace, linewidth=1.2)
    ax.set_xlabel("pretraining step")
    ax.set_ylabel("ensemble separation")
    _save(fig, path)


def plot_ablation(rows, path):
    fig, ax = _figure(width=3.8)
    labels = [r.ansatz.value.replace("NO_ENTANGLER", "w/o 2Q") for r in rows]
    x = np.arange(len(rows))
    ax.bar(x, [r.mean_fidelity for r in rows], yerr=[r.stddev for r in rows], capsize=3,
           color="0.6", edgecolor="0.2", linewidth=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel("final fidelity")
    lo = min(r.mean_fidelity - r.stddev for r in rows)
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    _save(fig, path)


def plot_noise_sweep(rows, path, noise=None):
    fig, ax = _figure()
    ns = [r.n for r in rows]
    ax.errorbar(ns, [r.fidelity for r in rows], yerr=[r.stderr for r in rows], marker="s",
                markersize=3, capsize=3, linewidth=1.2, label="noisy")
    ax.plot(ns, [r.noiseless for r in rows], linestyle="--", linewidth=1, color="0.4",
            label="noiseless")
    ax.set_xticks(ns)
    ax.set_xticklabels([f"1x{n}" for n in ns])
    ax.set_xlabel("input size")
    ax.set_ylabel("fidelity")
    if noise is not None:
        ax.set_title(f"p_bit={noise.p_bit:g}, p_phase={noise.p_phase:g}")
    ax.legend(frameon=False)
    _save(fig, path)


def save_image_png(image, path):
    plt.imsave(path, np.clip(image, 0, 1), cmap="gray", vmin=0.0, vmax=1.0, metadata=_PNG_META)
