"""Figure rendering for report modes.

Each function takes the already-aggregated table rows from reports and
writes one PNG next to the delimited outputs.  The Agg backend is forced so
rendering works in headless environments.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _group_rows(rows, key_pos=0):
    groups = {}
    for row in rows:
        groups.setdefault(row[key_pos], []).append(row)
    return groups


def plot_curves(rows, out_path) -> None:
    """Mean accuracy vs labeled-set size, one line (with band) per run."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, block in _group_rows(rows).items():
        sizes = np.array([r[2] for r in block], dtype=float)
        mean = np.array([r[3] for r in block])
        err = np.array([r[4] for r in block])
        ax.plot(sizes, mean, marker="o", markersize=3, label=name)
        ax.fill_between(sizes, mean - err, mean + err, alpha=0.2)
    ax.set_xlabel("labeled instances")
    ax.set_ylabel("eval accuracy")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_relative(rows, out_path) -> None:
    """Accuracy delta against the random baseline, per cycle."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, block in _group_rows(rows).items():
        cycles = np.array([r[1] for r in block], dtype=float)
        mean = np.array([r[2] for r in block])
        err = np.array([r[3] for r in block])
        ax.plot(cycles, mean, marker="o", markersize=3, label=name)
        ax.fill_between(cycles, mean - err, mean + err, alpha=0.2)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("cycle")
    ax.set_ylabel("accuracy delta vs random")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_aulc(rows, out_path) -> None:
    """Grouped bars: one cluster per regime, one bar per run."""
    groups = _group_rows(rows)
    names = list(groups)
    regimes = []
    for block in groups.values():
        for r in block:
            if r[1] not in regimes:
                regimes.append(r[1])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / max(len(names), 1)
    base = np.arange(len(regimes), dtype=float)
    for i, name in enumerate(names):
        by_regime = {r[1]: r for r in groups[name]}
        xs, means, errs = [], [], []
        for j, regime in enumerate(regimes):
            if regime in by_regime:
                xs.append(base[j] + i * width)
                means.append(by_regime[regime][2])
                errs.append(by_regime[regime][3])
        ax.bar(xs, means, width=width, yerr=errs, capsize=3, label=name)
    ax.set_xticks(base + width * (len(names) - 1) / 2)
    ax.set_xticklabels(regimes)
    ax.set_ylabel("mean accuracy over window")
    ax.grid(alpha=0.3, axis="y")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_picks(rows, out_path) -> None:
    """Stacked pick-frequency bars per cycle, one panel per run."""
    groups = _group_rows(rows)
    n = len(groups)
    fig, axes = plt.subplots(n, 1, figsize=(7, 3.2 * n), squeeze=False)
    for ax, (name, block) in zip(axes[:, 0], groups.items()):
        cycles = sorted({r[1] for r in block})
        strategies = []
        for r in block:
            if r[2] not in strategies:
                strategies.append(r[2])
        freq = np.zeros((len(cycles), len(strategies)))
        c_index = {c: i for i, c in enumerate(cycles)}
        s_index = {s: i for i, s in enumerate(strategies)}
        for r in block:
            freq[c_index[r[1]], s_index[r[2]]] = r[3]
        bottom = np.zeros(len(cycles))
        for s, strategy in enumerate(strategies):
            ax.bar(cycles, freq[:, s], bottom=bottom, label=strategy, width=0.8)
            bottom += freq[:, s]
        ax.set_title(name, fontsize=10)
        ax.set_xlabel("cycle")
        ax.set_ylabel("pick frequency")
        ax.set_ylim(0, 1.02)
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


PLOTTERS = {
    "curves": plot_curves,
    "relative": plot_relative,
    "aulc": plot_aulc,
    "picks": plot_picks,
}
