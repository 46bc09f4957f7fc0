"""Static matplotlib figures written next to the CSV outputs."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

ACC_COLOR = "tab:orange"
F1_COLOR = "tab:blue"


def new_figure(width: float = 6.0, height: float | None = None):
    golden = (math.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height or width * golden))
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return fig, ax


def save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_report(report, path, title: str = "") -> None:
    rows = [(name, s) for name, s in report.rows() if s is not None]
    fig, ax = new_figure()
    xs = range(len(rows))
    w = 0.38
    ax.bar([x - w / 2 for x in xs], [100 * s.acc for _, s in rows], w, color=ACC_COLOR, label="Acc/Rec")
    ax.bar([x + w / 2 for x in xs], [100 * s.f1 for _, s in rows], w, color=F1_COLOR, label="F1")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([name for name, _ in rows])
    ax.set_ylim(0, 100)
    ax.set_ylabel("score (%)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    save(fig, path)


def plot_sweep(values, acc, f1, param: str, path) -> None:
    fig, ax = new_figure()
    ax.plot(values, [100 * a for a in acc], "o-", color=ACC_COLOR, label="overall Acc")
    ax.plot(values, [100 * f for f in f1], "s-", color=F1_COLOR, label="overall F1")
    ax.set_xlabel(param)
    ax.set_ylabel("score (%)")
    ax.legend(frameon=False)
    save(fig, path)


def plot_projection(xy, labels, path, highlight=()) -> None:
    fig, ax = new_figure(6.0, 6.0)
    for name in sorted(set(labels)):
        pts = [p for p, lab in zip(xy, labels) if lab == name]
        marker = "^" if name in highlight else "o"
        ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=10, marker=marker, label=name, alpha=0.8)
    ax.legend(frameon=False, fontsize=8, markerscale=1.5)
    ax.set_xticks([])
    ax.set_yticks([])
    save(fig, path)


def plot_loss(trace, path) -> None:
    fig, ax = new_figure()
    ax.plot(range(1, len(trace) + 1), trace, color=F1_COLOR)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    save(fig, path)
