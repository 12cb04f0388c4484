"""Figures and tables for a finished run: confusion heatmap, loss and learning-rate curves."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .data.metrics import EvalReport  # noqa: E402
from .train import TrainHistory  # noqa: E402


def plot_confusion(report: EvalReport, path) -> Path:
    cm = report.confusion
    names = report.names()
    k = len(names)
    size = max(4.0, 0.45 * k + 2.5)
    fig, ax = plt.subplots(figsize=(size, size))
    ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(k), names, rotation=60, ha="right", fontsize=8)
    ax.set_yticks(range(k), names, fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    top = cm.max() if cm.size else 0
    for i in range(k):
        for j in range(k):
            if cm[i, j]:
                color = "white" if cm[i, j] > 0.6 * top else "black"
                ax.text(j, i, str(int(cm[i, j])), ha="center", va="center", fontsize=7, color=color)
    ax.set_title(f"acc {report.accuracy:.2f}  mf1 {report.mf1:.4f}  wf1 {report.wf1:.4f}", fontsize=9)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_history(history: TrainHistory, path) -> Path:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.plot(history.epochs, history.train_loss, label="train")
    ax1.plot(history.epochs, history.val_loss, label="validation")
    if history.best_epoch:
        ax1.axvline(history.best_epoch, color="grey", ls=":", lw=1)
    ax1.set_ylabel("cross-entropy")
    ax1.legend(fontsize=8)
    ax2.semilogy(history.epochs, history.lr)
    ax2.set_ylabel("learning rate")
    ax2.set_xlabel("epoch")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def per_class_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "support", "precision", "recall", "f1"])
    for name, s, p, r, f in zip(report.names(), report.support, report.precision, report.recall, report.f1):
        w.writerow([name, int(s), f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])
    return buf.getvalue()


def summary_lines(report: EvalReport, history: TrainHistory | None) -> list[str]:
    lines = [f"acc={report.accuracy:.4f}", f"mf1={report.mf1:.6f}", f"wf1={report.wf1:.6f}"]
    if history is not None and len(history):
        i = int(np.argmin(history.val_loss))
        lines += [f"epochs={len(history)}", f"best_epoch={history.epochs[i]}",
                  f"best_val_loss={history.val_loss[i]:.6f}", f"final_lr={history.lr[-1]:.6g}"]
    return lines
