"""Artifact writers: every delimited output gets a rendered figure next to it.

All writers take an output directory, create it if needed, and return the
list of paths they produced.  Figures are rendered headlessly.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .saliency import top_regions


def _ensure_dir(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _save_figure(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_history(history, out_dir):
    """Loss/LR curves: history.csv plus history.png."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / "history.csv"
    _write_rows(
        csv_path,
        ["epoch", "train_loss", "val_loss", "lr"],
        [[h["epoch"], h["train_loss"], h["val_loss"], h["lr"]] for h in history],
    )

    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(epochs, [h["train_loss"] for h in history], label="train loss")
    ax.plot(epochs, [h["val_loss"] for h in history], label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    twin = ax.twinx()
    twin.plot(epochs, [h["lr"] for h in history], color="gray",
              linestyle="--", label="lr")
    twin.set_ylabel("learning rate")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best")
    png_path = out_dir / "history.png"
    _save_figure(fig, png_path)
    return [csv_path, png_path]


def write_metrics(metrics, out_dir, name="metrics.json"):
    out_dir = _ensure_dir(out_dir)
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path]


def _confusion_matrix(preds, truths, num_classes):
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, t in zip(preds, truths):
        counts[int(t), int(p)] += 1
    return counts


def write_predictions(preds, truths, subject_ids, task, out_dir, num_classes=2):
    """Per-sample predictions: predictions.csv plus eval.png."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / "predictions.csv"
    _write_rows(
        csv_path,
        ["subject_id", "prediction", "target"],
        list(zip(subject_ids, preds, truths)),
    )

    if task == "classification":
        counts = _confusion_matrix(preds, truths, num_classes)
        fig, ax = plt.subplots(figsize=(5, 4.5))
        im = ax.imshow(counts, cmap="Blues")
        for i in range(num_classes):
            for j in range(num_classes):
                ax.text(j, i, str(counts[i, j]), ha="center", va="center")
        ax.set_xlabel("predicted class")
        ax.set_ylabel("true class")
        ax.set_xticks(range(num_classes))
        ax.set_yticks(range(num_classes))
        fig.colorbar(im, ax=ax)
    else:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        ax.scatter(truths, preds, s=18, alpha=0.7)
        lo = min(min(truths), min(preds))
        hi = max(max(truths), max(preds))
        ax.plot([lo, hi], [lo, hi], color="gray", linestyle="--")
        ax.set_xlabel("target")
        ax.set_ylabel("prediction")
        ax.grid(True, alpha=0.3)
    png_path = out_dir / "eval.png"
    _save_figure(fig, png_path)
    return [csv_path, png_path]


def write_saliency(smap, out_dir, top_k=10, stem="saliency"):
    """Saliency table, JSON summary of the top regions, and a bar figure."""
    out_dir = _ensure_dir(out_dir)
    csv_path = out_dir / f"{stem}.csv"
    _write_rows(
        csv_path,
        ["node_label", "raw_score", "normalized_score"],
        [
            [smap.node_labels[i], float(smap.scores[i]), float(smap.normalized[i])]
            for i in range(smap.n_nodes)
        ],
    )

    k = min(top_k, smap.n_nodes)
    summary = {
        "target": smap.target,
        "top_k": [
            {"node_label": label, "score": score}
            for label, score in top_regions(smap, k)
        ],
    }
    json_path = out_dir / f"{stem}.json"
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    fig, ax = plt.subplots(figsize=(max(5.0, 0.3 * smap.n_nodes), 4))
    ax.bar(range(smap.n_nodes), smap.normalized, color="steelblue")
    ax.set_xticks(range(smap.n_nodes))
    ax.set_xticklabels(smap.node_labels, rotation=90, fontsize=7)
    ax.set_ylabel("normalized saliency")
    ax.set_title(f"target: {smap.target}")
    png_path = out_dir / f"{stem}.png"
    _save_figure(fig, png_path)
    return [csv_path, json_path, png_path]


def write_sweep(rows, param_name, out_dir):
    """Grid results: sweep.csv plus sweep.png (metric curves over the grid)."""
    out_dir = _ensure_dir(out_dir)
    metric_keys = [k for k in rows[0] if k != param_name]
    csv_path = out_dir / "sweep.csv"
    _write_rows(
        csv_path,
        [param_name] + metric_keys,
        [[row[param_name]] + [row[k] for k in metric_keys] for row in rows],
    )

    xs = [row[param_name] for row in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key in metric_keys:
        ys = [row[key] for row in rows]
        if all(isinstance(y, (int, float)) for y in ys):
            ax.plot(xs, ys, marker="o", label=key)
    ax.set_xlabel(param_name)
    ax.set_ylabel("metric value")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    png_path = out_dir / "sweep.png"
    _save_figure(fig, png_path)
    return [csv_path, png_path]


def write_augment_report(report, out_dir):
    """Pair-similarity summary: augment.json plus augment.png."""
    out_dir = _ensure_dir(out_dir)
    json_path = out_dir / "augment.json"
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    fig, ax = plt.subplots(figsize=(5, 4))
    bars = ["inner (same subject)", "inter (all pairs)"]
    values = [report["inner"], report["inter"]]
    ax.bar(bars, values, color=["steelblue", "indianred"])
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.4f}", ha="center", va="bottom")
    ax.set_ylabel(report.get("metric", "similarity"))
    ax.set_title(f"window size {report.get('window_size')}")
    png_path = out_dir / "augment.png"
    _save_figure(fig, png_path)
    return [json_path, png_path]
