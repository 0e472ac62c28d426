"""Comparison reports across runs: tables (text + CSV) and matplotlib
figures rendered to files alongside the delimited output.

Evaluation runs are grouped by model label; repeated seeds are aggregated
as mean and standard deviation and formatted like "46.4±0.5". Any run
directory that carries a training log additionally contributes to the
training-curve figure.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _load_eval_summaries(run_dirs):
    rows = []
    missing = []
    for run in run_dirs:
        summary_path = Path(run) / "summary.json"
        if not summary_path.exists():
            missing.append(str(run))
            continue
        summary = json.loads(summary_path.read_text())
        if "report" in summary:
            rows.append({
                "run": str(run),
                "label": summary.get("label") or Path(run).name,
                "seed": summary.get("seed"),
                "report": summary["report"],
            })
    return rows, missing


def _aggregate(rows):
    by_label: dict[str, list] = {}
    for row in rows:
        by_label.setdefault(row["label"], []).append(row["report"])
    out = {}
    for label, reports in by_label.items():
        macro = np.array([r["macro_f1"] for r in reports]) * 100.0
        class_names = sorted(reports[0]["classes"])
        per_class = {
            name: np.array([r["classes"][name]["f1"] for r in reports]) * 100.0
            for name in class_names
        }
        out[label] = {"n": len(reports), "macro": macro, "per_class": per_class}
    return out


def _fmt(values: np.ndarray, with_std: bool) -> str:
    if with_std and len(values) > 1:
        return f"{values.mean():.1f}±{values.std(ddof=1):.1f}"
    return f"{values.mean():.1f}"


def write_report(run_dirs, out_dir) -> dict:
    """Build the comparison table and figures; returns a small summary.

    Raises ValueError when no usable runs are found; runs without a
    summary are listed in the return value under "missing".
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, missing = _load_eval_summaries(run_dirs)
    if not rows:
        raise ValueError(
            "no evaluation summaries found" + (f"; missing: {missing}" if missing else ""))
    agg = _aggregate(rows)
    labels = sorted(agg)
    class_names = sorted({c for a in agg.values() for c in a["per_class"]})
    any_repeats = any(a["n"] > 1 for a in agg.values())

    # Delimited output: one row per model, one column per class.
    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["model", "runs", "macro_f1"]
        if any_repeats:
            header.append("macro_f1_std")
        header += class_names
        writer.writerow(header)
        for label in labels:
            a = agg[label]
            row = [label, a["n"], f"{a['macro'].mean():.2f}"]
            if any_repeats:
                row.append(f"{a['macro'].std(ddof=1):.2f}" if a["n"] > 1 else "")
            row += [f"{a['per_class'][c].mean():.2f}" if c in a["per_class"] else ""
                    for c in class_names]
            writer.writerow(row)

    # Text table in mean±std style.
    width = max(len(label) for label in labels) + 2
    lines = [f"{'model':<{width}} {'macro F1':>12} " +
             " ".join(f"{c:>14}" for c in class_names)]
    for label in labels:
        a = agg[label]
        cells = [f"{_fmt(a['per_class'][c], any_repeats) if c in a['per_class'] else '-':>14}"
                 for c in class_names]
        lines.append(f"{label:<{width}} {_fmt(a['macro'], any_repeats):>12} " + " ".join(cells))
    txt_path = out_dir / "report.txt"
    txt_path.write_text("\n".join(lines) + "\n")

    _figure_per_class(agg, labels, class_names, out_dir / "per_class_f1.png")
    _figure_macro(agg, labels, out_dir / "macro_f1.png")
    curves = _figure_training_curves(run_dirs, out_dir / "training_curves.png")

    return {
        "table_csv": str(csv_path),
        "table_txt": str(txt_path),
        "figures": [str(out_dir / "per_class_f1.png"), str(out_dir / "macro_f1.png")]
                   + ([str(curves)] if curves else []),
        "models": {label: {"n": agg[label]["n"], "macro_f1": float(agg[label]["macro"].mean())}
                   for label in labels},
        "missing": missing,
    }


def _figure_per_class(agg, labels, class_names, path):
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(class_names)), 4))
    x = np.arange(len(class_names))
    width = 0.8 / max(len(labels), 1)
    for i, label in enumerate(labels):
        a = agg[label]
        means = [a["per_class"][c].mean() if c in a["per_class"] else 0.0 for c in class_names]
        errs = [a["per_class"][c].std(ddof=1) if c in a["per_class"] and a["n"] > 1 else 0.0
                for c in class_names]
        ax.bar(x + i * width, means, width=width, yerr=errs, capsize=2, label=label)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(class_names, rotation=30, ha="right")
    ax.set_ylabel("event F1 [%]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _figure_macro(agg, labels, path):
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(labels)), 4))
    means = [agg[label]["macro"].mean() for label in labels]
    errs = [agg[label]["macro"].std(ddof=1) if agg[label]["n"] > 1 else 0.0 for label in labels]
    ax.bar(labels, means, yerr=errs, capsize=3)
    ax.set_ylabel("macro F1 [%]")
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _figure_training_curves(run_dirs, path):
    curves = []
    for run in run_dirs:
        log_path = Path(run) / "train_log.jsonl"
        if not log_path.exists():
            continue
        steps, objectives = [], []
        for line in log_path.read_text().splitlines():
            entry = json.loads(line)
            steps.append(entry["step"])
            objectives.append(entry["objective"])
        curves.append((Path(run).name, steps, objectives))
    if not curves:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, steps, objectives in curves:
        ax.plot(steps, objectives, label=name)
    ax.set_xlabel("step")
    ax.set_ylabel("validation objective")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
