"""Figure rendering for trace/summary CSV outputs.

Reads the summary files written by the CLI and renders per-experiment
regret curves, optimum-interval widths, and pool filtering ratios.
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_summary_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = {}
            for k, v in row.items():
                parsed[k] = int(v) if k in ("t", "n") else float(v)
            rows.append(parsed)
    return rows


def _step_rows(rows):
    # warm-up summary row (t=0) has no ROI diagnostics
    return [r for r in rows if r["t"] >= 1]


def _band(ax, rows, mean_key, se_key, label):
    ts = [r["t"] for r in rows]
    mean = [r[mean_key] for r in rows]
    se = [r[se_key] for r in rows]
    if any(math.isnan(m) for m in mean):
        return
    ax.plot(ts, mean, label=label)
    lo = [m - s for m, s in zip(mean, se)]
    hi = [m + s for m, s in zip(mean, se)]
    ax.fill_between(ts, lo, hi, alpha=0.2)


def plot_regret(summaries, out_path, title=""):
    """Mean simple-regret curves with standard-error bands, one per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in summaries.items():
        _band(ax, _step_rows(rows), "simple_regret_mean", "simple_regret_se", label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("simple regret")
    ax.set_title(title or "simple regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_interval_widths(rows, out_path, title=""):
    """Global / ROI / intersection optimum-interval widths for one method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    step = _step_rows(rows)
    for key, label in (
        ("width_global", "global"),
        ("width_roi", "roi"),
        ("width_intersect", "intersect"),
    ):
        _band(ax, step, f"{key}_mean", f"{key}_se", label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("interval width")
    ax.set_title(title or "optimum interval width")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_filter_ratio(summaries, out_path, title=""):
    """Fraction of the pool retained by the ROI filter, per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in summaries.items():
        _band(ax, _step_rows(rows), "roi_ratio_mean", "roi_ratio_se", label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("filtering ratio")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title or "ROI filtering ratio")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_report(summary_dir, out_dir=None):
    """Render all figures for the summary CSVs found in a directory.

    Summary files are named `<section>__<method>.summary.csv`. Returns
    the list of figure paths written.
    """
    out_dir = out_dir or summary_dir
    os.makedirs(out_dir, exist_ok=True)
    groups = {}
    for fname in sorted(os.listdir(summary_dir)):
        if not fname.endswith(".summary.csv"):
            continue
        stem = fname[: -len(".summary.csv")]
        section, _, method = stem.partition("__")
        groups.setdefault(section, {})[method or stem] = read_summary_csv(
            os.path.join(summary_dir, fname)
        )
    written = []
    for section, summaries in groups.items():
        written.append(plot_regret(
            summaries, os.path.join(out_dir, f"{section}__regret.png"),
            title=f"{section}: simple regret",
        ))
        written.append(plot_filter_ratio(
            summaries, os.path.join(out_dir, f"{section}__filter_ratio.png"),
            title=f"{section}: filtering ratio",
        ))
        for method, rows in summaries.items():
            written.append(plot_interval_widths(
                rows, os.path.join(out_dir, f"{section}__{method}__widths.png"),
                title=f"{section} / {method}",
            ))
    return written
