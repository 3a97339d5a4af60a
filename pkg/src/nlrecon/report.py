"""Static figures rendered from study and applicability output files.

Figures are regenerated from the delimited files, not from in-memory study
state, so a report can be re-rendered later from a results directory alone.
All rendering uses the non-interactive backend and writes PNG files next to
the data they were drawn from.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_calibration_figure",
    "render_strategies_figure",
    "render_applicability_figure",
    "render_study_figures",
]


def _read_columns(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def _floats(cells):
    return np.array([float(c) for c in cells])


def render_calibration_figure(csv_path, out_path=None) -> Path:
    """Reliability plot for the ex-ante reduction estimates.

    Left panel: realized reduction rate against the sorted nominal estimate,
    with the diagonal for reference. Right panel: nominal and bound-based
    curves against quantile rank.
    """
    csv_path = Path(csv_path)
    if out_path is None:
        out_path = csv_path.with_suffix(".png")
    cols = _read_columns(csv_path)
    if not cols["t"]:
        raise ValueError(f"{csv_path} holds no calibration rows")
    e_sorted = _floats(cols["e_sorted"])
    r_nom = _floats(cols["r_nominal"])
    r_lo = _floats(cols["r_lower"])
    r_hi = _floats(cols["r_upper"])
    rank = np.arange(e_sorted.size) / max(e_sorted.size - 1, 1)

    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4.2))
    left.plot([0, 1], [0, 1], color="0.6", linestyle="--", linewidth=1)
    left.plot(e_sorted, r_nom, color="tab:blue", linewidth=1.4)
    left.set_xlabel("estimated reduction probability")
    left.set_ylabel("realized reduction rate")
    left.set_title("reliability")
    left.set_xlim(0, 1)
    left.set_ylim(0, 1)

    right.plot(rank, r_nom, label="point estimate", color="tab:blue", linewidth=1.4)
    right.plot(rank, r_lo, label="lower bound", color="tab:green", linewidth=1.1)
    right.plot(rank, r_hi, label="upper bound", color="tab:red", linewidth=1.1)
    right.set_xlabel("quantile of sort key")
    right.set_ylabel("realized reduction rate")
    right.set_title("windowed success rates")
    right.set_ylim(0, 1)
    right.legend(loc="lower right", fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_strategies_figure(csv_path, out_path=None) -> Path:
    """Boxplot of per-study strategy scores, grouped by threshold."""
    csv_path = Path(csv_path)
    if out_path is None:
        out_path = csv_path.with_suffix(".png")
    cols = _read_columns(csv_path)
    if not cols["study"]:
        raise ValueError(f"{csv_path} holds no strategy rows")
    groups: dict[str, list[float]] = {}
    for theta, score, degenerate in zip(
        cols["theta"], cols["delta_rel_opt"], cols["degenerate"]
    ):
        if degenerate == "1":
            continue
        groups.setdefault(theta, []).append(float(score))
    if not groups:
        raise ValueError(f"{csv_path} holds only degenerate strategy rows")

    def order_key(label):
        # "always" leads, numeric thresholds follow in increasing order
        return (0, 0.0) if label == "always" else (1, float(label))

    labels = sorted(groups, key=order_key)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.8 * len(labels)), 4.2))
    ax.boxplot([groups[k] for k in labels], tick_labels=labels)
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.axhline(1.0, color="0.6", linewidth=0.8, linestyle="--")
    ax.set_xlabel("decision threshold")
    ax.set_ylabel("share of achievable improvement")
    ax.set_title("threshold strategies vs oracle")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_applicability_figure(csv_path, out_path=None) -> Path:
    """Condition, reduction, and false-positive rates against noise level."""
    csv_path = Path(csv_path)
    if out_path is None:
        out_path = csv_path.with_suffix(".png")
    cols = _read_columns(csv_path)
    if not cols["sigma"]:
        raise ValueError(f"{csv_path} holds no applicability rows")
    sigma = _floats(cols["sigma"])
    converged = _floats(cols["n_points"]) - _floats(cols["n_failed"])
    converged = np.maximum(converged, 1.0)
    fp_rate = _floats(cols["n_false_positive"]) / converged

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(sigma, _floats(cols["condition_rate"]), marker="o", label="condition holds")
    ax.plot(sigma, _floats(cols["reduction_rate"]), marker="s", label="error reduced")
    ax.plot(sigma, fp_rate, marker="x", label="false positives")
    ax.set_xlabel("perturbation level")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("sufficient-condition applicability")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_study_figures(out_dir) -> dict:
    """Render every figure the study CSVs in ``out_dir`` support.

    Returns a mapping from figure name to the PNG path written. Files with
    no data rows are skipped rather than rendered empty.
    """
    out = Path(out_dir)
    figures = {}
    calibration = out / "calibration.csv"
    if calibration.exists():
        try:
            figures["calibration"] = render_calibration_figure(calibration)
        except ValueError:
            pass
    strategies = out / "strategies.csv"
    if strategies.exists():
        try:
            figures["strategies"] = render_strategies_figure(strategies)
        except ValueError:
            pass
    applicability = out / "applicability.csv"
    if applicability.exists():
        try:
            figures["applicability"] = render_applicability_figure(applicability)
        except ValueError:
            pass
    return figures
