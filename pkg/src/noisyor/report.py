"""Figure rendering for study summaries.

Each study kind gets a fixed set of plots written as PNG files next to the
tabular results.  Rendering is pure: it reads only the summary dictionary, so
a report can be regenerated from summary.json without re-running the study.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError

_COLORS = {"id": "tab:blue", "ec": "tab:orange", "em": "tab:green"}


def _series(summary, metric, algorithm, axis_key):
    pts = [
        (g["condition"][axis_key], g["mean"], g["std"])
        for g in summary["groups"]
        if g["metric"] == metric and g["algorithm"] == algorithm and g["mean"] is not None
    ]
    pts.sort()
    return (
        np.array([p[0] for p in pts], dtype=float),
        np.array([p[1] for p in pts], dtype=float),
        np.array([p[2] for p in pts], dtype=float),
    )


def _accuracy_figures(summary, outdir):
    paths = []
    algorithms = sorted({g["algorithm"] for g in summary["groups"]})
    specs = [
        ("link_correlation", "Link parameter correlation", "accuracy_links.png"),
        ("disturbance_correlation", "Disturbance correlation", "accuracy_disturbance.png"),
    ]
    for metric, title, fname in specs:
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo in algorithms:
            x, mean, std = _series(summary, metric, algo, "total")
            if x.size == 0:
                continue
            color = _COLORS.get(algo)
            ax.plot(x, mean, marker="o", label=algo, color=color)
            ax.fill_between(x, mean - std, mean + std, alpha=0.15, color=color)
        ax.set_xscale("log")
        ax.set_xlabel("total samples")
        ax.set_ylabel("correlation")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[1]:
            ax.legend()
        path = os.path.join(outdir, fname)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def _scalability_figure(summary, outdir):
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric, label in (("addition_rate", "additions"), ("deletion_rate", "deletions")):
        x, mean, std = _series(summary, metric, "ec", "n")
        if x.size == 0:
            continue
        ax.errorbar(x, mean, yerr=std, marker="o", capsize=3, label=label)
    ax.set_xlabel("observed variables")
    ax.set_ylabel("error rate")
    ax.set_title("Structural errors vs model size")
    ax.grid(True, alpha=0.3)
    if ax.get_legend_handles_labels()[1]:
        ax.legend()
    path = os.path.join(outdir, "scalability_errors.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [path]


def _heatmap(summary, metric):
    xs = sorted({g["condition"]["x"] for g in summary["groups"]})
    ys = sorted({g["condition"]["y"] for g in summary["groups"]})
    grid = np.full((len(ys), len(xs)), np.nan)
    for g in summary["groups"]:
        if g["metric"] != metric or g["mean"] is None:
            continue
        grid[ys.index(g["condition"]["y"]), xs.index(g["condition"]["x"])] = g["mean"]
    return xs, ys, grid


def _robustness_figure(summary, outdir):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, metric, title in (
        (axes[0], "kl_single", "KL, single interventions"),
        (axes[1], "kl_double", "KL, double interventions"),
    ):
        xs, ys, grid = _heatmap(summary, metric)
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(xs)), [f"{x:g}" for x in xs])
        ax.set_yticks(range(len(ys)), [f"{y:g}" for y in ys])
        ax.set_xlabel("confounding level x")
        ax.set_ylabel("interaction level y")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    path = os.path.join(outdir, "robustness_kl.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_figures(summary, outdir):
    """Render the figure set for one study summary; returns the file paths."""
    os.makedirs(outdir, exist_ok=True)
    kind = summary.get("study")
    if kind == "accuracy":
        return _accuracy_figures(summary, outdir)
    if kind == "scalability":
        return _scalability_figure(summary, outdir)
    if kind == "robustness":
        return _robustness_figure(summary, outdir)
    raise DataError(f"summary has unknown study kind {kind!r}")
