"""Render experiment summaries to PNG figures next to the CSV output.

One figure per experiment: error-versus-size curves for the sweep
experiments (one panel per secondary parameter value, one line per method)
and per-method heatmaps for the grid experiments.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _style():
    plt.rcParams.update(
        {
            "figure.dpi": 110,
            "font.size": 9,
            "axes.titlesize": 9,
            "axes.labelsize": 9,
            "legend.fontsize": 8,
            "lines.linewidth": 1.4,
            "lines.markersize": 4,
        }
    )


_AXIS_LABELS = {
    "n": "vertices n",
    "m": "edge order m",
    "p": "within-class gap p",
    "sigma_a": "noise level",
    "sample_count": "sample budget N",
}


def _panel_values(summary, fields):
    return sorted({tuple(getattr(s["cell"], f) for f in fields) for s in summary})


def _line_figure(summary, x_field, panel_fields, value_field, value_label, path):
    _style()
    panels = _panel_values(summary, panel_fields)
    fig, axes = plt.subplots(
        1, len(panels), figsize=(4.0 * len(panels), 3.2), squeeze=False, sharey=True
    )
    for ax, panel in zip(axes[0], panels):
        selected = [
            s
            for s in summary
            if tuple(getattr(s["cell"], f) for f in panel_fields) == panel
        ]
        for method in sorted({s["method"] for s in selected}):
            pts = sorted(
                (getattr(s["cell"], x_field), s[value_field])
                for s in selected
                if s["method"] == method
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
        ax.set_xlabel(_AXIS_LABELS.get(x_field, x_field))
        ax.set_title(", ".join(f"{f}={v}" for f, v in zip(panel_fields, panel)))
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel(value_label)
    axes[0][-1].legend(loc="best")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _heatmap_figure(summary, x_field, y_field, value_field, value_label, path):
    _style()
    methods = sorted({s["method"] for s in summary})
    xs = sorted({getattr(s["cell"], x_field) for s in summary})
    ys = sorted({getattr(s["cell"], y_field) for s in summary})
    fig, axes = plt.subplots(
        1, len(methods), figsize=(3.6 * len(methods), 3.2), squeeze=False
    )
    for ax, method in zip(axes[0], methods):
        grid = np.full((len(ys), len(xs)), np.nan)
        for s in summary:
            if s["method"] != method:
                continue
            yi = ys.index(getattr(s["cell"], y_field))
            xi = xs.index(getattr(s["cell"], x_field))
            grid[yi, xi] = s[value_field]
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(xs)), [str(x) for x in xs])
        ax.set_yticks(range(len(ys)), [str(y) for y in ys])
        ax.set_xlabel(_AXIS_LABELS.get(x_field, x_field))
        ax.set_ylabel(_AXIS_LABELS.get(y_field, y_field))
        ax.set_title(method)
        fig.colorbar(im, ax=ax, label=value_label, shrink=0.85)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def render_figures(config, summary, out_dir) -> list[str]:
    """Dispatch on the experiment id; returns the written figure paths."""
    if not summary:
        return []
    out = os.path.join(out_dir, f"{config.experiment}.png")
    if config.experiment == "vary_m":
        return [_line_figure(summary, "n", ("m",), "mean_err", "mean error", out)]
    if config.experiment == "vary_p":
        return [_line_figure(summary, "n", ("p",), "mean_frac_err", "mean fractional error", out)]
    if config.experiment == "heatmap_planted":
        return [_heatmap_figure(summary, "n", "p", "mean_frac_err", "mean fractional error", out)]
    if config.experiment == "sampling_compare":
        return [_line_figure(summary, "sample_count", ("n",), "median_err", "median error", out)]
    # point-cloud experiments: heatmap when noise varies, curves otherwise
    sigmas = {s["cell"].sigma_a for s in summary}
    if len(sigmas) > 1:
        return [_heatmap_figure(summary, "n", "sigma_a", "mean_frac_err", "mean fractional error", out)]
    return [_line_figure(summary, "n", ("sigma_a",), "mean_frac_err", "mean fractional error", out)]
