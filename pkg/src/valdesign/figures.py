"""Figure rendering for simulation and study reports.

Draws the two report displays as PNG files next to the CSV/JSON artifacts:
per-setting efficiency comparisons (dot-and-interval, one panel per setting)
and the study comparison (estimates with intervals, plus interval widths).
Uses the Agg backend so rendering works headless; output bytes are
deterministic for fixed inputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DESIGN_LABELS = {
    "srs": "SRS",
    "ets-var": "ETS on one exposure",
    "ets-pc1": "ETS on first component",
}
DESIGN_COLORS = {
    "srs": "#888888",
    "ets-var": "#d95f02",
    "ets-pc1": "#1b9e77",
}
_OFFSETS = {"srs": -0.22, "ets-var": 0.0, "ets-pc1": 0.22}


def render_efficiency_figure(settings, path) -> None:
    """One panel per setting: efficiency by model, dot per design with MC interval.

    ``settings`` is a list of ``(label, cells)`` pairs where ``cells`` are
    ``EfficiencyCell`` records for that setting.
    """
    n_panels = len(settings)
    fig, axes = plt.subplots(
        1, n_panels, figsize=(4.2 * n_panels, 3.6), squeeze=False, sharey=False
    )
    for ax, (label, cells) in zip(axes[0], settings):
        designs = sorted({c.design for c in cells}, key=lambda d: list(_OFFSETS).index(d))
        for design in designs:
            rows = sorted((c for c in cells if c.design == design), key=lambda c: c.model)
            xs = np.array([c.model for c in rows], dtype=float) + _OFFSETS.get(design, 0.0)
            ys = [c.efficiency for c in rows]
            low = [c.efficiency - c.efficiency_ci[0] for c in rows]
            high = [c.efficiency_ci[1] - c.efficiency for c in rows]
            ax.errorbar(
                xs, ys, yerr=[low, high], fmt="o", markersize=4, capsize=2,
                color=DESIGN_COLORS.get(design, "#333333"),
                label=DESIGN_LABELS.get(design, design),
            )
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("model")
        ax.set_ylabel("efficiency (1 / variance)")
        ax.set_xticks(sorted({c.model for c in cells}))
        ax.margins(x=0.08)
    axes[0][0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_study_figure(report, path) -> None:
    """Two panels: slope estimates with intervals (gold standard included),
    and interval widths per design and model."""
    models = sorted({row.model for row in report.results})
    fig, (ax_est, ax_width) = plt.subplots(1, 2, figsize=(9.6, 3.8))

    gold_by_model = {g.model: g for g in report.gold}
    ax_est.errorbar(
        [m - 0.33 for m in models],
        [gold_by_model[m].estimate for m in models],
        yerr=[
            [gold_by_model[m].estimate - gold_by_model[m].ci[0] for m in models],
            [gold_by_model[m].ci[1] - gold_by_model[m].estimate for m in models],
        ],
        fmt="s", markersize=4, capsize=2, color="#000000", label="gold standard",
    )
    for design, offset in _OFFSETS.items():
        rows = sorted((r for r in report.results if r.design == design), key=lambda r: r.model)
        if not rows:
            continue
        ax_est.errorbar(
            [r.model + offset * 0.7 for r in rows],
            [r.estimate for r in rows],
            yerr=[
                [r.estimate - r.ci[0] for r in rows],
                [r.ci[1] - r.estimate for r in rows],
            ],
            fmt="o", markersize=4, capsize=2,
            color=DESIGN_COLORS[design], label=DESIGN_LABELS[design],
        )
    ax_est.set_xlabel("model")
    ax_est.set_ylabel("slope estimate")
    ax_est.set_xticks(models)
    ax_est.axhline(0.0, linewidth=0.6, color="#bbbbbb", zorder=0)
    ax_est.legend(fontsize=7, frameon=False)

    width = 0.25
    for k, (design, _) in enumerate(_OFFSETS.items()):
        rows = sorted((r for r in report.results if r.design == design), key=lambda r: r.model)
        if not rows:
            continue
        ax_width.bar(
            [r.model + (k - 1) * width for r in rows],
            [r.ci_width for r in rows],
            width=width, color=DESIGN_COLORS[design], label=DESIGN_LABELS[design],
        )
    ax_width.set_xlabel("model")
    ax_width.set_ylabel("interval width")
    ax_width.set_xticks(models)
    ax_width.legend(fontsize=7, frameon=False)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
