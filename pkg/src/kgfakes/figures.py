"""Accuracy figures rendered beside the CSV reports.

Matplotlib is imported lazily with the Agg backend so headless runs and
library users who never plot stay light.
"""

from __future__ import annotations

import logging
from pathlib import Path

from .harness import DetectionReport, Label
from .miner import Tier

logger = logging.getLogger(__name__)

# Panel tints for the two plausibility tiers.
_TIER_FACE = {Tier.HIGH: "#fdf6dd", Tier.LOW: "#f1e8fa"}
_BAR_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_category_figure(
    report: DetectionReport, generator_model: str, path: Path | str
) -> bool:
    """Per-category accuracy bars for one generator, one panel per tier.

    Returns False without writing when the report has no fake-label rows for
    the generator.
    """
    rows = [
        row
        for row in report.rows
        if row.label is Label.FAKE and row.generator_model == generator_model
    ]
    if not rows:
        return False
    plt = _pyplot()
    categories = sorted({row.category for row in rows})
    judges = sorted({row.judge_model for row in rows})
    positions = range(len(categories))
    width = 0.8 / max(len(judges), 1)

    fig, axes = plt.subplots(
        2, 1, figsize=(max(6.0, 0.55 * len(categories) + 2.0), 7.0), sharex=True
    )
    for axis, tier in zip(axes, (Tier.HIGH, Tier.LOW)):
        axis.set_facecolor(_TIER_FACE[tier])
        by_slot = {
            (row.category, row.judge_model): row.accuracy
            for row in rows
            if row.tier is tier
        }
        for j, judge in enumerate(judges):
            offsets = [p + (j - (len(judges) - 1) / 2) * width for p in positions]
            heights = []
            for category in categories:
                accuracy = by_slot.get((category, judge))
                heights.append(0.0 if accuracy is None else float(accuracy) * 100)
            axis.bar(
                offsets,
                heights,
                width=width,
                label=judge,
                color=_BAR_COLORS[j % len(_BAR_COLORS)],
            )
        axis.set_ylim(0, 105)
        axis.set_ylabel(f"accuracy % ({tier.value} plausibility)")
        axis.grid(axis="y", alpha=0.3)
    axes[0].legend(loc="upper right", fontsize="small")
    axes[1].set_xticks(list(positions))
    axes[1].set_xticklabels(categories, rotation=60, ha="right", fontsize="small")
    fig.suptitle(f"Detection accuracy by category ({generator_model})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def save_summary_figure(report: DetectionReport, path: Path | str) -> bool:
    """Grouped bars: one cluster per summary column, one bar per judge."""
    judges = report.judges()
    if not judges:
        return False
    plt = _pyplot()
    columns: list[tuple[str, dict]] = []
    for generator in report.generators():
        for tier in (Tier.HIGH, Tier.LOW):
            columns.append(
                (
                    f"{generator}\n{tier.value}",
                    dict(generator_model=generator, tier=tier, label=Label.FAKE),
                )
            )
    columns.append(("real\nfacts", dict(label=Label.REAL)))

    positions = range(len(columns))
    width = 0.8 / len(judges)
    fig, axis = plt.subplots(figsize=(max(6.0, 1.2 * len(columns) + 2.0), 4.5))
    for j, judge in enumerate(judges):
        offsets = [p + (j - (len(judges) - 1) / 2) * width for p in positions]
        heights = []
        for _, selector in columns:
            _, _, _, accuracy = report.aggregate(judge_model=judge, **selector)
            heights.append(0.0 if accuracy is None else float(accuracy) * 100)
        axis.bar(
            offsets,
            heights,
            width=width,
            label=judge,
            color=_BAR_COLORS[j % len(_BAR_COLORS)],
        )
    axis.set_xticks(list(positions))
    axis.set_xticklabels([name for name, _ in columns], fontsize="small")
    axis.set_ylim(0, 105)
    axis.set_ylabel("accuracy %")
    axis.grid(axis="y", alpha=0.3)
    axis.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True
