"""Render evaluation reports and learning curves to figure files.

Companions to the delimited report output: the same numbers, drawn. Uses
the Agg backend so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport

plt.rcParams.update({
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def render_report_figure(report: EvalReport, path: str) -> None:
    """Bar chart of win-rate and matchup MSE per scheme, baseline first."""
    schemes = list(report.schemes)
    x = np.arange(len(schemes))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    for ax, values, title in (
            (axes[0], report.win_rate_mse, "win-rate MSE"),
            (axes[1], report.matchup_mse, "matchup MSE")):
        heights = [values[s] for s in schemes]
        colors = ["0.45" if s == "mle" else "tab:blue" for s in schemes]
        ax.bar(x, heights, color=colors)
        ax.set_xticks(x)
        ax.set_xticklabels(schemes, rotation=30, ha="right")
        ax.set_title(title)
        for xi, s in zip(x, schemes):
            if s == "mle":
                continue
            imp = (report.win_rate_improvement if title.startswith("win")
                   else report.matchup_improvement)[s]
            ax.annotate(f"{100 * imp:+.1f}%", (xi, values[s]),
                        ha="center", va="bottom", fontsize=7)
    fig.suptitle(f"{report.folds}-fold CV, {report.runs} runs (seed {report.seed})")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_curve_figure(rows: list[dict], path: str) -> None:
    """Shrunk/MLE MSE ratio against training fraction, log-x."""
    fractions = [r["fraction"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogx(fractions, [r["win_rate_ratio"] for r in rows],
                "o-", label="win rate")
    ax.semilogx(fractions, [r["matchup_ratio"] for r in rows],
                "s-", label="matchup")
    ax.axhline(1.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel("training fraction")
    ax.set_ylabel("MSE ratio (shrunk / MLE)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
