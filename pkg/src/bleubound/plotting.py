"""Figure rendering for toy-run curves and gradient-variance sweeps."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .training import CurvePoint, GradComparison

__all__ = ["render_curve_figure", "render_compare_figure"]


def render_curve_figure(
    points: Sequence[CurvePoint], path: str, title: str | None = None
) -> None:
    """Learning curves: bound, MC expected BLEU with 3*SE bars, argmax BLEU."""
    steps = [pt.step for pt in points]
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    ax.errorbar(
        steps,
        [pt.mc_mean for pt in points],
        yerr=[3.0 * pt.mc_std_error for pt in points],
        fmt="x-",
        color="tab:blue",
        capsize=3,
        label="expected BLEU (MC, 3 SE)",
    )
    ax.plot(
        steps,
        [pt.lb_aggregate for pt in points],
        "o--",
        color="tab:orange",
        label="lower bound aggregate",
    )
    ax.plot(
        steps,
        [pt.exact_bleu_argmax for pt in points],
        "s-",
        color="tab:green",
        label="BLEU of argmax decode",
    )
    ax.set_xlabel("step")
    ax.set_ylabel("score")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_compare_figure(comparison: GradComparison, path: str) -> None:
    """REINFORCE variance against sample count, with a 1/samples guide."""
    entries = comparison.reinforce
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if entries:
        xs = [e.samples for e in entries]
        ys = [e.variance_sum for e in entries]
        ax.loglog(xs, ys, "o-", color="tab:red", label="REINFORCE variance (sum)")
        if ys[0] > 0:
            guide = [ys[0] * xs[0] / x for x in xs]
            ax.loglog(xs, guide, ":", color="gray", label="1/samples guide")
    ax.axhline(0, color="black", linewidth=0.5)
    ax.set_xlabel("samples")
    ax.set_ylabel("summed entry variance")
    ax.set_title(
        f"cosine(lb, exact) = {comparison.cosine_lb_vs_exact:.4f}"
    )
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
