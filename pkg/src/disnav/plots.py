"""SVG figures: trajectory-distance CDF, per-phase learning curve, and the
top-down candidate-path overlay."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .loop import EvalReport


def cdf_svg(report: EvalReport, path) -> None:
    """Fraction of trajectories at or below each engaged distance."""
    pts = report.cdf_points()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if pts:
        xs = [0.0] + [x for x, _ in pts]
        ys = [0.0] + [y for _, y in pts]
        ax.step(xs, ys, where="post")
    ax.set_xlabel("distance before disengagement (m)")
    ax.set_ylabel("fraction of trajectories")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def learning_curve_svg(reports: list[EvalReport], path) -> None:
    """Average distance until disengagement per phase (index 0 = untrained)."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ys = [r.avg_distance_m for r in reports]
    ax.plot(range(len(ys)), ys, marker="o")
    ax.set_xlabel("training phase (0 = untrained)")
    ax.set_ylabel("avg distance until disengagement (m)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def candidate_paths_svg(world, state, diagnostics, path, max_candidates: int = 64) -> None:
    """Top-down view of planner candidates colored by predicted disengagement."""
    from .sim import simulate_action_paths
    from .world import driveway_quads, sidewalk_polygon

    fig, ax = plt.subplots(figsize=(6, 6))
    poly = sidewalk_polygon(world)
    ax.fill(poly[:, 0], poly[:, 1], color="0.85", zorder=0)
    for quad in driveway_quads(world):
        ax.fill(quad[:, 0], quad[:, 1], color="tan", alpha=0.6, zorder=0)
    for x, y, r in world.obstacles:
        ax.add_patch(plt.Circle((x, y), r, color="dimgray", zorder=2))

    idx = np.arange(len(diagnostics.costs))
    if len(idx) > max_candidates:
        idx = np.linspace(0, len(idx) - 1, max_candidates).astype(int)
    pos, _ = simulate_action_paths(world, state, diagnostics.candidates[idx])
    cmap = plt.get_cmap("RdYlGn_r")
    for i, k in enumerate(idx):
        risk = float(diagnostics.probs[k].max())
        xs = np.concatenate([[state.x], pos[i, :, 0]])
        ys = np.concatenate([[state.y], pos[i, :, 1]])
        ax.plot(xs, ys, color=cmap(risk), alpha=0.7, linewidth=1.0, zorder=3)
    ax.plot(state.x, state.y, "k^", markersize=8, zorder=4)
    ax.set_aspect("equal")
    margin = 8.0
    ax.set_xlim(state.x - margin, state.x + margin)
    ax.set_ylim(state.y - margin, state.y + margin)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
