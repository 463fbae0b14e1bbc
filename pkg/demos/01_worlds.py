#!/usr/bin/env python3
"""Tour of the procedural sidewalk worlds.

Generates a few residential blocks, prints their geometry statistics, checks
the walkable corridor, and draws a top-down map to demos/out/worlds.png.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from disnav.world import (
    WorldSpec,
    check_feasibility,
    driveway_quads,
    generate_world,
    sidewalk_polygon,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

specs = [
    WorldSpec(seed=1, length_m=120, max_curvature=0.0, obstacle_density=1.0, driveway_rate=3.0),
    WorldSpec(seed=2, length_m=120, max_curvature=0.15, obstacle_density=1.5,
              driveway_rate=8.0, driveway_width_m=8.0, hedge_spacing_m=0.6),
    WorldSpec(seed=3, length_m=120, max_curvature=0.25, obstacle_density=3.0, driveway_rate=5.0),
]

fig, axes = plt.subplots(len(specs), 1, figsize=(14, 4 * len(specs)))
for ax, spec in zip(axes, specs):
    world = generate_world(spec)
    ok, why = check_feasibility(world)
    print(
        f"seed={spec.seed}: length {world.length_m:.1f} m, "
        f"{len(world.obstacles)} obstacles, {len(world.driveways)} driveways, "
        f"feasible={ok}{' (' + why + ')' if why else ''}"
    )
    poly = sidewalk_polygon(world)
    ax.fill(poly[:, 0], poly[:, 1], color="0.8", label="sidewalk")
    for quad in driveway_quads(world):
        ax.fill(quad[:, 0], quad[:, 1], color="tan", alpha=0.7)
    if len(world.obstacles):
        for x, y, r in world.obstacles:
            ax.add_patch(plt.Circle((x, y), r, color="dimgray"))
    ax.plot(world.centerline[:, 0], world.centerline[:, 1], "k--", linewidth=0.6)
    ax.set_aspect("equal")
    ax.set_title(f"seed {spec.seed}: curvature {spec.max_curvature}, "
                 f"hedge {'on' if spec.hedge_spacing_m else 'off'}")
fig.tight_layout()
fig.savefig(OUT / "worlds.png", dpi=110)
print(f"wrote {OUT / 'worlds.png'}")
