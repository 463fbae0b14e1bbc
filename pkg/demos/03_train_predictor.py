#!/usr/bin/env python3
"""Training the action-conditioned disengagement predictor.

Collects a mixed dataset (scripted tracker + random policy), trains the
recurrent predictor with exact hand-rolled gradients, and plots the loss
curve plus predicted risk for straight / left / right action sequences from
a pose approaching an obstacle.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from disnav.dataset import Dataset
from disnav.loop import rollout
from disnav.model import ModelConfig, TrainConfig, init_params, predict, train
from disnav.policies import PurePursuitPolicy, RandomPolicy
from disnav.sim import render_observation, start_state
from disnav.world import WorldSpec, generate_world

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

block = dict(length_m=100, max_curvature=0.15, obstacle_density=1.5,
             driveway_rate=8.0, driveway_width_m=8.0, hedge_spacing_m=0.6)
dataset = Dataset()
for i, seed in enumerate(range(20, 26)):
    world = generate_world(WorldSpec(seed=seed, **block))
    policy = PurePursuitPolicy() if i % 2 == 0 else RandomPolicy(seed=i)
    rollout(world, policy, 220, dataset=dataset, episode_id=i,
            policy_tag="scripted" if i % 2 == 0 else "random")
print(f"dataset: {len(dataset)} records, {dataset.disengagement_count()} disengagements")

config = ModelConfig()
params = init_params(config, np.random.default_rng(0))
trained, history = train(params, dataset, config, TrainConfig(steps=800, seed=1))
print(f"loss: {history[0]:.1f} -> {np.mean(history[-25:]):.2f} (batch sum)")

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(history, linewidth=0.6)
ax.set_xlabel("training step")
ax.set_ylabel("minibatch loss")
ax.set_yscale("log")
fig.tight_layout()
fig.savefig(OUT / "loss_curve.png", dpi=110)

# risk of canned maneuvers from a pose near the first obstacle
world = generate_world(WorldSpec(seed=20, **block))
x, y, _r = world.obstacles[0]
from disnav.world import nearest_centerline

arc_obs, _ = nearest_centerline(world, (x, y))
state = start_state(world, max(1.0, arc_obs - 3.0))
obs = render_observation(world, state)
for name, seq in [("straight", np.zeros(8)), ("hard left", np.full(8, 0.4)),
                  ("hard right", np.full(8, -0.4))]:
    probs = predict(trained, obs.flat(), seq).probs
    print(f"{name:10s} -> per-step risk {np.round(probs, 2).tolist()}")
print(f"wrote {OUT / 'loss_curve.png'}")
