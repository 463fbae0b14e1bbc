#!/usr/bin/env python3
"""Data collection and training-sample construction.

Rolls a random policy under the oracle monitor, shows the recorded stream of
(observation, action, disengagement) tuples, then demonstrates how H-step
training windows get the absorbing-label extension and how minibatches are
rebalanced to exactly half disengagement sequences.
"""
import numpy as np

from disnav.dataset import Dataset
from disnav.loop import rollout
from disnav.policies import RandomPolicy
from disnav.world import WorldSpec, generate_world

spec = WorldSpec(seed=12, length_m=100, max_curvature=0.15, obstacle_density=1.5,
                 driveway_rate=8.0, driveway_width_m=8.0, hedge_spacing_m=0.6)
world = generate_world(spec)
dataset = Dataset()
result = rollout(world, RandomPolicy(seed=0), 400, dataset=dataset, episode_id=0,
                 policy_tag="random")
print(f"collected {len(dataset)} records, {result.disengagement_count} disengagements "
      f"({', '.join(sorted(set(result.causes)))})")

H = 8
rng = np.random.default_rng(0)
pos = dataset.positive_starts(H)
neg = dataset.negative_starts(H)
print(f"window starts: {len(pos)} overlap a disengagement, {len(neg)} are fully engaged")

print("\na window that crosses a disengagement (labels become absorbing):")
sample = dataset.sample_sequence(int(pos[0]), H, rng)
print("  labels     :", sample.labels.astype(int).tolist())
print("  padded_from:", sample.padded_from, "(trailing actions drawn from the dataset pool)")

batch = dataset.sample_minibatch(16, H, rng)
n_pos = sum(bool(s.labels.any()) for s in batch)
print(f"\nminibatch of 16 -> {n_pos} disengagement windows + {16 - n_pos} clean windows")

path = "/tmp/demo_dataset.ndjson"
dataset.save(path)
reloaded = Dataset.load(path)
print(f"\nsaved and reloaded {len(reloaded)} records losslessly from {path}")
