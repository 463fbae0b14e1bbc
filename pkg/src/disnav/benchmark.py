"""The pinned desk-scale benchmark: fixed worlds, seeds, and budgets used by
the acceptance suite and reproducible from the CLI via `run-loop`.

Training worlds and evaluation worlds are disjoint by seed.  The residential
blocks are hazard-dense: a hedge barrier lines the house side between wide
driveway cuts, a street strip borders the other side, and free-standing
obstacles narrow the walkable band, so every policy failure mode ends in one
of the three disengagement causes.
"""

from __future__ import annotations

from .loop import LoopConfig
from .model import ModelConfig
from .planner import PlannerConfig
from .world import WorldSpec

BLOCK = dict(
    length_m=150.0,
    sidewalk_width_m=1.5,
    max_curvature=0.15,
    obstacle_density=1.5,
    driveway_rate=8.0,
    driveway_width_m=8.0,
    hedge_spacing_m=0.6,
)

TRAIN_SEEDS = tuple(range(1001, 1011))      # 10 training worlds
EVAL_SEEDS = (2001, 2002, 2003, 2004, 2005)  # 5 held-out worlds
FINETUNE_SEEDS = (3001, 3002, 3003)          # 3 held-out worlds for finetuning

# held-out blocks are harder than the training distribution (sharper turns,
# denser obstacles and driveways), the same way the real-world evaluation
# streets featured sharp turns and clutter never seen during training
EVAL_BLOCK = dict(BLOCK, length_m=300.0, max_curvature=0.30, obstacle_density=2.5,
                  driveway_rate=12.0, driveway_width_m=9.0)

MODEL = ModelConfig(encoder_hidden=(128, 64), hidden_dim=32, action_embed_dim=16, horizon=8)
PLANNER = PlannerConfig(n_samples=512, horizon=8)

MASTER_SEED = 20250810


def train_specs() -> tuple[WorldSpec, ...]:
    return tuple(WorldSpec(seed=s, **BLOCK) for s in TRAIN_SEEDS)


def eval_specs() -> tuple[WorldSpec, ...]:
    return tuple(WorldSpec(seed=s, **EVAL_BLOCK) for s in EVAL_SEEDS)


def finetune_specs() -> tuple[WorldSpec, ...]:
    return tuple(WorldSpec(seed=s, **EVAL_BLOCK) for s in FINETUNE_SEEDS)


def benchmark_config() -> LoopConfig:
    return LoopConfig(
        phases=4,
        steps_per_phase=2500,
        train_specs=train_specs(),
        eval_specs=eval_specs(),
        eval_budget=500,
        train_steps_per_phase=600,
        batch_size=32,
        learning_rate=1e-3,
        seed=MASTER_SEED,
        model_config=MODEL,
        planner_config=PLANNER,
        bootstrap_steps=250,
        lr_decay_per_phase=0.5,
    )
