"""Learning sidewalk navigation from disengagement signals, at desk scale.

A simulated robot collects (observation, action, disengagement) tuples under
an oracle monitor, trains an action-conditioned recurrent predictor of future
disengagements, and plans with a sampling-based receding-horizon optimizer
that avoids them.  See README.md for the full tour.
"""

from .dataset import Dataset, SequenceSample, StepRecord
from .loop import EvalReport, LoopConfig, evaluate, finetune_experiment, rollout, run_land
from .model import ModelConfig, TrainConfig, init_params, load_model, predict, save_model, train
from .planner import PlannerConfig, PlanState, brute_force_plan, init_plan_state, plan
from .policies import BCConfig, BCPolicy, LandPolicy, PurePursuitPolicy, RandomPolicy, train_bc
from .sim import (
    Observation,
    RobotState,
    check_disengagement,
    render_observation,
    reset_maneuver,
    start_state,
    step,
)
from .world import World, WorldSpec, classify_point, generate_world, nearest_centerline

__all__ = [
    "Dataset", "SequenceSample", "StepRecord",
    "EvalReport", "LoopConfig", "evaluate", "finetune_experiment", "rollout", "run_land",
    "ModelConfig", "TrainConfig", "init_params", "load_model", "predict", "save_model", "train",
    "PlannerConfig", "PlanState", "brute_force_plan", "init_plan_state", "plan",
    "BCConfig", "BCPolicy", "LandPolicy", "PurePursuitPolicy", "RandomPolicy", "train_bc",
    "Observation", "RobotState", "check_disengagement", "render_observation",
    "reset_maneuver", "start_state", "step",
    "World", "WorldSpec", "classify_point", "generate_world", "nearest_centerline",
]

__version__ = "0.1.0"
