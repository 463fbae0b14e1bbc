"""Control policies: the planner-backed navigation policy, a behavioral
cloning baseline, a scripted pure-pursuit tracker, and a random policy.

Every policy exposes ``act(world, state, obs) -> action`` and ``reset()``.
Only the scripted tracker reads the true world/state; the learned policies
see nothing but the egocentric observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model as modelmod
from . import planner as plannermod
from .dataset import Dataset
from .model import Adam, ModelConfig, sigmoid
from .sim import A_MAX, Observation, RobotState, clamp_action, wrap_heading
from .world import World

BC_EXCLUSION_M = 2.0


class InsufficientDataError(RuntimeError):
    """Not enough usable records to train a policy."""


class PurePursuitPolicy:
    """Track the centerline by steering at a lookahead point along it."""

    def __init__(self, lookahead_m: float = 0.75):
        self.lookahead_m = lookahead_m

    def reset(self):
        pass

    def act(self, world: World, state: RobotState, obs: Observation) -> float:
        target, _ = world.point_at_arc(state.progress_m + self.lookahead_m)
        bearing = math.atan2(target[1] - state.y, target[0] - state.x)
        return clamp_action(wrap_heading(bearing - state.heading))


class RandomPolicy:
    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def reset(self):
        pass

    def act(self, world, state, obs) -> float:
        return float(self.rng.uniform(-A_MAX, A_MAX))


class LandPolicy:
    """Receding-horizon planning against the learned disengagement predictor."""

    def __init__(self, params: dict, planner_config: plannermod.PlannerConfig, seed=0):
        self.predictor = plannermod.LearnedPredictor(params)
        self.config = planner_config
        self.rng = np.random.default_rng(seed)
        self.plan_state = plannermod.init_plan_state(planner_config)
        self.last_diagnostics: plannermod.PlanDiagnostics | None = None

    def reset(self):
        self.plan_state = plannermod.init_plan_state(self.config)

    def set_goal(self, goal: float, alpha: float | None = None):
        kwargs = self.config.to_dict()
        kwargs["goal"] = goal
        if alpha is not None:
            kwargs["alpha"] = alpha
        self.config = plannermod.PlannerConfig(**kwargs)

    def act(self, world, state, obs: Observation) -> float:
        action, self.plan_state, self.last_diagnostics = plannermod.plan(
            self.predictor, obs.flat(), self.plan_state, self.config, self.rng
        )
        return clamp_action(action)


class OraclePlannerPolicy:
    """The planner driven by the exact forward-simulated oracle (upper bound)."""

    def __init__(self, planner_config: plannermod.PlannerConfig, seed=0):
        self.config = planner_config
        self.rng = np.random.default_rng(seed)
        self.plan_state = plannermod.init_plan_state(planner_config)
        self.last_diagnostics = None

    def reset(self):
        self.plan_state = plannermod.init_plan_state(self.config)

    def act(self, world, state, obs) -> float:
        predictor = plannermod.OraclePredictor(world, state)
        action, self.plan_state, self.last_diagnostics = plannermod.plan(
            predictor, None, self.plan_state, self.config, self.rng
        )
        return clamp_action(action)


# ---------------------------------------------------------------------------
# behavioral cloning baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BCConfig:
    steps: int = 1500
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    exclusion_m: float = BC_EXCLUSION_M


def bc_param_shapes(config: ModelConfig):
    shapes = []
    d_in = config.input_dim
    for li, width in enumerate(config.encoder_hidden):
        shapes.append((f"enc{li}_W", (d_in, width)))
        shapes.append((f"enc{li}_b", (width,)))
        d_in = width
    shapes.append(("head_w", (d_in,)))
    shapes.append(("head_b", (1,)))
    return shapes


def init_bc_params(config: ModelConfig, rng: np.random.Generator) -> dict:
    params = {}
    for name, shape in bc_param_shapes(config):
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def bc_forward(params: dict, obs: np.ndarray):
    """obs (B, D) -> predicted actions (B,); returns activations for backprop."""
    acts = [obs]
    x = obs
    li = 0
    while f"enc{li}_W" in params:
        x = np.tanh(x @ params[f"enc{li}_W"] + params[f"enc{li}_b"])
        acts.append(x)
        li += 1
    pred = x @ params["head_w"] + params["head_b"][0]
    return pred, acts


def bc_loss_and_gradient(params: dict, obs: np.ndarray, targets: np.ndarray):
    pred, acts = bc_forward(params, obs)
    err = pred - targets
    value = float(np.sum(err * err))
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dpred = 2.0 * err
    grads["head_w"] += acts[-1].T @ dpred
    grads["head_b"] += dpred.sum()
    dx = dpred[:, None] * params["head_w"][None, :]
    for li in range(len(acts) - 2, -1, -1):
        a = acts[li + 1]
        dx = dx * (1.0 - a * a)
        grads[f"enc{li}_W"] += acts[li].T @ dx
        grads[f"enc{li}_b"] += dx.sum(axis=0)
        dx = dx @ params[f"enc{li}_W"].T
    return value, grads


def bc_training_indices(dataset: Dataset, exclusion_m: float = BC_EXCLUSION_M) -> np.ndarray:
    """Records usable for cloning: farther than the exclusion distance (by
    centerline progress) from the next disengagement in their episode."""
    keep = []
    by_episode: dict[int, list[int]] = {}
    for i, r in enumerate(dataset.records):
        by_episode.setdefault(r.episode_id, []).append(i)
    for indices in by_episode.values():
        next_d1_progress = None
        for i in reversed(indices):
            r = dataset.records[i]
            if r.disengaged:
                next_d1_progress = r.progress_m
                continue
            if next_d1_progress is None or next_d1_progress - r.progress_m > exclusion_m:
                keep.append(i)
    return np.array(sorted(keep), dtype=np.int64)


def train_bc(dataset: Dataset, model_config: ModelConfig, bc_config: BCConfig) -> tuple[dict, list[float]]:
    """Fit the observation -> action regressor on exclusion-filtered records."""
    usable = bc_training_indices(dataset, bc_config.exclusion_m)
    if len(usable) == 0:
        raise InsufficientDataError(
            f"no records farther than {bc_config.exclusion_m} m from a disengagement"
        )
    rng = np.random.default_rng(bc_config.seed)
    params = init_bc_params(model_config, rng)
    opt = Adam(params, bc_config.learning_rate)
    obs_all = np.stack([dataset.records[i].observation.flat() for i in usable])
    act_all = np.array([dataset.records[i].action for i in usable])
    history = []
    for _ in range(bc_config.steps):
        pick = rng.integers(0, len(usable), size=bc_config.batch_size)
        value, grads = bc_loss_and_gradient(params, obs_all[pick], act_all[pick])
        opt.update(params, grads)
        history.append(value)
    return params, history


class BCPolicy:
    def __init__(self, params: dict):
        self.params = params

    def reset(self):
        pass

    def act(self, world, state, obs: Observation) -> float:
        pred, _ = bc_forward(self.params, obs.flat()[None, :])
        return clamp_action(float(pred[0]))
