"""Alternating collect/train orchestration, rollout recording, and the
evaluation harness (average distance until disengagement, trajectory CDF)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as modelmod
from . import planner as plannermod
from .dataset import Dataset, StepRecord
from .model import ModelConfig, TrainConfig
from .policies import BCConfig, LandPolicy, train_bc
from .sim import (
    RobotState,
    WORLD_END_MARGIN_M,
    check_disengagement,
    render_observation,
    reset_maneuver,
    start_state,
    step,
)
from .world import World, WorldSpec, generate_world

EVAL_FORMAT = "land-eval.v1"


@dataclass(frozen=True)
class EvalReport:
    """Per-trajectory engaged distances and the aggregates derived from them.

    A trajectory is a maximal contiguous engaged segment; its distance is the
    net centerline arc-length progress while engaged.
    """

    trajectory_distances: tuple[float, ...]
    disengagement_count: int

    @property
    def total_distance_m(self) -> float:
        return float(sum(self.trajectory_distances))

    @property
    def avg_distance_m(self) -> float:
        return self.total_distance_m / max(1, self.disengagement_count)

    def cdf_points(self) -> list[tuple[float, float]]:
        """Non-decreasing CDF of trajectory distances, ending at y = 1.0."""
        d = sorted(self.trajectory_distances)
        n = len(d)
        return [(float(x), (i + 1) / n) for i, x in enumerate(d)]

    def to_dict(self) -> dict:
        return {
            "format": EVAL_FORMAT,
            "trajectory_distances": list(self.trajectory_distances),
            "disengagement_count": self.disengagement_count,
            "total_distance_m": self.total_distance_m,
            "avg_distance_m": self.avg_distance_m,
            "cdf": [[x, y] for x, y in self.cdf_points()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format") != EVAL_FORMAT:
            raise ValueError(f"expected format {EVAL_FORMAT!r}, got {d.get('format')!r}")
        return cls(
            trajectory_distances=tuple(d["trajectory_distances"]),
            disengagement_count=int(d["disengagement_count"]),
        )


@dataclass
class RolloutResult:
    trajectory_distances: list[float] = field(default_factory=list)
    disengagement_count: int = 0
    causes: list[str] = field(default_factory=list)
    steps_taken: int = 0


def rollout(
    world: World,
    policy,
    max_steps: int,
    dataset: Dataset | None = None,
    episode_id: int = 0,
    policy_tag: str = "",
    start_arc: float = 1.0,
) -> RolloutResult:
    """Run a policy under the oracle monitor, optionally recording every step.

    Each record stores the observation at the current state, the action the
    policy commanded there, and whether that state was already disengaged;
    disengagement records carry a zero placeholder action and are immediately
    followed by the reset maneuver.
    """
    state = start_state(world, start_arc)
    policy.reset()
    result = RolloutResult()
    seg_start = state.progress_m
    steps_in_segment = 0
    step_index = 0

    def record(obs, action, disengaged):
        if dataset is not None:
            dataset.record_step(
                StepRecord(
                    episode_id=episode_id,
                    step_index=step_index,
                    observation=obs,
                    action=float(action),
                    disengaged=disengaged,
                    progress_m=state.progress_m,
                    policy_tag=policy_tag,
                )
            )

    for _ in range(max_steps):
        result.steps_taken += 1
        cause = check_disengagement(world, state)
        if cause is not None:
            obs = render_observation(world, state)
            record(obs, 0.0, True)
            step_index += 1
            result.trajectory_distances.append(max(0.0, state.progress_m - seg_start))
            result.disengagement_count += 1
            result.causes.append(cause)
            state = reset_maneuver(world, state)
            policy.reset()
            seg_start = state.progress_m
            steps_in_segment = 0
            continue
        obs = render_observation(world, state)
        action = policy.act(world, state, obs)
        record(obs, action, False)
        step_index += 1
        steps_in_segment += 1
        state = step(world, state, action)
        if state.progress_m >= world.length_m - WORLD_END_MARGIN_M:
            break

    if steps_in_segment > 0:  # budget- or world-end-terminated final trajectory
        result.trajectory_distances.append(max(0.0, state.progress_m - seg_start))
    return result


def evaluate(policy_factory, eval_specs: list[WorldSpec], budget_per_world: int) -> EvalReport:
    """Roll a fresh policy on each world; aggregate engaged trajectory distances."""
    distances: list[float] = []
    disengagements = 0
    for wi, spec in enumerate(eval_specs):
        world = generate_world(spec)
        res = rollout(world, policy_factory(wi), budget_per_world)
        distances.extend(res.trajectory_distances)
        disengagements += res.disengagement_count
    return EvalReport(trajectory_distances=tuple(distances), disengagement_count=disengagements)


@dataclass(frozen=True)
class LoopConfig:
    phases: int = 4
    steps_per_phase: int = 2500
    train_specs: tuple[WorldSpec, ...] = ()
    eval_specs: tuple[WorldSpec, ...] = ()
    eval_budget: int = 500
    train_steps_per_phase: int = 600
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    model_config: ModelConfig = ModelConfig()
    planner_config: plannermod.PlannerConfig = plannermod.PlannerConfig()
    # steps of scripted pure-pursuit data collected once before phase 0;
    # guarantees engaged windows exist however badly the untrained policy acts
    bootstrap_steps: int = 0
    # learning-rate multiplier applied after each phase (1.0 = constant);
    # late phases refine an already-capable model and need smaller steps
    lr_decay_per_phase: float = 1.0

    def validate(self) -> None:
        if self.phases < 1 or self.steps_per_phase < 1 or self.eval_budget < 1:
            raise ValueError("phase, step, and budget counts must be positive")
        if not self.train_specs:
            raise ValueError("at least one training world is required")
        if self.model_config.horizon != self.planner_config.horizon:
            raise ValueError("model and planner horizons must match")
        train_seeds = {s.seed for s in self.train_specs}
        eval_seeds = {s.seed for s in self.eval_specs}
        if train_seeds & eval_seeds:
            raise ValueError(f"training and evaluation world seeds overlap: {train_seeds & eval_seeds}")


def _derived_seed(*parts) -> np.random.SeedSequence:
    return np.random.SeedSequence(list(parts))


def land_policy_factory(params, config: LoopConfig, purpose: int):
    def make(index: int) -> LandPolicy:
        seed = _derived_seed(config.seed, purpose, index)
        return LandPolicy(params, config.planner_config, seed=seed)

    return make


@dataclass
class RunResult:
    params: dict
    dataset: Dataset
    eval_reports: list[EvalReport]       # index 0 = untrained policy, then one per phase
    loss_histories: list[list[float]]
    phase_params: list[dict] = field(default_factory=list)  # [untrained, after phase 1..P]


def run_land(config: LoopConfig, initial_dataset: Dataset | None = None) -> RunResult:
    """Alternate collection with the planning policy and predictor training.

    Phase p collects with the parameters produced by phase p-1 (phase 0 uses
    the random initialization), then trains on the cumulative dataset.
    eval_reports[0] evaluates the untrained policy; eval_reports[p + 1]
    evaluates the parameters after phase p's training.
    """
    config.validate()
    dataset = initial_dataset.copy() if initial_dataset is not None else Dataset()
    params = modelmod.init_params(
        config.model_config, np.random.default_rng(_derived_seed(config.seed, 0))
    )
    train_worlds = [generate_world(s) for s in config.train_specs]
    steps_per_world = max(1, config.steps_per_phase // len(train_worlds))

    if config.bootstrap_steps > 0:
        from .policies import PurePursuitPolicy

        per_world = max(1, config.bootstrap_steps // len(train_worlds))
        for world in train_worlds:
            rollout(
                world,
                PurePursuitPolicy(),
                per_world,
                dataset=dataset,
                episode_id=dataset.next_episode_id(),
                policy_tag="scripted",
            )

    reports = []
    if config.eval_specs:
        reports.append(
            evaluate(land_policy_factory(params, config, 1), list(config.eval_specs), config.eval_budget)
        )
    histories = []
    phase_params = [{k: v.copy() for k, v in params.items()}]
    opt = modelmod.Adam(params, config.learning_rate)  # moments persist across phases
    for phase in range(config.phases):
        opt.lr = config.learning_rate * config.lr_decay_per_phase ** phase
        for wi, world in enumerate(train_worlds):
            policy = LandPolicy(
                params, config.planner_config, seed=_derived_seed(config.seed, 2, phase, wi)
            )
            rollout(
                world,
                policy,
                steps_per_world,
                dataset=dataset,
                episode_id=dataset.next_episode_id(),
                policy_tag="land",
            )
        params, history = modelmod.train(
            params,
            dataset,
            config.model_config,
            TrainConfig(
                steps=config.train_steps_per_phase,
                batch_size=config.batch_size,
                learning_rate=config.learning_rate,
                seed=int(_derived_seed(config.seed, 3, phase).generate_state(1)[0]),
            ),
            opt=opt,
        )
        histories.append(history)
        phase_params.append({k: v.copy() for k, v in params.items()})
        if config.eval_specs:
            reports.append(
                evaluate(
                    land_policy_factory(params, config, 100 + phase),
                    list(config.eval_specs),
                    config.eval_budget,
                )
            )
    return RunResult(params=params, dataset=dataset, eval_reports=reports,
                     loss_histories=histories, phase_params=phase_params)


def finetune_experiment(
    params: dict,
    base_dataset: Dataset,
    heldout_specs: list[WorldSpec],
    budget_per_world: int,
    config: LoopConfig,
    finetune_steps: int = 600,
    finetune_lr: float = 2e-4,
) -> tuple[EvalReport, EvalReport, dict]:
    """Evaluate, finetune on the recorded evaluation data, re-evaluate.

    The before-pass records into a fresh dataset; finetuning runs on that
    recording alone (the failure modes to patch are exactly there), falling
    back to the recording merged into the base dataset only when the
    recording lacks one of the sample classes.  The after-pass reuses the
    identical worlds and per-world seeds.
    """
    recording = Dataset()
    distances: list[float] = []
    disengagements = 0
    for wi, spec in enumerate(heldout_specs):
        world = generate_world(spec)
        policy = LandPolicy(params, config.planner_config, seed=_derived_seed(config.seed, 200, wi))
        res = rollout(
            world,
            policy,
            budget_per_world,
            dataset=recording,
            episode_id=recording.next_episode_id(),
            policy_tag="land",
        )
        distances.extend(res.trajectory_distances)
        disengagements += res.disengagement_count
    before = EvalReport(tuple(distances), disengagements)

    horizon = config.model_config.horizon
    if len(recording.positive_starts(horizon)) and len(recording.negative_starts(horizon)):
        tune_set = recording
    else:
        from dataclasses import replace

        tune_set = base_dataset.copy()
        offset = tune_set.next_episode_id()
        tune_set.extend(replace(r, episode_id=r.episode_id + offset) for r in recording.records)
    tuned, _history = modelmod.train(
        params,
        tune_set,
        config.model_config,
        TrainConfig(
            steps=finetune_steps,
            batch_size=config.batch_size,
            learning_rate=finetune_lr,
            seed=int(_derived_seed(config.seed, 201).generate_state(1)[0]),
        ),
    )

    def make(wi: int) -> LandPolicy:
        return LandPolicy(tuned, config.planner_config, seed=_derived_seed(config.seed, 200, wi))

    after = evaluate(make, heldout_specs, budget_per_world)
    return before, after, tuned


def train_bc_on(dataset: Dataset, config: LoopConfig, bc_config: BCConfig | None = None):
    """Behavioral-cloning baseline trained on the same cumulative dataset."""
    bc_config = bc_config or BCConfig(seed=int(_derived_seed(config.seed, 202).generate_state(1)[0]))
    return train_bc(dataset, config.model_config, bc_config)
