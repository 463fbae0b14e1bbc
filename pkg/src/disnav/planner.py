"""Zeroth-order stochastic trajectory optimizer over predicted disengagements.

Each control step samples N candidate action sequences around a warm-started
mean using temporally filtered gaussian noise, scores them with the
disengagement predictor (cost = sum of predicted probabilities plus an
optional goal-heading penalty), soft-updates the mean with exponentiated
negative costs, executes the first action of the mean, and shifts the mean
one step for the next cycle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields

import numpy as np

from . import model as modelmod
from . import sim

BRUTE_FORCE_GUARD = 1_000_000


@dataclass(frozen=True)
class PlannerConfig:
    n_samples: int = 1024          # desk-scale default; full_scale() gives 8192
    sigma: float = 1.0
    beta: float = 0.5              # temporal correlation of the sampling noise
    gamma: float = 50.0            # soft-update temperature
    horizon: int = 8               # must equal the model horizon
    alpha: float = 0.0             # goal-heading weight
    goal: float = 0.0              # desired heading change, rad
    action_low: float = -sim.A_MAX
    action_high: float = sim.A_MAX
    iterations: int = 1

    def validate(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must be in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.horizon < 1 or self.iterations < 1:
            raise ValueError("horizon and iterations must be >= 1")
        if self.action_low >= self.action_high:
            raise ValueError("action bounds must satisfy low < high")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    @classmethod
    def full_scale(cls, **kwargs) -> "PlannerConfig":
        kwargs.setdefault("n_samples", 8192)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown PlannerConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class PlanState:
    mean: np.ndarray         # (H,) sampling distribution center, within bounds
    prev_noise: np.ndarray   # (H,) soft-averaged noise of the last update, informational


def init_plan_state(config: PlannerConfig) -> PlanState:
    return PlanState(mean=np.zeros(config.horizon), prev_noise=np.zeros(config.horizon))


@dataclass(frozen=True)
class PlanDiagnostics:
    candidates: np.ndarray   # (N, H)
    probs: np.ndarray        # (N, H)
    costs: np.ndarray        # (N,)
    mean: np.ndarray         # (H,) final soft-updated mean
    chosen: float

    def to_dict(self, max_candidates: int | None = None) -> dict:
        idx = np.arange(len(self.costs))
        if max_candidates is not None and len(idx) > max_candidates:
            # keep a cost-ordered subsample so extremes stay visible
            idx = idx[np.argsort(self.costs, kind="stable")]
            idx = idx[np.linspace(0, len(idx) - 1, max_candidates).astype(int)]
        return {
            "candidates": [
                {
                    "actions": self.candidates[i].tolist(),
                    "probs": self.probs[i].tolist(),
                    "cost": float(self.costs[i]),
                }
                for i in idx
            ],
            "chosen": float(self.chosen),
        }


def cost(probs, actions, alpha: float, goal: float) -> float:
    """Predicted disengagement count plus the goal-heading penalty."""
    probs = np.asarray(probs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    return float(np.sum(probs) + alpha * np.sum((actions - goal) ** 2))


def cost_batch(probs: np.ndarray, actions: np.ndarray, alpha: float, goal: float) -> np.ndarray:
    out = probs.sum(axis=1)
    if alpha != 0.0:
        out = out + alpha * ((actions - goal) ** 2).sum(axis=1)
    return out


def sample_sequences(plan_state: PlanState, config: PlannerConfig, rng: np.random.Generator) -> np.ndarray:
    """N candidates around the mean with temporally correlated noise.

    u_h = beta * eps_h + (1 - beta) * u_{h-1}, u_{-1} = 0, eps ~ N(0, sigma^2);
    candidates are clamped to the action bounds.
    """
    eps = rng.normal(0.0, config.sigma, size=(config.n_samples, config.horizon))
    u = np.empty_like(eps)
    u[:, 0] = config.beta * eps[:, 0]
    for h in range(1, config.horizon):
        u[:, h] = config.beta * eps[:, h] + (1.0 - config.beta) * u[:, h - 1]
    return np.clip(plan_state.mean[None, :] + u, config.action_low, config.action_high)


def update_mean(candidates: np.ndarray, costs: np.ndarray, gamma: float) -> np.ndarray:
    """Exponentiated-cost soft average of all candidates.

    Weights are exp(-gamma * (cost - min cost)); the min subtraction keeps the
    exponentials bounded and makes a constant cost offset drop out exactly.
    The delta form below returns candidates[0] bitwise when all candidates
    coincide (the sigma = 0 degenerate case).
    """
    costs = np.asarray(costs, dtype=np.float64)
    w = np.exp(-gamma * (costs - costs.min()))
    w /= w.sum()
    base = candidates[0]
    return base + w @ (candidates - base[None, :])


def plan(
    predictor,
    obs_flat,
    plan_state: PlanState,
    config: PlannerConfig,
    rng: np.random.Generator,
) -> tuple[float, PlanState, PlanDiagnostics]:
    """One receding-horizon control step.

    predictor(obs_flat, candidates (N, H)) must return per-step disengagement
    probabilities (N, H).  Returns the action to execute, the shifted
    PlanState for the next step, and the final iteration's diagnostics.
    """
    config.validate()
    mean = np.asarray(plan_state.mean, dtype=np.float64).copy()
    for _ in range(config.iterations):
        cands = sample_sequences(PlanState(mean, plan_state.prev_noise), config, rng)
        probs = predictor(obs_flat, cands)
        costs = cost_batch(probs, cands, config.alpha, config.goal)
        noise = cands - mean[None, :]
        mean = update_mean(cands, costs, config.gamma)
        w = np.exp(-config.gamma * (costs - costs.min()))
        soft_noise = (w / w.sum()) @ noise
    chosen = float(mean[0])
    next_mean = np.concatenate([mean[1:], mean[-1:]])
    next_noise = np.concatenate([soft_noise[1:], soft_noise[-1:]])
    return chosen, PlanState(next_mean, next_noise), PlanDiagnostics(
        candidates=cands, probs=probs, costs=costs, mean=mean, chosen=chosen
    )


def brute_force_plan(
    predictor,
    obs_flat,
    action_grid,
    horizon: int,
    alpha: float = 0.0,
    goal: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Exhaustive minimization over a discrete action grid (test oracle).

    Ties break lexicographically over the grid-index tuple, i.e. the first
    minimum in enumeration order wins.
    """
    grid = list(action_grid)
    total = len(grid) ** horizon
    if total > BRUTE_FORCE_GUARD:
        raise ValueError(f"{len(grid)}^{horizon} = {total} sequences exceeds the enumeration guard")
    cands = np.array(list(itertools.product(grid, repeat=horizon)), dtype=np.float64)
    best_cost = np.inf
    best = None
    for lo in range(0, len(cands), 8192):
        chunk = cands[lo : lo + 8192]
        probs = predictor(obs_flat, chunk)
        costs = cost_batch(probs, chunk, alpha, goal)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best = chunk[k].copy()
    return best, best_cost


# ---------------------------------------------------------------------------
# predictors
# ---------------------------------------------------------------------------

class LearnedPredictor:
    """Adapts trained model parameters to the planner's predictor interface."""

    def __init__(self, params: dict):
        self.params = params

    def __call__(self, obs_flat, candidates: np.ndarray) -> np.ndarray:
        return modelmod.predict_batch(self.params, obs_flat, candidates)


class OraclePredictor:
    """Idealized predictor that forward-simulates the disengagement oracle.

    Peeks at the true world and robot state, so it upper-bounds what the
    learned model could achieve.
    """

    def __init__(self, world, state):
        self.world = world
        self.state = state

    def __call__(self, obs_flat, candidates: np.ndarray) -> np.ndarray:
        _pos, disengaged = sim.simulate_action_paths(self.world, self.state, candidates)
        return disengaged
