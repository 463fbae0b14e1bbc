"""Robot kinematics, egocentric terrain observations, the disengagement
oracle that stands in for the human monitor, and the reset maneuver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import world as worldmod
from .world import (
    DRIVEWAY,
    N_TERRAIN_CLASSES,
    OBSTACLE,
    OFFMAP,
    SIDEWALK,
    STREET,
    World,
    classify_point,
    classify_points,
    curvilinear_batch,
    nearest_centerline,
)

DX = 0.5                 # meters advanced per step
A_MAX = 0.4              # max |heading change| per step, rad
GRID_SIDE = 24           # observation grid cells per side
GRID_EXTENT_M = 6.0      # observation square side, meters
RESET_ADVANCE_M = 1.0    # how far past the hazard the reset places the robot
WORLD_END_MARGIN_M = 2.0 # progress beyond length - margin ends a rollout

CAUSE_COLLISION = "collision"
CAUSE_STREET = "street"
CAUSE_DRIVEWAY = "driveway"


class ResetPreconditionError(ValueError):
    """reset_maneuver called on a state that is not disengaged."""


class InfeasibleResetError(RuntimeError):
    """The post-reset pose is itself disengaged; indicates a broken world."""


def wrap_heading(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def clamp_action(a: float) -> float:
    return min(A_MAX, max(-A_MAX, float(a)))


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float        # rad, wrapped to (-pi, pi]
    progress_m: float     # arc length of the nearest centerline point


@dataclass(frozen=True)
class Observation:
    """Egocentric terrain grid: GRID_SIDE x GRID_SIDE cell classes.

    Row index grows with forward distance (row 0 nearest the robot), column
    index grows from the robot's left (+lateral) to its right.
    """

    classes: np.ndarray   # (GRID_SIDE, GRID_SIDE) uint8

    def one_hot(self) -> np.ndarray:
        out = np.zeros((GRID_SIDE, GRID_SIDE, N_TERRAIN_CLASSES), dtype=np.float64)
        g = self.classes
        for c in range(N_TERRAIN_CLASSES):
            out[:, :, c] = g == c
        return out

    def flat(self) -> np.ndarray:
        return self.one_hot().reshape(-1)

    def digits(self) -> str:
        return "".join(chr(ord("0") + v) for v in self.classes.reshape(-1))

    @classmethod
    def from_digits(cls, s: str) -> "Observation":
        if len(s) != GRID_SIDE * GRID_SIDE:
            raise ValueError(f"observation string must have {GRID_SIDE * GRID_SIDE} digits")
        vals = np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")
        if vals.max(initial=0) >= N_TERRAIN_CLASSES:
            raise ValueError("observation digits must be 0..4")
        return cls(classes=vals.reshape(GRID_SIDE, GRID_SIDE).copy())


@dataclass(frozen=True)
class DisengagementEvent:
    cause: str            # collision | street | driveway
    state_at_event: RobotState
    step_index: int


def start_state(world: World, arc: float = 1.0) -> RobotState:
    """Robot placed on the centerline at the given arc, heading tangent."""
    p, heading = world.point_at_arc(arc)
    return RobotState(float(p[0]), float(p[1]), wrap_heading(heading), float(min(arc, world.length_m)))


def step(world: World, state: RobotState, action: float) -> RobotState:
    """Apply a heading change, advance DX, refresh progress."""
    heading = wrap_heading(state.heading + clamp_action(action))
    x = state.x + DX * math.cos(heading)
    y = state.y + DX * math.sin(heading)
    arc, _pose = nearest_centerline(world, (x, y))
    return RobotState(x, y, heading, arc)


# cell centers in the robot frame: x forward [0, 6), y lateral; precomputed once
def _cell_centers() -> np.ndarray:
    cell = GRID_EXTENT_M / GRID_SIDE
    fwd = (np.arange(GRID_SIDE) + 0.5) * cell
    lat = GRID_EXTENT_M / 2.0 - (np.arange(GRID_SIDE) + 0.5) * cell
    fx, ly = np.meshgrid(fwd, lat, indexing="ij")
    return np.stack([fx, ly], axis=-1).reshape(-1, 2)

_CELLS = _cell_centers()


def render_observation(world: World, state: RobotState) -> Observation:
    """Classify every grid cell center in the world frame."""
    c, s = math.cos(state.heading), math.sin(state.heading)
    pts = np.empty_like(_CELLS)
    pts[:, 0] = state.x + _CELLS[:, 0] * c - _CELLS[:, 1] * s
    pts[:, 1] = state.y + _CELLS[:, 0] * s + _CELLS[:, 1] * c
    classes = classify_points(world, pts)
    return Observation(classes=classes.reshape(GRID_SIDE, GRID_SIDE))


def check_disengagement(world: World, state: RobotState, margin_m: float = 0.0) -> str | None:
    """Cause of disengagement at this state, or None.

    Collision uses the full robot footprint; street and driveway trigger on
    the robot center crossing the region boundary.  A positive margin models
    a monitor who disengages before the failure region is actually entered.
    """
    p = np.array([state.x, state.y])
    r_rob = world.spec.robot_radius_m
    if len(world.obstacles):
        d = np.hypot(*(p - world.obstacles[:, :2]).T)
        if np.any(d < world.obstacles[:, 2] + r_rob + margin_m):
            return CAUSE_COLLISION
    if margin_m == 0.0:
        cls = classify_point(world, p)
        if cls == STREET:
            return CAUSE_STREET
        if cls == DRIVEWAY:
            return CAUSE_DRIVEWAY
        return None
    # inflated region boundaries for the preemptive variant
    arc, lateral, dist = curvilinear_batch(world, p[None, :])
    half_w = world.spec.sidewalk_width_m / 2.0
    if dist[0] > half_w - margin_m:
        if np.sign(lateral[0]) == world.street_sign:
            return CAUSE_STREET
        house_lat = lateral[0] * world.house_sign
        for s0, s1, d0, d1 in world.driveways:
            if s0 - margin_m <= arc[0] <= s1 + margin_m and house_lat <= d1 + margin_m:
                return CAUSE_DRIVEWAY
    return None


def reset_maneuver(world: World, state: RobotState) -> RobotState:
    """Reposition a disengaged robot onto the centerline, a bit past the hazard."""
    cause = check_disengagement(world, state)
    if cause is None:
        raise ResetPreconditionError("reset_maneuver requires a disengaged state")
    arc, _pose = nearest_centerline(world, (state.x, state.y))
    target = min(arc + RESET_ADVANCE_M, world.length_m)
    p, heading = world.point_at_arc(target)
    new_state = RobotState(float(p[0]), float(p[1]), wrap_heading(heading), target)
    if check_disengagement(world, new_state) is not None:
        raise InfeasibleResetError(
            f"post-reset pose at arc {target:.2f} is disengaged; world generation bug"
        )
    return new_state


# ---------------------------------------------------------------------------
# vectorized candidate rollouts (oracle predictions, path overlays)
# ---------------------------------------------------------------------------

def simulate_action_paths(world: World, state: RobotState, actions: np.ndarray):
    """Roll N candidate action sequences forward through the kinematics.

    actions: (N, H).  Returns (positions (N, H, 2), disengaged (N, H) float)
    where disengaged is the absorbing 0/1 indicator of the oracle firing at
    or before each step.
    """
    acts = np.clip(np.asarray(actions, dtype=np.float64), -A_MAX, A_MAX)
    n, h = acts.shape
    headings = state.heading + np.cumsum(acts, axis=1)
    dx = DX * np.cos(headings)
    dy = DX * np.sin(headings)
    pos = np.empty((n, h, 2))
    pos[:, :, 0] = state.x + np.cumsum(dx, axis=1)
    pos[:, :, 1] = state.y + np.cumsum(dy, axis=1)

    flat = pos.reshape(-1, 2)
    hit = np.zeros(len(flat), dtype=bool)
    if len(world.obstacles):
        delta = flat[:, None, :] - world.obstacles[None, :, :2]
        d2 = np.einsum("nkj,nkj->nk", delta, delta)
        reach = (world.obstacles[:, 2] + world.spec.robot_radius_m) ** 2
        hit |= (d2 < reach[None, :]).any(axis=1)
    cls = classify_points(world, flat)
    hit |= (cls == STREET) | (cls == DRIVEWAY)
    disengaged = np.maximum.accumulate(hit.reshape(n, h).astype(np.float64), axis=1)
    return pos, disengaged
