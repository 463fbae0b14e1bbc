"""Procedural sidewalk corridor worlds and the geometric queries built on them.

A world is a meandering centerline with a sidewalk band around it, a street
strip on one side, driveway cut-ins on the other, and circular obstacles
inside the sidewalk.  All terrain queries reduce to curvilinear coordinates
(arc length along the centerline, signed lateral offset from it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

# terrain classes, also the digits used in serialized observation grids
SIDEWALK = 0
STREET = 1
DRIVEWAY = 2
OBSTACLE = 3
OFFMAP = 4
N_TERRAIN_CLASSES = 5
TERRAIN_NAMES = ("sidewalk", "street", "driveway", "obstacle", "offmap")

CENTERLINE_SPACING_M = 0.25   # uniform vertex spacing after resampling
WALK_SEGMENT_M = 1.0          # heading random-walk step length
DRIVEWAY_DEPTH_M = 6.0        # how far driveways extend away from the sidewalk
OBSTACLE_RADIUS_RANGE_M = (0.15, 0.35)
OBSTACLE_MIN_ARC_GAP_M = 2.5  # longitudinal spacing between obstacles
HEDGE_RADIUS_M = 0.15
PLACEMENT_ATTEMPTS = 100

WORLD_FORMAT = "world.v1"


class WorldGenerationError(RuntimeError):
    """Raised when a spec cannot be realized as a feasible world."""


@dataclass(frozen=True)
class WorldSpec:
    """Parameters of one procedurally generated sidewalk world."""

    seed: int = 0
    length_m: float = 250.0
    sidewalk_width_m: float = 1.5
    max_curvature: float = 0.3        # rad per meter of centerline
    obstacle_density: float = 1.2     # obstacles per 100 m
    driveway_rate: float = 3.0        # driveways per 100 m
    driveway_width_m: float = 2.5
    street_side: str = "right"
    robot_radius_m: float = 0.21
    feasibility_margin_m: float = 0.1
    # 0 disables the hedge barrier lining the house-side edge between
    # driveways (fences/foliage); > 0 gives the circle spacing in meters
    hedge_spacing_m: float = 0.0

    def validate(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.length_m <= 0:
            raise ValueError("length_m must be positive")
        min_width = 2.0 * (self.robot_radius_m + self.feasibility_margin_m)
        if self.sidewalk_width_m <= min_width:
            raise ValueError(
                f"sidewalk_width_m={self.sidewalk_width_m} must exceed "
                f"2*(robot_radius_m + feasibility_margin_m)={min_width}"
            )
        if self.max_curvature < 0:
            raise ValueError("max_curvature must be non-negative")
        # the robot turns at most A_MAX per DX step; the centerline must be followable
        from .sim import A_MAX, DX

        if self.max_curvature * DX >= A_MAX:
            raise ValueError(
                f"max_curvature*DX={self.max_curvature * DX} must stay below a_max={A_MAX}"
            )
        if self.obstacle_density < 0 or self.driveway_rate < 0:
            raise ValueError("densities must be non-negative")
        if self.driveway_width_m <= 0:
            raise ValueError("driveway_width_m must be positive")
        if self.street_side not in ("left", "right"):
            raise ValueError(f"street_side must be 'left' or 'right', got {self.street_side!r}")
        if self.robot_radius_m <= 0 or self.feasibility_margin_m < 0:
            raise ValueError("robot_radius_m must be positive, feasibility_margin_m non-negative")
        if self.hedge_spacing_m < 0:
            raise ValueError("hedge_spacing_m must be non-negative")
        if self.hedge_spacing_m > 0:
            clearance = self.robot_radius_m + self.feasibility_margin_m
            if self.sidewalk_width_m / 2.0 < HEDGE_RADIUS_M + clearance + 0.02:
                raise ValueError("sidewalk too narrow to host the hedge barrier")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown WorldSpec keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class World:
    """Immutable world geometry plus cached query structures.

    ``driveways`` rows are curvilinear rectangles (arc_start, arc_end,
    lat_near, lat_far) measured on the house side of the sidewalk, so they
    border the sidewalk edge exactly and never overlap its interior.
    """

    spec: WorldSpec
    centerline: np.ndarray    # (M, 2) vertices, uniform spacing
    arc: np.ndarray           # (M,) cumulative arc length of each vertex
    obstacles: np.ndarray     # (K, 3) of x, y, radius; empty -> shape (0, 3)
    driveways: np.ndarray     # (J, 4) curvilinear rects; empty -> shape (0, 4)
    _tree: cKDTree = field(repr=False, compare=False, default=None)
    _seg_tangents: np.ndarray = field(repr=False, compare=False, default=None)
    _seg_lengths: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        for arr_name in ("centerline", "arc", "obstacles", "driveways"):
            arr = getattr(self, arr_name)
            object.__setattr__(self, arr_name, np.ascontiguousarray(arr, dtype=np.float64))
        object.__setattr__(self, "_tree", cKDTree(self.centerline))
        diffs = np.diff(self.centerline, axis=0)
        lengths = np.hypot(diffs[:, 0], diffs[:, 1])
        object.__setattr__(self, "_seg_lengths", lengths)
        object.__setattr__(self, "_seg_tangents", diffs / lengths[:, None])

    @property
    def length_m(self) -> float:
        return float(self.arc[-1])

    @property
    def street_sign(self) -> float:
        # lateral offset is positive to the left of the direction of travel
        return -1.0 if self.spec.street_side == "right" else 1.0

    @property
    def house_sign(self) -> float:
        return -self.street_sign

    def point_at_arc(self, s: float) -> tuple[np.ndarray, float]:
        """Return (position, heading) of the centerline point at arc length s."""
        s = float(np.clip(s, 0.0, self.length_m))
        idx = min(int(np.searchsorted(self.arc, s, side="right")) - 1, len(self._seg_lengths) - 1)
        idx = max(idx, 0)
        t = (s - self.arc[idx]) / self._seg_lengths[idx]
        p = self.centerline[idx] + t * (self.centerline[idx + 1] - self.centerline[idx])
        tangent = self._seg_tangents[idx]
        return p, math.atan2(tangent[1], tangent[0])


def _resample_uniform(points: np.ndarray, spacing: float) -> np.ndarray:
    """Resample a polyline at near-uniform arc-length spacing (keeps both endpoints)."""
    seg = np.diff(points, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    n = int(round(total / spacing))
    s_new = np.linspace(0.0, total, n + 1)
    x = np.interp(s_new, cum, points[:, 0])
    y = np.interp(s_new, cum, points[:, 1])
    return np.column_stack([x, y])


def _chord_arc(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length of a polyline's own chords."""
    seg = np.diff(points, axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])


def _min_distance_to_polyline(world_pts: np.ndarray, p: np.ndarray) -> float:
    """Exact minimum distance from point p to the polyline given by world_pts."""
    a = world_pts[:-1]
    b = world_pts[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = p - proj
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", d, d))))


def generate_world(spec: WorldSpec) -> World:
    """Deterministically generate a feasible world from its spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    # centerline: heading random walk, one segment per meter, then resample
    n_segs = max(2, int(round(spec.length_m / WALK_SEGMENT_M)))
    increments = rng.uniform(
        -spec.max_curvature * WALK_SEGMENT_M, spec.max_curvature * WALK_SEGMENT_M, size=n_segs
    )
    headings = np.concatenate([[0.0], np.cumsum(increments)])[:-1]
    steps = WALK_SEGMENT_M * np.column_stack([np.cos(headings), np.sin(headings)])
    raw = np.concatenate([[[0.0, 0.0]], np.cumsum(steps, axis=0)])
    centerline = _resample_uniform(raw, CENTERLINE_SPACING_M)
    arc = _chord_arc(centerline)
    length = float(arc[-1])

    half_w = spec.sidewalk_width_m / 2.0
    clearance = spec.robot_radius_m + spec.feasibility_margin_m

    # obstacles: rejection-sampled so the centerline corridor stays free
    n_obstacles = int(round(spec.obstacle_density * length / 100.0))
    margin_arc = min(3.0, 0.1 * length)
    obstacles = []
    obstacle_arcs = []
    for _ in range(n_obstacles):
        for _attempt in range(PLACEMENT_ATTEMPTS):
            s = rng.uniform(margin_arc, length - margin_arc)
            lat = rng.uniform(-half_w, half_w)
            radius = rng.uniform(*OBSTACLE_RADIUS_RANGE_M)
            if abs(lat) < radius + clearance:
                continue  # would block the centerline corridor
            if any(abs(s - s0) < OBSTACLE_MIN_ARC_GAP_M for s0 in obstacle_arcs):
                continue
            pos, heading = _point_heading_at(centerline, arc, s)
            normal = np.array([-math.sin(heading), math.cos(heading)])
            center = pos + lat * normal
            # curvature can pull other parts of the track closer than the local frame says
            if _min_distance_to_polyline(centerline, center) < radius + clearance:
                continue
            obstacles.append([center[0], center[1], radius])
            obstacle_arcs.append(s)
            break
        # attempts exhausted: drop this obstacle

    # driveways: curvilinear rectangles on the house side
    n_driveways = int(round(spec.driveway_rate * length / 100.0))
    dw_margin = min(5.0, 0.1 * length)
    dw_half = spec.driveway_width_m / 2.0
    driveways = []
    min_gap = spec.driveway_width_m + 1.5
    for _ in range(n_driveways):
        for _attempt in range(PLACEMENT_ATTEMPTS):
            s = rng.uniform(dw_margin, length - dw_margin)
            if any(abs(s - 0.5 * (d[0] + d[1])) < min_gap for d in driveways):
                continue
            driveways.append([s - dw_half, s + dw_half, half_w, half_w + DRIVEWAY_DEPTH_M])
            break
    driveways.sort(key=lambda d: d[0])

    # hedge barrier: fence/foliage circles lining the house-side edge except
    # across driveway mouths, so leaving the sidewalk always has a cost
    if spec.hedge_spacing_m > 0:
        lat = max(HEDGE_RADIUS_M + clearance + 0.02, half_w - 0.25)
        lat = min(lat, half_w)
        s = 2.0
        while s < length - 2.0:
            if not any(d[0] - 0.3 <= s <= d[1] + 0.3 for d in driveways):
                pos, heading = _point_heading_at(centerline, arc, s)
                normal = np.array([-math.sin(heading), math.cos(heading)])
                house = -1.0 if spec.street_side == "left" else 1.0
                center = pos + house * lat * normal
                if _min_distance_to_polyline(centerline, center) >= HEDGE_RADIUS_M + clearance:
                    obstacles.append([center[0], center[1], HEDGE_RADIUS_M])
            s += spec.hedge_spacing_m

    world = World(
        spec=spec,
        centerline=centerline,
        arc=arc,
        obstacles=np.array(obstacles, dtype=np.float64).reshape(-1, 3),
        driveways=np.array(driveways, dtype=np.float64).reshape(-1, 4),
    )
    ok, why = check_feasibility(world)
    if not ok:
        raise WorldGenerationError(f"spec seed={spec.seed} produced an infeasible world: {why}")
    return world


def _point_heading_at(centerline: np.ndarray, arc: np.ndarray, s: float):
    idx = max(0, min(int(np.searchsorted(arc, s, side="right")) - 1, len(centerline) - 2))
    seg = centerline[idx + 1] - centerline[idx]
    seglen = math.hypot(seg[0], seg[1])
    t = (s - arc[idx]) / seglen
    return centerline[idx] + t * seg, math.atan2(seg[1], seg[0])


def check_feasibility(world: World) -> tuple[bool, str]:
    """Verify the collision-free corridor around the centerline.

    Every obstacle must keep (radius + robot_radius + margin) clear of the
    centerline polyline, and the sidewalk must be wide enough for the robot.
    """
    spec = world.spec
    clearance = spec.robot_radius_m + spec.feasibility_margin_m
    if spec.sidewalk_width_m / 2.0 < clearance:
        return False, "sidewalk narrower than the robot corridor"
    for x, y, r in world.obstacles:
        d = _min_distance_to_polyline(world.centerline, np.array([x, y]))
        if d < r + clearance:
            return False, f"obstacle at ({x:.2f},{y:.2f}) r={r:.2f} blocks the corridor (d={d:.3f})"
    return True, ""


# ---------------------------------------------------------------------------
# curvilinear queries
# ---------------------------------------------------------------------------

def _project_to_segments(world: World, p: np.ndarray, seg_idx: np.ndarray):
    """Project p onto the given centerline segments; return (dist2, arc, proj, tangent)."""
    a = world.centerline[seg_idx]
    tang = world._seg_tangents[seg_idx]
    lens = world._seg_lengths[seg_idx]
    rel = p[None, :] - a
    t = np.clip(np.einsum("ij,ij->i", rel, tang), 0.0, lens)
    proj = a + t[:, None] * tang
    d = p[None, :] - proj
    dist2 = np.einsum("ij,ij->i", d, d)
    arcs = world.arc[seg_idx] + t
    return dist2, arcs, proj, tang


def nearest_centerline(world: World, p) -> tuple[float, tuple[float, float, float]]:
    """Closest centerline point to p.

    Returns (arc_length, (x, y, heading)) with the heading tangent to the
    centerline.  Exact even near self-approaching track sections: candidate
    segments are taken from every vertex within the provable search radius.
    Equidistant candidates resolve to the smaller arc length.
    """
    p = np.asarray(p, dtype=np.float64)
    d1, _ = world._tree.query(p)
    hits = world._tree.query_ball_point(p, d1 + CENTERLINE_SPACING_M + 1e-9)
    seg_idx = set()
    last = len(world._seg_lengths) - 1
    for v in hits:
        if v > 0:
            seg_idx.add(v - 1)
        if v <= last:
            seg_idx.add(min(v, last))
    seg_idx = np.fromiter(sorted(seg_idx), dtype=np.int64)
    dist2, arcs, proj, tang = _project_to_segments(world, p, seg_idx)
    best = np.min(dist2)
    tied = np.flatnonzero(dist2 <= best + 1e-12)
    k = tied[np.argmin(arcs[tied])]
    heading = math.atan2(tang[k][1], tang[k][0])
    return float(arcs[k]), (float(proj[k][0]), float(proj[k][1]), heading)


def curvilinear_batch(world: World, pts: np.ndarray, k: int = 8):
    """Curvilinear coordinates of many points at once.

    Returns (arc, signed_lateral, dist) arrays; signed_lateral is positive to
    the left of the direction of travel, dist is the true euclidean distance
    to the polyline.  Uses the k nearest vertices per point, which is exact
    except at points near-equidistant to two separated track sections.
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    k = min(k, len(world.centerline))
    _, vidx = world._tree.query(pts, k=k)
    if k == 1:
        vidx = vidx[:, None]
    last = len(world._seg_lengths) - 1
    # both segments adjacent to each candidate vertex
    segs = np.concatenate([np.clip(vidx - 1, 0, last), np.clip(vidx, 0, last)], axis=1)

    a = world.centerline[segs]              # (n, 2k, 2)
    tang = world._seg_tangents[segs]
    lens = world._seg_lengths[segs]
    rel = pts[:, None, :] - a
    t = np.clip(np.einsum("nkj,nkj->nk", rel, tang), 0.0, lens)
    proj = a + t[..., None] * tang
    d = pts[:, None, :] - proj
    dist2 = np.einsum("nkj,nkj->nk", d, d)
    arcs = world.arc[segs] + t

    # prefer the smaller arc among near-ties
    best = np.min(dist2, axis=1, keepdims=True)
    arcs_masked = np.where(dist2 <= best + 1e-12, arcs, np.inf)
    pick = np.argmin(arcs_masked, axis=1)
    rows = np.arange(n)
    tang_b = tang[rows, pick]
    d_b = d[rows, pick]
    cross = tang_b[:, 0] * d_b[:, 1] - tang_b[:, 1] * d_b[:, 0]
    dist = np.sqrt(dist2[rows, pick])
    return arcs[rows, pick], np.copysign(dist, cross), dist


def classify_points(world: World, pts: np.ndarray) -> np.ndarray:
    """Terrain class for each point, honoring obstacle > street > driveway >
    sidewalk > offmap priority."""
    pts = np.asarray(pts, dtype=np.float64)
    arc, lateral, dist = curvilinear_batch(world, pts)
    half_w = world.spec.sidewalk_width_m / 2.0

    out = np.full(len(pts), OFFMAP, dtype=np.uint8)
    out[dist <= half_w] = SIDEWALK

    street_mask = (dist > half_w) & (np.sign(lateral) == world.street_sign)
    out[street_mask] = STREET

    house_lat = lateral * world.house_sign
    for s0, s1, d0, d1 in world.driveways:
        m = (arc >= s0) & (arc <= s1) & (house_lat > d0) & (house_lat <= d1)
        out[m] = DRIVEWAY

    if len(world.obstacles):
        delta = pts[:, None, :] - world.obstacles[None, :, :2]
        inside = np.einsum("nkj,nkj->nk", delta, delta) < world.obstacles[None, :, 2] ** 2
        out[inside.any(axis=1)] = OBSTACLE
    return out


def classify_point(world: World, p) -> int:
    """Terrain class of a single point."""
    return int(classify_points(world, np.asarray(p, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# serialization (world.v1)
# ---------------------------------------------------------------------------

def driveway_quads(world: World) -> np.ndarray:
    """World-frame corner quads of each driveway, for rendering."""
    quads = []
    for s0, s1, d0, d1 in world.driveways:
        p0, h0 = world.point_at_arc(s0)
        p1, h1 = world.point_at_arc(s1)
        n0 = world.house_sign * np.array([-math.sin(h0), math.cos(h0)])
        n1 = world.house_sign * np.array([-math.sin(h1), math.cos(h1)])
        quads.append([p0 + d0 * n0, p1 + d0 * n1, p1 + d1 * n1, p0 + d1 * n0])
    return np.array(quads, dtype=np.float64).reshape(-1, 4, 2)


def sidewalk_polygon(world: World) -> np.ndarray:
    """Closed polygon of the sidewalk band (left edge out, right edge back)."""
    half_w = world.spec.sidewalk_width_m / 2.0
    tang = np.empty_like(world.centerline)
    tang[:-1] = world._seg_tangents
    tang[-1] = world._seg_tangents[-1]
    normals = np.column_stack([-tang[:, 1], tang[:, 0]])
    left = world.centerline + half_w * normals
    right = world.centerline - half_w * normals
    return np.concatenate([left, right[::-1]])


def world_to_dict(world: World) -> dict:
    return {
        "format": WORLD_FORMAT,
        "spec": world.spec.to_dict(),
        "centerline": world.centerline.tolist(),
        "obstacles": world.obstacles.tolist(),
        "driveways": world.driveways.tolist(),
        "driveway_quads": driveway_quads(world).tolist(),
        "sidewalk_polygon": sidewalk_polygon(world).tolist(),
    }


def world_from_dict(d: dict) -> World:
    if d.get("format") != WORLD_FORMAT:
        raise ValueError(f"expected format {WORLD_FORMAT!r}, got {d.get('format')!r}")
    centerline = np.asarray(d["centerline"], dtype=np.float64)
    arc = _chord_arc(centerline)
    return World(
        spec=WorldSpec.from_dict(d["spec"]),
        centerline=centerline,
        arc=arc,
        obstacles=np.asarray(d["obstacles"], dtype=np.float64).reshape(-1, 3),
        driveways=np.asarray(d["driveways"], dtype=np.float64).reshape(-1, 4),
    )
