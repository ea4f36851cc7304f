"""Flat 2D sandbox: rectangular Ackermann robots, disc/box obstacles,
social-force pedestrians, raycast occupancy windows, collision tests.

Stepping is deterministic — the only randomness lives in scenario
generation (scenarios.py). A WorldState has a single owner; run many
worlds for parallelism, never one world from two threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .geometry import Pose2D, global_to_local, wrap_angle

V_MAX = 0.6
THETA_MAX = 0.785

FREE = 0.0
UNKNOWN = 0.5
OCCUPIED = 1.0

# social force constants (Helbing-style, scaled to walking-pace entities)
TAU_RELAX = 0.5
SFM_A = 2.0
SFM_B = 0.3
SFM_SPEED_CAP = 1.3   # times desired speed
SFM_GOAL_EPS = 0.05


@dataclass(frozen=True)
class RobotState:
    pose: Pose2D
    v: float = 0.0
    theta: float = 0.0
    length: float = 0.3
    width: float = 0.2
    wheelbase: float = 0.25

    def __post_init__(self):
        if not (-1e-9 <= self.v <= V_MAX + 1e-9):
            raise ValueError(f"v={self.v} outside [0, {V_MAX}]")
        if abs(self.theta) > THETA_MAX + 1e-9:
            raise ValueError(f"theta={self.theta} outside +-{THETA_MAX}")


@dataclass(frozen=True)
class Circle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Rect:
    center: np.ndarray
    half_extents: np.ndarray
    rotation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if np.any(self.half_extents <= 0.0):
            raise ValueError("half extents must be positive")


@dataclass
class Pedestrian:
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    home: np.ndarray          # the opposite endpoint; goal/home swap on arrival
    desired_speed: float = 0.4
    radius: float = 0.2

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        self.home = np.asarray(self.home, dtype=float)
        if self.desired_speed <= 0.0 or self.radius <= 0.0:
            raise ValueError("desired_speed and radius must be positive")


@dataclass
class WorldState:
    robots: list[RobotState]
    goals: list[Pose2D]
    obstacles: list = field(default_factory=list)
    pedestrians: list[Pedestrian] = field(default_factory=list)
    dt: float = 0.1
    time: float = 0.0
    seed: int | None = None
    kind: str | None = None

    def copy(self) -> "WorldState":
        return WorldState(
            robots=list(self.robots),
            goals=list(self.goals),
            obstacles=list(self.obstacles),
            pedestrians=[Pedestrian(p.position.copy(), p.velocity.copy(), p.goal.copy(),
                                    p.home.copy(), p.desired_speed, p.radius)
                         for p in self.pedestrians],
            dt=self.dt, time=self.time, seed=self.seed, kind=self.kind,
        )


class RelativeGoal(NamedTuple):
    xg: float
    yg: float
    alphag: float


@dataclass(frozen=True)
class CostmapConfig:
    size: int = 84
    resolution: float = 0.05
    max_range: float = 4.0
    n_beams: int = 181


@dataclass(frozen=True)
class Costmap:
    grid: np.ndarray     # (size, size) float32 in {0.0, 0.5, 1.0}
    resolution: float


# -- kinematics ----------------------------------------------------------------

def kinematic_step(s: RobotState, v_cmd: float, theta_cmd: float, dt: float) -> RobotState:
    """Bicycle-model update with commands clamped to the actuator limits."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v = min(max(v_cmd, 0.0), V_MAX)
    theta = min(max(theta_cmd, -THETA_MAX), THETA_MAX)
    x = s.pose.x + v * math.cos(s.pose.alpha) * dt
    y = s.pose.y + v * math.sin(s.pose.alpha) * dt
    alpha = wrap_angle(s.pose.alpha + (v / s.wheelbase) * math.tan(theta) * dt)
    return replace(s, pose=Pose2D(x, y, alpha), v=v, theta=theta)


# -- footprints and collision ---------------------------------------------------

def _obb(pose: Pose2D, length: float, width: float):
    c, s = math.cos(pose.alpha), math.sin(pose.alpha)
    center = np.array([pose.x, pose.y])
    axes = np.array([[c, s], [-s, c]])
    half = np.array([length / 2.0, width / 2.0])
    return center, axes, half


def footprint_corners(pose: Pose2D, length: float = 0.3, width: float = 0.2) -> np.ndarray:
    center, axes, half = _obb(pose, length, width)
    signs = np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]], dtype=float)
    return center + (signs * half) @ axes


def footprint_rect(robot: RobotState) -> Rect:
    return Rect(np.array([robot.pose.x, robot.pose.y]),
                np.array([robot.length / 2.0, robot.width / 2.0]),
                robot.pose.alpha)


def _obb_circle_hit(center, axes, half, c_center, c_radius) -> bool:
    d = axes @ (np.asarray(c_center, dtype=float) - center)
    gap = d - np.clip(d, -half, half)
    return float(gap @ gap) <= c_radius * c_radius    # boundary contact collides


def _obb_obb_hit(c1, ax1, h1, c2, ax2, h2) -> bool:
    t = c2 - c1
    for axis in (*ax1, *ax2):
        ra = h1[0] * abs(ax1[0] @ axis) + h1[1] * abs(ax1[1] @ axis)
        rb = h2[0] * abs(ax2[0] @ axis) + h2[1] * abs(ax2[1] @ axis)
        if abs(t @ axis) > ra + rb:
            return False
    return True


def _rect_obb(rect: Rect):
    c, s = math.cos(rect.rotation), math.sin(rect.rotation)
    return rect.center, np.array([[c, s], [-s, c]]), rect.half_extents


def collision_at(world: WorldState, pose: Pose2D, length: float = 0.3,
                 width: float = 0.2, skip_robot: int | None = None) -> bool:
    """Would a footprint at this pose touch anything? Boundary contact counts."""
    center, axes, half = _obb(pose, length, width)
    for obs in world.obstacles:
        if isinstance(obs, Circle):
            if _obb_circle_hit(center, axes, half, obs.center, obs.radius):
                return True
        else:
            if _obb_obb_hit(center, axes, half, *_rect_obb(obs)):
                return True
    for ped in world.pedestrians:
        if _obb_circle_hit(center, axes, half, ped.position, ped.radius):
            return True
    for j, other in enumerate(world.robots):
        if j == skip_robot:
            continue
        if _obb_obb_hit(center, axes, half, *_obb(other.pose, other.length, other.width)):
            return True
    return False


def collision_check(world: WorldState, robot_index: int) -> bool:
    r = world.robots[robot_index]
    return collision_at(world, r.pose, r.length, r.width, skip_robot=robot_index)


# -- raycast sensing -------------------------------------------------------------

def _ray_circle(o, dirs, center, radius):
    """First-hit distance per ray, inf on miss; 0 when the origin is inside."""
    m = np.asarray(center, dtype=float) - o
    b = dirs @ m
    c2 = float(m @ m) - radius * radius
    disc = b * b - c2
    root = np.sqrt(np.maximum(disc, 0.0))
    t0 = b - root
    t1 = b + root
    t = np.where(t0 >= 0.0, t0, np.where(t1 >= 0.0, 0.0, np.inf))
    return np.where(disc >= 0.0, t, np.inf)


def _ray_rect(o, dirs, rect: Rect):
    """Slab test in the box frame, vectorized over rays."""
    center, rot, half = _rect_obb(rect)
    ob = rot @ (o - center)
    db = dirs @ rot.T
    tmin = np.full(len(dirs), -np.inf)
    tmax = np.full(len(dirs), np.inf)
    for k in (0, 1):
        d = db[:, k]
        parallel = np.abs(d) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-half[k] - ob[k]) / d
            tb = (half[k] - ob[k]) / d
        lo = np.minimum(ta, tb)
        hi = np.maximum(ta, tb)
        inside = abs(ob[k]) <= half[k]
        lo = np.where(parallel, -np.inf if inside else np.inf, lo)
        hi = np.where(parallel, np.inf if inside else -np.inf, hi)
        tmin = np.maximum(tmin, lo)
        tmax = np.minimum(tmax, hi)
    hit = tmax >= np.maximum(tmin, 0.0)
    return np.where(hit, np.maximum(tmin, 0.0), np.inf)


def first_hits(world: WorldState, origin, dirs, skip_robot: int | None = None):
    """min over every entity of the per-ray first-hit distance."""
    o = np.asarray(origin, dtype=float)
    t_hit = np.full(len(dirs), np.inf)
    for obs in world.obstacles:
        if isinstance(obs, Circle):
            t = _ray_circle(o, dirs, obs.center, obs.radius)
        else:
            t = _ray_rect(o, dirs, obs)
        t_hit = np.minimum(t_hit, t)
    for ped in world.pedestrians:
        t_hit = np.minimum(t_hit, _ray_circle(o, dirs, ped.position, ped.radius))
    for j, other in enumerate(world.robots):
        if j == skip_robot:
            continue
        t_hit = np.minimum(t_hit, _ray_rect(o, dirs, footprint_rect(other)))
    return t_hit


def render_costmap(world: WorldState, robot_index: int,
                   cfg: CostmapConfig = CostmapConfig()) -> Costmap:
    """Forward semicircle scan: traversed cells free, first hits occupied,
    everything a beam never reaches stays unknown.

    Grid layout: robot at center of the bottom row, +row = ahead, columns run
    left-to-right across the robot's view.
    """
    robot = world.robots[robot_index]
    o = np.array([robot.pose.x, robot.pose.y])
    betas = np.linspace(-np.pi / 2, np.pi / 2, cfg.n_beams)
    dirs = np.column_stack([np.cos(robot.pose.alpha + betas),
                            np.sin(robot.pose.alpha + betas)])
    t_hit = first_hits(world, o, dirs, skip_robot=robot_index)

    grid = np.full((cfg.size, cfg.size), UNKNOWN, dtype=np.float32)
    half_span = cfg.size / 2.0 * cfg.resolution

    # free pass: march in quarter-cell steps up to each beam's first hit
    ts = np.arange(0.0, cfg.max_range, cfg.resolution / 4.0)
    ll = ts[None, :] * np.cos(betas)[:, None]
    hh = ts[None, :] * np.sin(betas)[:, None]
    seen = ts[None, :] < np.minimum(t_hit, cfg.max_range)[:, None]
    rows = np.floor(ll / cfg.resolution).astype(int)
    cols = np.floor((half_span - hh) / cfg.resolution).astype(int)
    ok = seen & (rows >= 0) & (rows < cfg.size) & (cols >= 0) & (cols < cfg.size)
    grid[rows[ok], cols[ok]] = FREE

    # occupied pass overwrites: the cell containing each in-range hit point
    hit = t_hit <= cfg.max_range
    lh = t_hit[hit] * np.cos(betas[hit])
    hw = t_hit[hit] * np.sin(betas[hit])
    r = np.floor(lh / cfg.resolution).astype(int)
    c = np.floor((half_span - hw) / cfg.resolution).astype(int)
    ok = (r >= 0) & (r < cfg.size) & (c >= 0) & (c < cfg.size)
    grid[r[ok], c[ok]] = OCCUPIED

    # the ground under the robot itself is known free
    rr = np.arange(0, int(robot.length / 2.0 / cfg.resolution) + 2)
    cc = np.arange(0, cfg.size)
    l_c = (rr + 0.5) * cfg.resolution
    h_c = half_span - (cc + 0.5) * cfg.resolution
    grid[np.ix_(rr[l_c <= robot.length / 2.0], cc[np.abs(h_c) <= robot.width / 2.0])] = FREE

    return Costmap(grid, cfg.resolution)


# -- goals -----------------------------------------------------------------------

def relative_goal(pose: Pose2D, goal: Pose2D) -> RelativeGoal:
    xg, yg = global_to_local(pose, (goal.x, goal.y))
    return RelativeGoal(xg, yg, wrap_angle(goal.alpha - pose.alpha))


def reached_goal(pose: Pose2D, goal: Pose2D, radius: float = 0.3,
                 heading_tol: float = 0.5) -> bool:
    dx, dy = goal.x - pose.x, goal.y - pose.y
    return (dx * dx + dy * dy <= radius * radius
            and abs(wrap_angle(goal.alpha - pose.alpha)) <= heading_tol)


# -- pedestrians -------------------------------------------------------------------

def _repulsion(p, q, r_sum):
    d = p - q
    dist = float(np.hypot(d[0], d[1]))
    if dist < 1e-9:
        return np.zeros(2)
    return SFM_A * math.exp((r_sum - dist) / SFM_B) / dist * d


def _closest_on_rect(rect: Rect, p):
    center, rot, half = _rect_obb(rect)
    local = rot @ (p - center)
    return center + np.clip(local, -half, half) @ rot


def sfm_step(pedestrians: list[Pedestrian], obstacles, robots, dt: float):
    """Social-force update: goal attraction plus exponential repulsion from
    every neighbor; simultaneous force evaluation, then symplectic Euler."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    forces = []
    for ped in pedestrians:
        to_goal = ped.goal - ped.position
        dist = float(np.hypot(to_goal[0], to_goal[1]))
        v_des = ped.desired_speed / dist * to_goal if dist > SFM_GOAL_EPS else np.zeros(2)
        f = (v_des - ped.velocity) / TAU_RELAX
        for other in pedestrians:
            if other is not ped:
                f = f + _repulsion(ped.position, other.position, ped.radius + other.radius)
        for obs in obstacles:
            if isinstance(obs, Circle):
                f = f + _repulsion(ped.position, obs.center, ped.radius + obs.radius)
            else:
                f = f + _repulsion(ped.position, _closest_on_rect(obs, ped.position), ped.radius)
        for rob in robots:
            f = f + _repulsion(ped.position, _closest_on_rect(footprint_rect(rob), ped.position),
                               ped.radius)
        forces.append(f)
    for ped, f in zip(pedestrians, forces):
        v = ped.velocity + f * dt
        speed = float(np.hypot(v[0], v[1]))
        cap = SFM_SPEED_CAP * ped.desired_speed
        if speed > cap:
            v = v * (cap / speed)
        ped.velocity = v
        ped.position = ped.position + v * dt
    return pedestrians


def advance(world: WorldState, commands=None):
    """One dt for the whole world: commanded robots move, pedestrians flow,
    arrived pedestrians turn around."""
    if commands:
        for i, cmd in enumerate(commands):
            if cmd is not None:
                world.robots[i] = kinematic_step(world.robots[i], cmd[0], cmd[1], world.dt)
    if world.pedestrians:
        sfm_step(world.pedestrians, world.obstacles, world.robots, world.dt)
        for ped in world.pedestrians:
            if float(np.hypot(*(ped.goal - ped.position))) < 0.1:
                ped.goal, ped.home = ped.home, ped.goal
    world.time += world.dt
