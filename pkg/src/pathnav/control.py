"""Pure pursuit at fixed cruise speed, and the executor that drives one
decoded path to completion while the rest of the world keeps moving.

One path = one decision of the policy; the executor reports how many dt
steps the path consumed so the learner can discount per decision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .actions import PathSpec
from .geometry import Pose2D, global_to_local
from .world import THETA_MAX, RobotState, WorldState, advance, collision_at, collision_check


@dataclass(frozen=True)
class FollowerConfig:
    lookahead: float = 0.2
    cruise_speed: float = 0.4
    completion_tol: float = 0.05
    max_steps: int = 50
    interrupt_distance: float = 0.0   # 0 disables interruption

    def __post_init__(self):
        if self.lookahead <= 0.0:
            raise ValueError("lookahead must be positive")
        if not 0.0 < self.cruise_speed <= 0.6:
            raise ValueError("cruise speed must be in (0, v_max]")


class FollowStatus(Enum):
    COMPLETED = "completed"
    COLLIDED = "collided"
    INTERRUPTED = "interrupted"
    STALLED = "stalled"


@dataclass
class FollowOutcome:
    status: FollowStatus
    steps: int
    end_state: RobotState
    trajectory: list[Pose2D]
    steering: list[float]


def steering_for_bearing(eta: float, wheelbase: float, lookahead: float) -> float:
    """Unclamped pure-pursuit steering toward a goal point at bearing eta."""
    return math.atan(2.0 * wheelbase * math.sin(eta) / lookahead)


def _goal_point(samples: np.ndarray, position: np.ndarray, lookahead: float) -> np.ndarray:
    """Point at arc distance `lookahead` beyond the closest sample, or the end."""
    idx = int(np.argmin(np.einsum("ij,ij->i", samples - position, samples - position)))
    seg = np.linalg.norm(np.diff(samples[idx:], axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] <= lookahead:
        return samples[-1]
    k = int(np.searchsorted(arc, lookahead))
    # interpolate inside segment k-1 .. k
    t = (lookahead - arc[k - 1]) / (arc[k] - arc[k - 1])
    return samples[idx + k - 1] + t * (samples[idx + k] - samples[idx + k - 1])


def pure_pursuit_command(robot: RobotState, path: PathSpec,
                         cfg: FollowerConfig = FollowerConfig()):
    target = _goal_point(path.world_samples, np.array([robot.pose.x, robot.pose.y]),
                         cfg.lookahead)
    l, h = global_to_local(robot.pose, (target[0], target[1]))
    eta = math.atan2(h, l)
    theta = steering_for_bearing(eta, robot.wheelbase, cfg.lookahead)
    return cfg.cruise_speed, min(max(theta, -THETA_MAX), THETA_MAX)


class PathFollower:
    """Incremental form: command() before each world step, check() after.

    Lets a multi-robot arena interleave many followers over one world.
    """

    def __init__(self, path: PathSpec, cfg: FollowerConfig = FollowerConfig()):
        self.path = path
        self.cfg = cfg
        self.steps = 0

    def command(self, robot: RobotState):
        return pure_pursuit_command(robot, self.path, self.cfg)

    def check(self, world: WorldState, robot_index: int) -> FollowStatus | None:
        self.steps += 1
        robot = world.robots[robot_index]
        if collision_check(world, robot_index):
            return FollowStatus.COLLIDED
        if self.cfg.interrupt_distance > 0.0:
            d = self.cfg.interrupt_distance
            if collision_at(world, robot.pose, robot.length + 2 * d,
                            robot.width + 2 * d, skip_robot=robot_index):
                return FollowStatus.INTERRUPTED
        end = self.path.end_pose
        if math.hypot(robot.pose.x - end.x, robot.pose.y - end.y) <= self.cfg.completion_tol:
            return FollowStatus.COMPLETED
        if self.steps >= self.cfg.max_steps:
            return FollowStatus.STALLED
        return None


def follow_path(world: WorldState, robot_index: int, path: PathSpec,
                cfg: FollowerConfig = FollowerConfig()) -> FollowOutcome:
    """Drive one path to its end (or failure), advancing the whole world.

    Pedestrians and time move every dt; other robots hold their poses (a
    multi-robot arena drives everyone itself via PathFollower)."""
    follower = PathFollower(path, cfg)
    trajectory = [world.robots[robot_index].pose]
    steering: list[float] = []
    status = None
    while status is None:
        cmd = follower.command(world.robots[robot_index])
        commands = [None] * len(world.robots)
        commands[robot_index] = cmd
        advance(world, commands)
        steering.append(world.robots[robot_index].theta)
        trajectory.append(world.robots[robot_index].pose)
        status = follower.check(world, robot_index)
    return FollowOutcome(status, follower.steps, world.robots[robot_index],
                         trajectory, steering)
