"""Per-decision reward for one executed path segment.

Four terms: arrival bonus, collision penalty, a curvature tax summed along
the planned curve, and a length tax pushing the plan toward the straight
chord. Curvature/length are charged on the planned curve (what the policy
chose), not on what pure pursuit actually drove.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import FollowOutcome, FollowStatus
from .geometry import Curve, CurveKind, arc_length, cubic_spline_fit, total_curvature


@dataclass(frozen=True)
class RewardConfig:
    r_arr: float = 500.0
    r_col: float = -700.0
    eps_curvature: float = 0.4
    eps_straight: float = 200.0
    n_samples: int = 100
    l_min: float = 0.4     # straight-chord length, n*d

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.l_min <= 0.0:
            raise ValueError("l_min must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    goal: float
    safe: float
    curvature: float
    straight: float
    total: float


def compute_reward(path: Curve, outcome: FollowOutcome, reached_goal: bool,
                   cfg: RewardConfig = RewardConfig()) -> RewardBreakdown:
    goal = cfg.r_arr if reached_goal else 0.0
    safe = cfg.r_col if outcome.status is FollowStatus.COLLIDED else 0.0
    if path.kind is CurveKind.CUBIC_BEZIER:
        k_sum = total_curvature(path.points, cfg.n_samples)
        length = arc_length(path.points, cfg.n_samples)
    else:
        rebuilt = cubic_spline_fit(path.points, cfg.n_samples)
        k_sum = float(np.sum(rebuilt.curvature))
        length = rebuilt.length
    curvature = -cfg.eps_curvature * k_sum
    straight = cfg.eps_straight * (cfg.l_min - length)
    return RewardBreakdown(goal, safe, curvature, straight,
                           goal + safe + curvature + straight)
