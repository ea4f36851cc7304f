"""Turn raw policy outputs into short local paths anchored at the robot.

The policy only chooses lateral offsets h1..hn; longitudinal stations are
fixed at d, 2d, .., nd ahead of the robot, so every action is a curve of the
same horizon regardless of what the network emits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Curve,
    CurveKind,
    Pose2D,
    bezier_curve,
    cubic_spline_fit,
    local_to_global,
    local_to_global_many,
    spline_eval,
    wrap_angle,
)


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class ActionSpaceConfig:
    n: int = 3
    d: float = 0.4 / 3.0
    h_max: float = 0.4
    kind: CurveKind = CurveKind.CUBIC_BEZIER

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 control points, got n={self.n}")
        if self.d <= 0.0 or self.h_max <= 0.0:
            raise ValueError("d and h_max must be positive")

    @property
    def horizon(self) -> float:
        return self.n * self.d


@dataclass(frozen=True)
class PathSpec:
    origin: Pose2D
    curve: Curve
    world_samples: np.ndarray  # (n_samples+1, 2), world frame
    end_pose: Pose2D


def clamp_action(raw, cfg: ActionSpaceConfig) -> np.ndarray:
    a = np.asarray(raw, dtype=float)
    if a.shape != (cfg.n,):
        raise DecodeError(f"expected {cfg.n} offsets, got shape {a.shape}")
    return np.clip(a, -cfg.h_max, cfg.h_max)


def control_points(a, cfg: ActionSpaceConfig) -> np.ndarray:
    """(0,0) plus one point per offset at the fixed longitudinal stations."""
    pts = np.zeros((cfg.n + 1, 2))
    pts[1:, 0] = cfg.d * np.arange(1, cfg.n + 1)
    pts[1:, 1] = a
    return pts


def decode_action(a, origin: Pose2D, cfg: ActionSpaceConfig | None = None,
                  n_samples: int = 100) -> PathSpec:
    cfg = cfg or ActionSpaceConfig()
    a = np.asarray(a, dtype=float)
    if a.shape != (cfg.n,):
        raise DecodeError(f"expected {cfg.n} offsets, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DecodeError(f"non-finite action {a}")
    a = np.clip(a, -cfg.h_max, cfg.h_max)

    pts = control_points(a, cfg)
    if cfg.kind is CurveKind.CUBIC_BEZIER:
        if cfg.n != 3:
            raise DecodeError("bezier decoding needs exactly 3 offsets")
        curve = bezier_curve(pts, n_samples)
        # hodograph endpoint: B'(1) = n*(P_n - P_{n-1})
        tangent = pts[-1] - pts[-2]
    else:
        curve = cubic_spline_fit(pts, n_samples)
        dl = 1e-6
        l_end = curve.points[-1, 0]
        tangent = np.array([dl, spline_eval(curve, l_end) - spline_eval(curve, l_end - dl)])

    world = local_to_global_many(origin, curve.samples)
    end_xy = local_to_global(origin, tuple(curve.points[-1]))
    end_alpha = wrap_angle(origin.alpha + np.arctan2(tangent[1], tangent[0]))
    return PathSpec(origin=origin, curve=curve, world_samples=world,
                    end_pose=Pose2D(end_xy[0], end_xy[1], end_alpha))
