"""
Path actions in a nutshell
==========================

A policy action is just three lateral offsets; everything else about the
path is fixed. This script decodes a few actions and prints what the
geometry layer computes for them.
"""

import numpy as np

from pathnav.actions import ActionSpaceConfig, decode_action
from pathnav.geometry import Pose2D

cfg = ActionSpaceConfig()
print(f"stations: d={cfg.d:.4f} m apart, offsets clipped to ±{cfg.h_max} m, "
      f"horizon {cfg.horizon:.2f} m\n")

origin = Pose2D(0.0, 0.0, 0.0)

actions = {
    "straight      ": [0.0, 0.0, 0.0],
    # equal increments are colinear anchors: a straight line, just tilted
    "tilted line   ": [0.1, 0.2, 0.3],
    "gentle arc    ": [0.05, 0.15, 0.3],
    "swerve        ": [0.4, -0.4, 0.0],
    "hard S        ": [0.4, -0.4, 0.4],
}

for name, a in actions.items():
    path = decode_action(a, origin)
    c = path.curve
    print(f"{name} h={np.round(a, 2)}  length={c.length:.3f} m  "
          f"sum|k|={np.sum(np.abs(c.curvature)):7.2f}  "
          f"end=({path.end_pose.x:.2f}, {path.end_pose.y:+.2f}, "
          f"{path.end_pose.alpha:+.2f} rad)")

# The curve lives in the robot frame; world_samples are the same points
# placed at the robot's pose. A rotated origin rotates the whole path.
tilted = decode_action([0.1, 0.2, 0.3], Pose2D(1.0, 2.0, np.pi / 2))
print("\nsame 'gentle left' planted at (1, 2) facing +y, first samples:")
print(np.round(tilted.world_samples[:4], 3))

# Crude terminal picture of the S-curve (x right, h up).
path = decode_action([0.4, -0.4, 0.4], origin)
pts = path.curve.samples
rows, cols = 11, 51
canvas = [[" "] * cols for _ in range(rows)]
for l, h in pts:
    i = int(round((0.4 - (h + 0.2) / 0.4 * 0.4) / 0.4 * (rows - 1)))
    j = int(round(l / pts[-1, 0] * (cols - 1)))
    canvas[max(0, min(rows - 1, i))][max(0, min(cols - 1, j))] = "*"
print("\nhard S, robot frame:")
print("\n".join("".join(r) for r in canvas))
