"""
Tracking a planned path
=======================

Plans are only half the story: a pure-pursuit controller has to drive the
car-like robot along them. We follow one curvy path and compare the wheel
tracks against the plan.
"""

import numpy as np

from pathnav.actions import decode_action
from pathnav.control import FollowerConfig, follow_path
from pathnav.geometry import Pose2D, dtw_distance
from pathnav.scenarios import empty_world

world = empty_world(start=Pose2D(0.0, 0.0, 0.0), goal=Pose2D(4.0, 0.0, 0.0))
path = decode_action([0.3, -0.2, 0.1], world.robots[0].pose)

out = follow_path(world, 0, path, FollowerConfig())
print(f"status={out.status.value} after {out.steps} steps "
      f"({out.steps * world.dt:.1f} s at cruise speed)")

driven = np.array([(p.x, p.y) for p in out.trajectory])
planned = path.world_samples
print(f"end of plan  ({planned[-1][0]:.3f}, {planned[-1][1]:+.3f})")
print(f"end of drive ({driven[-1][0]:.3f}, {driven[-1][1]:+.3f})")

# alignment-based distance between plan and wheel track, per aligned sample
d = dtw_distance(planned, driven)
print(f"dtw={d:.3f} over ~{max(len(planned), len(driven))} samples "
      f"-> {d / max(len(planned), len(driven)):.4f} m per sample")

steer = np.array(out.steering)
print(f"steering: max |theta| {np.max(np.abs(steer)):.3f} rad, "
      f"mean |change| {np.mean(np.abs(np.diff(steer))):.4f} rad")

# One decision spans many control ticks: that asymmetry is the whole point
# of planning in path space.
print(f"\n1 path decision -> {out.steps} low-level commands")
