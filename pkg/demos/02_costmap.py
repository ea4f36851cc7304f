"""
What the robot actually sees
============================

The observation is an egocentric occupancy grid rendered from simulated
range beams, not a god's-eye view. Free space the beams crossed is 0,
occupied cells are 1, unknown stays at 0.5.
"""

import numpy as np

from pathnav.scenarios import generate_scenario
from pathnav.world import CostmapConfig, render_costmap

world = generate_scenario("static16", seed=4)
print(f"scenario: {world.kind}, {len(world.obstacles)} obstacles "
      f"(incl. arena walls), robot at "
      f"({world.robots[0].pose.x:.2f}, {world.robots[0].pose.y:.2f})")

cfg = CostmapConfig()
cm = render_costmap(world, 0, cfg)
grid = cm.grid
print(f"grid {grid.shape}, resolution {cm.resolution} m/cell, "
      f"occupied {np.mean(grid == 1.0):.1%}, free {np.mean(grid == 0.0):.1%}, "
      f"unknown {np.mean(grid == 0.5):.1%}")

# Downsample 84x84 -> 28x28 for the terminal; robot sits at the center
# facing up the page.
chars = {0.0: ".", 0.5: " ", 1.0: "#"}
small = grid.reshape(28, 3, 28, 3).max(axis=(1, 3))
print()
for row in small:
    print("".join(chars[round(float(v) * 2) / 2] for v in row))
print("\n('.' seen free, '#' occupied, blank never observed)")
