"""
Scoring a policy and looking at what it did
===========================================

Any callable (maps, goals) -> action can be evaluated, not just trained
agents. Here we score the do-nothing-clever straight policy on held-out
static4 scenes, dump the standard report files, and render one episode
as an SVG you can open in a browser.
"""

import numpy as np

from pathlib import Path

from pathnav.evaluation import render_replay_svg, run_eval, write_report
from pathnav.scenarios import generate_scenario

out = Path(__file__).parent / "out" / "straight_eval"

straight = lambda maps, goals: np.zeros(3, dtype=np.float32)
report = run_eval(policy_fn=straight, kind="static4", episodes=20)

m = report.metrics
print(f"SUCC {m.succ:.2f}  NCOLL {m.ncoll}  NTIMEOUT {m.ntimeout}  "
      f"CUR {m.cur:.3f}  DTHETA {m.dtheta:.4f}")
print(f"plan length {m.plan_len:.3f} m (always 0.400: the straight action)")

files = write_report(out, report)
for k, p in files.items():
    print(f"{k:13s} {p}")

# pick the longest-lived episode for a more interesting picture
rec = max(report.records, key=lambda r: r.steps)
world = generate_scenario(rec.kind, rec.seed)
svg = render_replay_svg(rec, world)
svg_path = out / "replay.svg"
svg_path.write_text(svg)
print(f"\nreplay of seed {rec.seed} ({rec.outcome}, {rec.steps} steps) "
      f"-> {svg_path}")
print("gray: obstacles, blue: planned paths, black: driven trajectory")
