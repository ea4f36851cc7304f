"""Held-out evaluation: run a frozen policy, keep every episode replayable,
and reduce the lot to one metrics row.

Records store the planned paths as (origin, offsets) pairs rather than sample
arrays -- decoding is deterministic, so a replay can regenerate the exact
curves from a few floats.
"""
from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .actions import ActionSpaceConfig, decode_action
from .geometry import Pose2D, dtw_distance, polyline_length
from .rl import (
    EVAL_SEED_BASE,
    RolloutConfig,
    load_checkpoint,
    run_episode,
    run_multi_episode,
)
from .scenarios import ScenarioKind, generate_scenario
from .world import Circle, Rect, WorldState


# -- per-episode record -------------------------------------------------------

@dataclass
class EpisodeRecord:
    seed: int
    kind: str
    robot: int
    outcome: str            # success | collision | timeout
    steps: int
    time: float             # seconds of simulated time
    poses: list             # [[x, y, alpha], ...] per dt, initial pose first
    steering: list          # applied steering angle per dt
    planned: list           # [{"origin": [x, y, alpha], "h": [...]}, ...]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        return cls(**d)


def _record_from_result(result, seed: int, kind: str, robot: int, dt: float) -> EpisodeRecord:
    planned = []
    for path in result.planned:
        h = path.curve.points[1:, 1]
        planned.append({"origin": [float(path.origin.x), float(path.origin.y),
                                   float(path.origin.alpha)],
                        "h": [float(v) for v in h]})
    return EpisodeRecord(
        seed=seed, kind=kind, robot=robot, outcome=result.outcome.value,
        steps=result.steps, time=result.steps * dt,
        poses=[[float(p.x), float(p.y), float(p.alpha)] for p in result.poses],
        steering=[float(s) for s in result.steering],
        planned=planned,
    )


def write_records(path, records) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_records(path) -> list:
    with open(path) as f:
        return [EpisodeRecord.from_dict(json.loads(line)) for line in f if line.strip()]


# -- trajectory statistics ------------------------------------------------------

def driven_curvature(poses) -> float:
    """Mean three-point (Menger) curvature along the driven positions."""
    pts = np.asarray([[p[0], p[1]] for p in poses], dtype=float)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-9
    pts = pts[keep]
    if len(pts) < 3:
        raise ValueError("need at least 3 distinct positions")
    a, b, c = pts[:-2], pts[1:-1], pts[2:]
    ab, bc, ca = b - a, c - b, a - c
    cross = np.abs(ab[:, 0] * (-ca[:, 1]) - ab[:, 1] * (-ca[:, 0]))
    denom = (np.linalg.norm(ab, axis=1) * np.linalg.norm(bc, axis=1)
             * np.linalg.norm(ca, axis=1))
    valid = denom > 1e-12
    if not np.any(valid):
        raise ValueError("all position triples are degenerate")
    return float(np.mean(2.0 * cross[valid] / denom[valid]))


def delta_theta(steering) -> float:
    """Mean absolute change of the steering command between consecutive steps."""
    s = np.asarray(steering, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least 2 steering samples")
    return float(np.mean(np.abs(np.diff(s))))


def planned_samples(record: EpisodeRecord,
                    actions: ActionSpaceConfig = ActionSpaceConfig()) -> np.ndarray:
    """Regenerate and concatenate the world-frame samples of every planned path."""
    chunks = []
    for p in record.planned:
        ox, oy, oa = p["origin"]
        path = decode_action(np.asarray(p["h"]), Pose2D(ox, oy, oa), actions)
        chunks.append(path.world_samples)
    if not chunks:
        return np.zeros((0, 2))
    return np.concatenate(chunks, axis=0)


# -- aggregate metrics -----------------------------------------------------------

@dataclass(frozen=True)
class MetricsTable:
    kind: str
    episodes: int
    succ: float            # fraction of episodes ending at the goal
    ncoll: int             # episodes ending in collision
    ntimeout: int
    len_m: float | None    # mean driven length, successes only
    time_s: float | None   # mean episode time, successes only
    cur: float             # mean driven curvature, all episodes
    dtheta: float          # mean |steering change|, all episodes
    dtw: float             # mean raw DTW between plans and driven positions
    plan_len: float        # mean planned-curve length over all decisions

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_csv(self) -> str:
        d = asdict(self)
        keys = list(d)
        row = ["" if d[k] is None else str(d[k]) for k in keys]
        return ",".join(keys) + "\n" + ",".join(row) + "\n"


def metrics_from_records(records,
                         actions: ActionSpaceConfig = ActionSpaceConfig()) -> MetricsTable:
    if not records:
        raise ValueError("no records to aggregate")
    kind = records[0].kind
    n = len(records)
    wins = [r for r in records if r.outcome == "success"]
    ncoll = sum(r.outcome == "collision" for r in records)
    ntimeout = sum(r.outcome == "timeout" for r in records)

    lens = [polyline_length(np.asarray(r.poses)[:, :2]) for r in wins]
    curs, dthetas, dtws, plan_lens = [], [], [], []
    for r in records:
        if len(r.poses) >= 3:
            try:
                curs.append(driven_curvature(r.poses))
            except ValueError:
                pass
        if len(r.steering) >= 2:
            dthetas.append(delta_theta(r.steering))
        plan = planned_samples(r, actions)
        if len(plan) and len(r.poses) >= 2:
            driven = np.asarray(r.poses)[:, :2]
            dtws.append(dtw_distance(plan, driven))
        for p in r.planned:
            ox, oy, oa = p["origin"]
            path = decode_action(np.asarray(p["h"]), Pose2D(ox, oy, oa), actions)
            plan_lens.append(path.curve.length)

    def _mean(xs):
        return float(np.mean(xs)) if xs else None

    return MetricsTable(
        kind=kind, episodes=n,
        succ=len(wins) / n, ncoll=ncoll, ntimeout=ntimeout,
        len_m=_mean(lens), time_s=_mean([r.time for r in wins]),
        cur=_mean(curs) if curs else float("nan"),
        dtheta=_mean(dthetas) if dthetas else float("nan"),
        dtw=_mean(dtws) if dtws else float("nan"),
        plan_len=_mean(plan_lens) if plan_lens else float("nan"),
    )


# -- evaluation driver -------------------------------------------------------------

@dataclass
class EvalReport:
    records: list
    metrics: MetricsTable


def _episode_records(policy_fn, kind: ScenarioKind, seed: int,
                     cfg: RolloutConfig) -> list:
    world = generate_scenario(kind, seed)
    dt = world.dt
    if kind is ScenarioKind.AGENTS8:
        results = run_multi_episode(world, policy_fn, cfg)
    else:
        results = [run_episode(world, policy_fn, cfg)]
    return [_record_from_result(res, seed, kind.value, i, dt)
            for i, res in enumerate(results)]


_WORKER: dict = {}


def _init_eval_worker(checkpoint_path, cfg):
    agent, _ = load_checkpoint(checkpoint_path)
    _WORKER["policy"] = lambda m, g: agent.act(m, g, deterministic=True)
    _WORKER["cfg"] = cfg


def _eval_worker(args):
    kind, seed = args
    return [r.to_dict() for r in
            _episode_records(_WORKER["policy"], ScenarioKind(kind), seed,
                             _WORKER["cfg"])]


def run_eval(checkpoint=None, policy_fn=None, kind="static4", episodes: int = 100,
             seed_base: int = EVAL_SEED_BASE, cfg: RolloutConfig = RolloutConfig(),
             workers: int = 1) -> EvalReport:
    """Deterministic evaluation over held-out scenario seeds.

    Give either a checkpoint path (parallelizable) or a policy_fn callable
    (forced sequential: closures don't cross process boundaries). Results are
    identical either way; workers only reorder the computation.
    """
    if (checkpoint is None) == (policy_fn is None):
        raise ValueError("pass exactly one of checkpoint / policy_fn")
    kind = ScenarioKind(kind)
    seeds = [seed_base + i for i in range(episodes)]

    if checkpoint is not None and workers > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers, initializer=_init_eval_worker,
                      initargs=(str(checkpoint), cfg)) as pool:
            chunks = pool.map(_eval_worker, [(kind.value, s) for s in seeds])
        records = [EpisodeRecord.from_dict(d) for chunk in chunks for d in chunk]
    else:
        if policy_fn is None:
            agent, _ = load_checkpoint(checkpoint)
            policy_fn = lambda m, g: agent.act(m, g, deterministic=True)  # noqa: E731
        records = []
        for s in seeds:
            records += _episode_records(policy_fn, kind, s, cfg)
    return EvalReport(records, metrics_from_records(records, cfg.actions))


def write_report(out_dir, report: EvalReport, stem: str = "eval") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out_dir / f"{stem}_records.jsonl",
        "metrics_json": out_dir / f"{stem}_metrics.json",
        "metrics_csv": out_dir / f"{stem}_metrics.csv",
    }
    write_records(paths["records"], report.records)
    paths["metrics_json"].write_text(report.metrics.to_json() + "\n")
    paths["metrics_csv"].write_text(report.metrics.to_csv())
    return paths


# -- replay rendering ----------------------------------------------------------------

def render_replay_svg(record: EpisodeRecord, world: WorldState | None = None,
                      actions: ActionSpaceConfig = ActionSpaceConfig()) -> str:
    """Standalone SVG: arena, obstacles, every planned curve, and the driven line."""
    if world is None:
        world = generate_scenario(record.kind, record.seed)

    def pts(arr):
        return " ".join(f"{x:.4f},{y:.4f}" for x, y in arr)

    body = []
    for ob in world.obstacles:
        if isinstance(ob, Circle):
            body.append(f'<circle cx="{ob.center[0]:.4f}" cy="{ob.center[1]:.4f}" '
                        f'r="{ob.radius:.4f}" class="obs"/>')
        elif isinstance(ob, Rect):
            w, h = 2 * ob.half_extents[0], 2 * ob.half_extents[1]
            deg = math.degrees(ob.rotation)
            body.append(
                f'<rect x="{ob.center[0] - ob.half_extents[0]:.4f}" '
                f'y="{ob.center[1] - ob.half_extents[1]:.4f}" '
                f'width="{w:.4f}" height="{h:.4f}" '
                f'transform="rotate({deg:.4f} {ob.center[0]:.4f} {ob.center[1]:.4f})" '
                f'class="obs"/>')
    for ped in world.pedestrians:
        body.append(f'<circle cx="{ped.position[0]:.4f}" cy="{ped.position[1]:.4f}" '
                    f'r="{ped.radius:.4f}" class="ped"/>')

    for p in record.planned:
        ox, oy, oa = p["origin"]
        path = decode_action(np.asarray(p["h"]), Pose2D(ox, oy, oa), actions)
        body.append(f'<polyline points="{pts(path.world_samples)}" class="plan"/>')

    driven = np.asarray(record.poses)[:, :2]
    body.append(f'<polyline points="{pts(driven)}" class="driven"/>')

    goal = world.goals[record.robot]
    start = record.poses[0]
    body.append(f'<circle cx="{start[0]:.4f}" cy="{start[1]:.4f}" r="0.12" class="start"/>')
    body.append(f'<circle cx="{goal.x:.4f}" cy="{goal.y:.4f}" r="0.3" class="goal"/>')

    half = 5.6
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{-half} {-half} '
        f'{2 * half} {2 * half}" width="640" height="640">'
        '<style>.obs{fill:#555}.ped{fill:#c80}.plan{fill:none;stroke:#b44;'
        'stroke-width:0.02;stroke-dasharray:0.08 0.05}.driven{fill:none;'
        'stroke:#2266cc;stroke-width:0.04}.start{fill:#2266cc}'
        '.goal{fill:none;stroke:#2a2;stroke-width:0.05}</style>'
        f'<g transform="scale(1,-1)"><rect x="-5.6" y="-5.6" width="11.2" '
        f'height="11.2" fill="#fafafa"/>{"".join(body)}</g>'
        f'<text x="{-half + 0.2}" y="{-half + 0.5}" font-size="0.35" '
        f'fill="#333">{record.kind} seed={record.seed} robot={record.robot} '
        f'{record.outcome} steps={record.steps}</text></svg>'
    )
