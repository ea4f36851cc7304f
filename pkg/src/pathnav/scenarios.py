"""Seeded scenario layouts for the training curriculum and evaluation.

All randomness happens here, once, at generation time; the worlds that come
out step deterministically. Arena is a walled 10 x 10 m square centered on
the origin.
"""
from __future__ import annotations

import json
from enum import Enum

import numpy as np

from .geometry import Pose2D, wrap_angle
from .world import (
    Circle,
    Pedestrian,
    Rect,
    RobotState,
    WorldState,
    _closest_on_rect,
    collision_check,
)

ARENA_HALF = 5.0
WALL_THICKNESS = 0.1
D_MIN = 6.0            # start-to-goal separation
START_CLEARANCE = 0.6  # obstacle clearance around start and goal positions
MAX_TRIES = 200


class ScenarioError(RuntimeError):
    pass


class ScenarioKind(str, Enum):
    EMPTY = "empty"
    STATIC4 = "static4"
    STATIC16 = "static16"
    STATIC24 = "static24"
    MIXED4X4 = "mixed4x4"
    PED6 = "ped6"
    AGENTS8 = "agents8"


# (static obstacles, pedestrians) per kind; agents8 is special-cased
_COUNTS = {
    ScenarioKind.EMPTY: (0, 0),    # walls only: the curriculum's bottom rung
    ScenarioKind.STATIC4: (4, 0),
    ScenarioKind.STATIC16: (16, 0),
    ScenarioKind.STATIC24: (24, 0),
    ScenarioKind.MIXED4X4: (4, 4),
    ScenarioKind.PED6: (0, 6),
}


def arena_walls(half: float = ARENA_HALF, thickness: float = WALL_THICKNESS):
    t = thickness / 2.0
    span = half + thickness
    return [
        Rect((0.0, half + t), (span, t)),
        Rect((0.0, -half - t), (span, t)),
        Rect((half + t, 0.0), (t, span)),
        Rect((-half - t, 0.0), (t, span)),
    ]


def empty_world(start: Pose2D = Pose2D(0.0, 0.0, 0.0),
                goal: Pose2D = Pose2D(4.0, 0.0, 0.0), walls: bool = False) -> WorldState:
    w = WorldState(robots=[RobotState(start)], goals=[goal])
    if walls:
        w.obstacles = arena_walls()
    return w


def _clearance(point, obstacle) -> float:
    p = np.asarray(point, dtype=float)
    if isinstance(obstacle, Circle):
        return float(np.hypot(*(p - obstacle.center))) - obstacle.radius
    return float(np.hypot(*(p - _closest_on_rect(obstacle, p))))


def _sample_start_goal(rng):
    for _ in range(MAX_TRIES):
        lo, hi = -ARENA_HALF + 0.7, ARENA_HALF - 0.7
        start = rng.uniform(lo, hi, size=2)
        goal = rng.uniform(lo, hi, size=2)
        if np.hypot(*(goal - start)) >= D_MIN:
            bearing = float(np.arctan2(goal[1] - start[1], goal[0] - start[0]))
            heading = wrap_angle(bearing + rng.uniform(-np.pi / 4, np.pi / 4))
            return Pose2D(start[0], start[1], heading), Pose2D(goal[0], goal[1], bearing)
    raise ScenarioError("could not place start/goal pair")


def _sample_obstacles(rng, count, keep_clear):
    obstacles = []
    tries = 0
    while len(obstacles) < count:
        tries += 1
        if tries > MAX_TRIES * max(count, 1):
            raise ScenarioError("could not place obstacles")
        center = rng.uniform(-ARENA_HALF + 0.3, ARENA_HALF - 0.3, size=2)
        if rng.random() < 0.5:
            obs = Circle(center, rng.uniform(0.15, 0.4))
        else:
            obs = Rect(center, rng.uniform(0.15, 0.4, size=2), rng.uniform(-np.pi, np.pi))
        if all(_clearance(p, obs) >= START_CLEARANCE for p in keep_clear):
            obstacles.append(obs)
    return obstacles


def _sample_pedestrians(rng, count, obstacles, robot_starts):
    peds = []
    tries = 0
    while len(peds) < count:
        tries += 1
        if tries > MAX_TRIES * max(count, 1):
            raise ScenarioError("could not place pedestrians")
        lo, hi = -ARENA_HALF + 0.5, ARENA_HALF - 0.5
        home = rng.uniform(lo, hi, size=2)
        goal = rng.uniform(lo, hi, size=2)
        if np.hypot(*(goal - home)) < 3.0:
            continue
        if any(np.hypot(*(home - s)) < 0.8 for s in robot_starts):
            continue
        if any(_clearance(home, o) < 0.3 or _clearance(goal, o) < 0.3 for o in obstacles):
            continue
        peds.append(Pedestrian(home, (0.0, 0.0), goal, home.copy(),
                               desired_speed=float(rng.uniform(0.3, 0.6))))
    return peds


def _agents8(rng, seed):
    radius = 4.0
    angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False) + rng.uniform(-0.08, 0.08, size=8)
    robots, goals = [], []
    for a in angles:
        start = radius * np.array([np.cos(a), np.sin(a)])
        goal = -start
        heading = float(np.arctan2(goal[1] - start[1], goal[0] - start[0]))
        robots.append(RobotState(Pose2D(start[0], start[1], heading)))
        goals.append(Pose2D(goal[0], goal[1], heading))
    return WorldState(robots=robots, goals=goals, obstacles=arena_walls(),
                      seed=seed, kind=ScenarioKind.AGENTS8.value)


def generate_scenario(kind: ScenarioKind | str, seed: int) -> WorldState:
    kind = ScenarioKind(kind)
    rng = np.random.default_rng(seed)
    if kind is ScenarioKind.AGENTS8:
        world = _agents8(rng, seed)
        if any(collision_check(world, i) for i in range(len(world.robots))):
            raise ScenarioError("agents8 produced a colliding layout")
        return world

    n_obs, n_ped = _COUNTS[kind]
    for _ in range(MAX_TRIES):
        start, goal = _sample_start_goal(rng)
        obstacles = _sample_obstacles(rng, n_obs, [(start.x, start.y), (goal.x, goal.y)])
        peds = _sample_pedestrians(rng, n_ped, obstacles, [np.array([start.x, start.y])])
        world = WorldState(robots=[RobotState(start)], goals=[goal],
                           obstacles=arena_walls() + obstacles, pedestrians=peds,
                           seed=seed, kind=kind.value)
        if not collision_check(world, 0):
            return world
    raise ScenarioError(f"gave up building {kind.value} for seed {seed}")


# -- serialization ------------------------------------------------------------

def world_to_json(world: WorldState) -> str:
    def obstacle(o):
        if isinstance(o, Circle):
            return {"shape": "circle", "center": list(o.center), "radius": o.radius}
        return {"shape": "rect", "center": list(o.center),
                "half_extents": list(o.half_extents), "rotation": o.rotation}

    doc = {
        "seed": world.seed,
        "kind": world.kind,
        "obstacles": [obstacle(o) for o in world.obstacles],
        "robots": [{"x": r.pose.x, "y": r.pose.y, "alpha": r.pose.alpha,
                    "v": r.v, "theta": r.theta} for r in world.robots],
        "pedestrians": [{"position": list(p.position), "velocity": list(p.velocity),
                         "goal": list(p.goal), "home": list(p.home),
                         "desired_speed": p.desired_speed, "radius": p.radius}
                        for p in world.pedestrians],
        "goals": [{"x": g.x, "y": g.y, "alpha": g.alpha} for g in world.goals],
    }
    return json.dumps(doc, sort_keys=True)


def world_from_json(text: str) -> WorldState:
    doc = json.loads(text)
    obstacles = []
    for o in doc["obstacles"]:
        if o["shape"] == "circle":
            obstacles.append(Circle(o["center"], o["radius"]))
        elif o["shape"] == "rect":
            obstacles.append(Rect(o["center"], o["half_extents"], o["rotation"]))
        else:
            raise ValueError(f"unknown obstacle shape {o['shape']!r}")
    return WorldState(
        robots=[RobotState(Pose2D(r["x"], r["y"], r["alpha"]), r["v"], r["theta"])
                for r in doc["robots"]],
        goals=[Pose2D(g["x"], g["y"], g["alpha"]) for g in doc["goals"]],
        obstacles=obstacles,
        pedestrians=[Pedestrian(p["position"], p["velocity"], p["goal"], p["home"],
                                p["desired_speed"], p["radius"])
                     for p in doc["pedestrians"]],
        seed=doc["seed"], kind=doc["kind"],
    )
