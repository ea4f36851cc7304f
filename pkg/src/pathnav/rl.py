"""Soft actor-critic over path decisions.

The timeline here is two-speed: the world ticks every dt, but the learner only
sees the moments where one path ends and the next begins. One executed path =
one stored transition = one gradient opportunity, no matter how many dt steps
the follower burned driving it. Rewards are computed on the planned curve at
those boundaries, so nothing in this module ever hands the critic a per-dt
sample (the low-level baseline below is the deliberate exception).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .actions import ActionSpaceConfig, PathSpec, decode_action
from .autodiff import Adam, Tensor
from .control import FollowerConfig, FollowOutcome, FollowStatus, PathFollower, follow_path
from .nets import GaussianPolicy, QNetwork, clone_into, polyak_update
from .reward import RewardBreakdown, RewardConfig, compute_reward
from .scenarios import ScenarioKind, generate_scenario
from .world import (
    THETA_MAX,
    V_MAX,
    CostmapConfig,
    RelativeGoal,
    WorldState,
    advance,
    collision_check,
    reached_goal,
    relative_goal,
    render_costmap,
)

STAGE1_KINDS = (ScenarioKind.EMPTY, ScenarioKind.STATIC4, ScenarioKind.STATIC16)
STAGE2_KINDS = (ScenarioKind.MIXED4X4, ScenarioKind.PED6, ScenarioKind.AGENTS8)

EVAL_SEED_BASE = 10**9   # held-out scenario seeds; training never reaches these

CHECKPOINT_SCHEMA = 1


# -- observations -------------------------------------------------------------

@dataclass(eq=False)
class Observation:
    """One decision-time sensor snapshot; `index` is its replay slot once stored."""
    costmap: np.ndarray            # (84, 84) float32 in {0, 0.5, 1}
    goal: RelativeGoal
    index: int | None = None


def observe(world: WorldState, robot_index: int,
            cfg: CostmapConfig = CostmapConfig()) -> Observation:
    grid = render_costmap(world, robot_index, cfg).grid
    goal = relative_goal(world.robots[robot_index].pose, world.goals[robot_index])
    return Observation(grid, goal)


def build_frame_stack(history, current: Observation):
    """(start of path t-2, start of path t-1, now); early frames repeat."""
    frames = list(history)[-2:]
    while len(frames) < 2:
        frames.insert(0, frames[0] if frames else current)
    return (frames[0], frames[1], current)


def stack_arrays(stack):
    maps = np.stack([o.costmap for o in stack]).astype(np.float32)
    goals = np.array([v for o in stack for v in o.goal], dtype=np.float32)
    return maps, goals


# -- replay -------------------------------------------------------------------

class ReplayBuffer:
    """Transition ring that stores each observation once.

    Costmaps go in as uint8 thirds-of-a-byte ({0,0.5,1} -> {0,1,2}); stacks are
    kept as index triples into the observation ring. The ring is twice the
    transition capacity plus slack, so a slot can only be reused after every
    transition that referenced it has itself been evicted.
    """

    def __init__(self, capacity: int, n_actions: int, map_size: int = 84):
        self.capacity = capacity
        obs_cap = 2 * capacity + 8
        self._maps = np.zeros((obs_cap, map_size, map_size), dtype=np.uint8)
        self._goals = np.zeros((obs_cap, 3), dtype=np.float32)
        self._obs_count = 0
        self._s = np.zeros((capacity, 3), dtype=np.int64)
        self._s2 = np.zeros((capacity, 3), dtype=np.int64)
        self._a = np.zeros((capacity, n_actions), dtype=np.float32)
        self._r = np.zeros(capacity, dtype=np.float32)
        self._done = np.zeros(capacity, dtype=np.bool_)
        self._n = 0
        self._pos = 0

    def __len__(self):
        return self._n

    def _store(self, obs: Observation) -> int:
        if obs.index is not None:
            return obs.index
        idx = self._obs_count % len(self._maps)
        self._maps[idx] = np.round(obs.costmap * 2.0).astype(np.uint8)
        self._goals[idx] = obs.goal
        self._obs_count += 1
        obs.index = idx
        return idx

    def add(self, stack, action, reward: float, next_stack, done: bool):
        self._s[self._pos] = [self._store(o) for o in stack]
        self._s2[self._pos] = [self._store(o) for o in next_stack]
        self._a[self._pos] = action
        self._r[self._pos] = reward
        self._done[self._pos] = done
        self._pos = (self._pos + 1) % self.capacity
        self._n = min(self._n + 1, self.capacity)

    def _gather(self, idx):
        maps = (self._maps[idx].astype(np.float32) * 0.5)
        goals = self._goals[idx].reshape(len(idx), 9)
        return maps, goals

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        rows = rng.integers(0, self._n, size=batch_size)
        maps, goals = self._gather(self._s[rows])
        next_maps, next_goals = self._gather(self._s2[rows])
        return {
            "maps": maps, "goals": goals,
            "actions": self._a[rows].copy(),
            "rewards": self._r[rows].copy(),
            "dones": self._done[rows].copy(),
            "next_maps": next_maps, "next_goals": next_goals,
        }


# -- agent ----------------------------------------------------------------------

@dataclass(frozen=True)
class SACConfig:
    gamma: float = 0.99
    polyak: float = 0.005
    batch_size: int = 256
    buffer_capacity: int = 200_000
    lr: float = 3e-4
    warmup: int = 1000              # random decisions before the policy drives
    updates_per_decision: int = 1
    hidden: int = 256
    conv_channels: tuple = (16, 32, 32)
    alpha_init: float = 0.2
    target_entropy: float | None = None   # None -> -n_actions
    # Critic-side conditioning only; env rewards keep their full scale in the
    # buffer and the logs. Arrival/collision rewards in the hundreds put Q in
    # the thousands, and the resulting actor gradients slam tanh means into
    # saturation before the critic knows anything.
    reward_scale: float = 0.01
    # Pre-squash mean penalty, off by default. Small CPU-budget runs want a
    # little of it (~0.05): with a still-noisy critic the means random-walk
    # into tanh saturation and the policy freezes on a constant action.
    mean_reg: float = 0.0


class SACAgent:
    def __init__(self, cfg: SACConfig, rng: np.random.Generator, n_actions: int = 3,
                 action_scale=0.4, action_offset=0.0):
        self.cfg = cfg
        self.n_actions = n_actions
        kw = dict(n_actions=n_actions, action_scale=action_scale,
                  action_offset=action_offset, conv_channels=cfg.conv_channels,
                  hidden=cfg.hidden)
        self.policy = GaussianPolicy(rng, **kw)
        self.q1 = QNetwork(rng, **kw)
        self.q2 = QNetwork(rng, **kw)
        self.q1_target = QNetwork(rng, **kw)
        self.q2_target = QNetwork(rng, **kw)
        clone_into(self.q1_target, self.q1)
        clone_into(self.q2_target, self.q2)
        self.log_alpha = Tensor(np.array(math.log(cfg.alpha_init), dtype=np.float32),
                                requires_grad=True)
        self.target_entropy = (cfg.target_entropy if cfg.target_entropy is not None
                               else -float(n_actions))
        self.actor_opt = Adam(self.policy.parameters(), cfg.lr)
        self.critic_opt = Adam(self.q1.parameters() + self.q2.parameters(), cfg.lr)
        self.alpha_opt = Adam([self.log_alpha], cfg.lr)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))

    @property
    def action_scale(self) -> np.ndarray:
        return self.policy._scale

    @property
    def action_offset(self) -> np.ndarray:
        return self.policy._offset

    def act(self, maps, goals, rng=None, deterministic: bool = False) -> np.ndarray:
        return self.policy.act(maps[None], goals[None], rng, deterministic)

    def random_action(self, rng: np.random.Generator,
                      tight: bool | None = None) -> np.ndarray:
        # Bimodal Gaussian around the action-space center, not uniform over the
        # box: uniform offsets make the warmup corpus almost entirely
        # high-penalty wiggle. The broad component covers the box; the tight
        # one makes sure near-zero actions (where the shaping terms vanish) are
        # represented too. Callers should pin `tight` for a whole episode —
        # coherent gentle episodes are the ones that ever reach the goal and
        # seed the buffer with true terminals; per-step mixing never does.
        if tight is None:
            tight = rng.random() < 0.5
        sigma = self.action_scale / (12.0 if tight else 3.0)
        a = self.action_offset + sigma * rng.standard_normal(self.n_actions)
        lo = self.action_offset - self.action_scale
        hi = self.action_offset + self.action_scale
        return np.clip(a, lo, hi).astype(np.float32)

    def _modules(self):
        return {"policy": self.policy, "q1": self.q1, "q2": self.q2,
                "q1_target": self.q1_target, "q2_target": self.q2_target}

    def seeded_action(self, goals: np.ndarray, rng: np.random.Generator,
                      actions: ActionSpaceConfig,
                      noise: float = 0.03) -> np.ndarray:
        """Exploration-only heuristic: a noisy straight path tilted toward the
        goal bearing.

        Arrival is the one reward event that separates goal-approach from
        goal-miss, and on a small CPU budget random exploration essentially
        never produces it (a 0.3 m disc several metres away). These actions
        keep a trickle of genuine arrivals flowing into the buffer. Offsets
        grow linearly with station distance, so the anchors stay collinear and
        the curvature term stays near zero — the same episodes also anchor the
        cheap-action region. The learner itself never sees this controller;
        it only ever shapes what the replay buffer contains.
        """
        xg, yg = float(goals[-3]), float(goals[-2])
        bearing = math.atan2(yg, xg)
        # steepest line the offset box can express is h_max over the horizon
        slope_cap = actions.h_max / (actions.n * actions.d)
        slope = math.tan(np.clip(bearing, -0.25 * math.pi, 0.25 * math.pi))
        slope = float(np.clip(slope, -slope_cap, slope_cap))
        stations = actions.d * np.arange(1, actions.n + 1)
        a = stations * slope + noise * rng.standard_normal(actions.n)
        return np.clip(a, -actions.h_max, actions.h_max).astype(np.float32)

    def update(self, batch: dict, rng: np.random.Generator) -> dict:
        cfg = self.cfg

        # frozen target: r + gamma * (1-done) * (min Q_target(s', a') - alpha log pi(a'|s'))
        a2, logp2 = self.policy.sample(batch["next_maps"], batch["next_goals"], rng)
        q1t = self.q1_target(batch["next_maps"], batch["next_goals"], a2.data).data
        q2t = self.q2_target(batch["next_maps"], batch["next_goals"], a2.data).data
        soft_v = np.minimum(q1t, q2t) - self.alpha * logp2.data
        not_done = 1.0 - batch["dones"].astype(np.float32)
        y = Tensor(cfg.reward_scale * batch["rewards"][:, None]
                   + cfg.gamma * not_done[:, None] * soft_v)

        q1 = self.q1(batch["maps"], batch["goals"], batch["actions"])
        q2 = self.q2(batch["maps"], batch["goals"], batch["actions"])
        d1, d2 = q1 - y, q2 - y
        critic_loss = (d1 * d1).mean() + (d2 * d2).mean()
        _require_finite(critic_loss, "critic loss")
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        # reparameterized actor step against the current critics
        a_new, logp, mu = self.policy.sample(batch["maps"], batch["goals"], rng,
                                             return_mean=True)
        q_min = ad.minimum(self.q1(batch["maps"], batch["goals"], a_new),
                           self.q2(batch["maps"], batch["goals"], a_new))
        actor_loss = (logp * self.alpha - q_min).mean()
        if cfg.mean_reg:
            # keeps the pre-squash means in the linear region of tanh; while
            # the critics are still noisy the means otherwise drift into
            # saturation, where the squash kills the gradient and the policy
            # freezes on a constant action
            actor_loss = actor_loss + (mu * mu).mean() * cfg.mean_reg
        _require_finite(actor_loss, "actor loss")
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        # temperature follows the entropy gap, gradient only through log_alpha
        gap = logp.data + self.target_entropy
        alpha_loss = (self.log_alpha * Tensor(-gap)).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()

        polyak_update(self.q1_target, self.q1, cfg.polyak)
        polyak_update(self.q2_target, self.q2, cfg.polyak)
        self.updates += 1
        return {
            "critic_loss": float(critic_loss.data),
            "actor_loss": float(actor_loss.data),
            "alpha_loss": float(alpha_loss.data),
            "alpha": self.alpha,
            "q_mean": float(q1.data.mean()),
            "entropy": float(-logp.data.mean()),
        }


def _require_finite(loss: Tensor, name: str):
    if not np.isfinite(loss.data):
        raise RuntimeError(f"{name} is not finite ({loss.data}); "
                           "inspect the last batch / learning rate")


# -- checkpoints ----------------------------------------------------------------

_OPTS = ("actor", "critic", "alpha")


def save_checkpoint(path, agent: SACAgent, extra: dict | None = None):
    arrays = {}
    for mname, mod in agent._modules().items():
        for k, v in mod.state_arrays().items():
            arrays[f"{mname}|{k}"] = v
    arrays["log_alpha"] = np.asarray(agent.log_alpha.data).copy()
    opt_t = {}
    for oname, opt in zip(_OPTS, (agent.actor_opt, agent.critic_opt, agent.alpha_opt)):
        st = opt.state_dict()
        opt_t[oname] = st["t"]
        for i, m in enumerate(st["m"]):
            arrays[f"opt|{oname}|m|{i}"] = m
        for i, v in enumerate(st["v"]):
            arrays[f"opt|{oname}|v|{i}"] = v
    meta = {
        "schema": CHECKPOINT_SCHEMA,
        "sac": asdict(agent.cfg),
        "n_actions": agent.n_actions,
        "action_scale": agent.action_scale.tolist(),
        "action_offset": agent.action_offset.tolist(),
        "updates": agent.updates,
        "opt_t": opt_t,
        "extra": extra or {},
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez_compressed(path, **arrays)


def load_checkpoint(path):
    """Returns (agent, meta). The agent is ready to act or to keep training."""
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(arrays.pop("meta").item())
    if meta.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema: {meta.get('schema')!r}")
    sac_kw = dict(meta["sac"])
    sac_kw["conv_channels"] = tuple(sac_kw["conv_channels"])
    agent = SACAgent(SACConfig(**sac_kw), np.random.default_rng(0),
                     n_actions=meta["n_actions"],
                     action_scale=meta["action_scale"],
                     action_offset=meta["action_offset"])
    for mname, mod in agent._modules().items():
        sub = {k.split("|", 1)[1]: v for k, v in arrays.items()
               if k.split("|", 1)[0] == mname}
        mod.load_state_arrays(sub)
    agent.log_alpha.data[...] = arrays["log_alpha"]
    for oname, opt in zip(_OPTS, (agent.actor_opt, agent.critic_opt, agent.alpha_opt)):
        n = len(opt.params)
        opt.load_state_dict({
            "t": meta["opt_t"][oname],
            "m": [arrays[f"opt|{oname}|m|{i}"] for i in range(n)],
            "v": [arrays[f"opt|{oname}|v|{i}"] for i in range(n)],
        })
    agent.updates = meta["updates"]
    return agent, meta


# -- episode runners --------------------------------------------------------------

@dataclass(frozen=True)
class RolloutConfig:
    actions: ActionSpaceConfig = ActionSpaceConfig()
    follower: FollowerConfig = FollowerConfig()
    reward: RewardConfig = RewardConfig()
    costmap: CostmapConfig = CostmapConfig()
    timeout_steps: int = 600      # dt budget per episode


class EpisodeOutcome(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass
class DecisionRecord:
    stack: tuple
    action: np.ndarray
    path: PathSpec
    outcome: FollowOutcome
    reward: RewardBreakdown
    next_stack: tuple
    done: bool
    robot: int = 0


@dataclass
class EpisodeResult:
    outcome: EpisodeOutcome
    decisions: int
    steps: int
    poses: list
    steering: list
    planned: list
    rewards: list
    aborted: bool = False    # budget ran out mid-episode; stats should skip it

    @property
    def success(self) -> bool:
        return self.outcome is EpisodeOutcome.SUCCESS


def _segment_cfg(cfg: FollowerConfig, remaining: int) -> FollowerConfig:
    if remaining >= cfg.max_steps:
        return cfg
    return replace(cfg, max_steps=remaining)


def run_episode(world: WorldState, policy_fn, cfg: RolloutConfig = RolloutConfig(),
                on_decision=None) -> EpisodeResult:
    """Single-robot semi-MDP loop: plan, drive to the path's end, repeat.

    A path that completes, stalls, or gets interrupted simply yields the next
    decision from wherever the robot is; only collision, goal arrival, or the
    dt budget end the episode.
    """
    history: list[Observation] = []
    obs = observe(world, 0, cfg.costmap)
    poses = [world.robots[0].pose]
    steering: list[float] = []
    planned: list[PathSpec] = []
    rewards: list[RewardBreakdown] = []
    steps = 0
    decisions = 0
    aborted = False
    outcome = None
    while True:
        if steps >= cfg.timeout_steps:
            outcome = EpisodeOutcome.TIMEOUT
            break
        maps, goals = stack_arrays(build_frame_stack(history, obs))
        action = policy_fn(maps, goals)
        path = decode_action(action, world.robots[0].pose, cfg.actions)
        out = follow_path(world, 0, path,
                          _segment_cfg(cfg.follower, cfg.timeout_steps - steps))
        steps += out.steps
        decisions += 1
        poses += out.trajectory[1:]
        steering += out.steering
        planned.append(path)

        collided = out.status is FollowStatus.COLLIDED
        reached = bool((not collided) and reached_goal(out.end_state.pose, world.goals[0]))
        breakdown = compute_reward(path.curve, out, reached, cfg.reward)
        rewards.append(breakdown)
        done = collided or reached

        new_obs = observe(world, 0, cfg.costmap)
        if on_decision is not None:
            stack = build_frame_stack(history, obs)
            next_stack = build_frame_stack(history + [obs], new_obs)
            if on_decision(DecisionRecord(stack, action, path, out, breakdown,
                                          next_stack, done)) is False:
                aborted = True
        history = (history + [obs])[-2:]
        obs = new_obs

        if collided:
            outcome = EpisodeOutcome.COLLISION
            break
        if reached:
            outcome = EpisodeOutcome.SUCCESS
            break
        if aborted:
            outcome = EpisodeOutcome.TIMEOUT
            break
    return EpisodeResult(outcome, decisions, steps, poses, steering, planned,
                         rewards, aborted)


def run_multi_episode(world: WorldState, policy_fn,
                      cfg: RolloutConfig = RolloutConfig(),
                      on_decision=None) -> list[EpisodeResult]:
    """All robots share one policy and one clock; finished robots park in place
    and become obstacles for everyone else."""
    n = len(world.robots)
    history = [[] for _ in range(n)]
    obs = [observe(world, i, cfg.costmap) for i in range(n)]
    followers: list[PathFollower | None] = [None] * n
    pending = [None] * n
    active = [True] * n
    outcome: list[EpisodeOutcome | None] = [None] * n
    decisions = [0] * n
    poses = [[world.robots[i].pose] for i in range(n)]
    steering = [[] for _ in range(n)]
    planned = [[] for _ in range(n)]
    rewards = [[] for _ in range(n)]
    steps = 0
    aborted = False

    while any(active) and steps < cfg.timeout_steps and not aborted:
        for i in range(n):
            if active[i] and followers[i] is None:
                stack = build_frame_stack(history[i], obs[i])
                action = policy_fn(*stack_arrays(stack))
                path = decode_action(action, world.robots[i].pose, cfg.actions)
                followers[i] = PathFollower(
                    path, _segment_cfg(cfg.follower, cfg.timeout_steps - steps))
                pending[i] = (stack, action, path)
                planned[i].append(path)
        commands = [followers[i].command(world.robots[i]) if active[i] else None
                    for i in range(n)]
        advance(world, commands)
        steps += 1
        for i in range(n):
            if not active[i]:
                continue
            poses[i].append(world.robots[i].pose)
            steering[i].append(world.robots[i].theta)
            status = followers[i].check(world, i)
            if status is None:
                continue
            stack, action, path = pending[i]
            out = FollowOutcome(status, followers[i].steps, world.robots[i], [], [])
            collided = status is FollowStatus.COLLIDED
            reached = bool((not collided) and reached_goal(world.robots[i].pose,
                                                           world.goals[i]))
            breakdown = compute_reward(path.curve, out, reached, cfg.reward)
            rewards[i].append(breakdown)
            decisions[i] += 1
            done = collided or reached
            new_obs = observe(world, i, cfg.costmap)
            if on_decision is not None:
                next_stack = build_frame_stack(history[i] + [obs[i]], new_obs)
                if on_decision(DecisionRecord(stack, action, path, out, breakdown,
                                              next_stack, done, robot=i)) is False:
                    aborted = True
            history[i] = (history[i] + [obs[i]])[-2:]
            obs[i] = new_obs
            followers[i] = None
            pending[i] = None
            if collided:
                active[i] = False
                outcome[i] = EpisodeOutcome.COLLISION
            elif reached:
                active[i] = False
                outcome[i] = EpisodeOutcome.SUCCESS

    return [EpisodeResult(outcome[i] or EpisodeOutcome.TIMEOUT, decisions[i], steps,
                          poses[i], steering[i], planned[i], rewards[i], aborted)
            for i in range(n)]


# -- low-level baseline runner ------------------------------------------------------

def run_lowlevel_episode(world: WorldState, policy_fn,
                         cfg: RolloutConfig = RolloutConfig(),
                         on_decision=None) -> EpisodeResult:
    """Per-dt control baseline: the policy emits (v, theta) every tick and the
    reward collapses to arrival/collision only."""
    history: list[Observation] = []
    obs = observe(world, 0, cfg.costmap)
    poses = [world.robots[0].pose]
    steering: list[float] = []
    rewards: list[RewardBreakdown] = []
    steps = 0
    aborted = False
    outcome = None
    while True:
        if steps >= cfg.timeout_steps:
            outcome = EpisodeOutcome.TIMEOUT
            break
        maps, goals = stack_arrays(build_frame_stack(history, obs))
        action = policy_fn(maps, goals)
        advance(world, [(float(action[0]), float(action[1]))])
        steps += 1
        poses.append(world.robots[0].pose)
        steering.append(world.robots[0].theta)

        collided = collision_check(world, 0)
        reached = bool((not collided) and reached_goal(world.robots[0].pose, world.goals[0]))
        goal_term = cfg.reward.r_arr if reached else 0.0
        safe_term = cfg.reward.r_col if collided else 0.0
        breakdown = RewardBreakdown(goal_term, safe_term, 0.0, 0.0,
                                    goal_term + safe_term)
        rewards.append(breakdown)
        done = collided or reached

        new_obs = observe(world, 0, cfg.costmap)
        if on_decision is not None:
            stack = build_frame_stack(history, obs)
            next_stack = build_frame_stack(history + [obs], new_obs)
            if on_decision(DecisionRecord(stack, action, None, None, breakdown,
                                          next_stack, done)) is False:
                aborted = True
        history = (history + [obs])[-2:]
        obs = new_obs

        if collided:
            outcome = EpisodeOutcome.COLLISION
            break
        if reached:
            outcome = EpisodeOutcome.SUCCESS
            break
        if aborted:
            outcome = EpisodeOutcome.TIMEOUT
            break
    return EpisodeResult(outcome, steps, steps, poses, steering, [], rewards, aborted)


LOWLEVEL_SCALE = (V_MAX / 2.0, THETA_MAX)
LOWLEVEL_OFFSET = (V_MAX / 2.0, 0.0)


# -- curriculum ---------------------------------------------------------------------

def promote_curriculum(successes, position: int, n_rungs: int,
                       threshold: float = 0.8, window: int = 100) -> int:
    """Advance one rung when the rolling success rate clears the bar. Pure and
    monotone: never demotes, never skips rungs, no-op on the last rung."""
    if position + 1 >= n_rungs:
        return position
    if len(successes) < window:
        return position
    recent = list(successes)[-window:]
    if sum(recent) / window >= threshold:
        return position + 1
    return position


class Curriculum:
    def __init__(self, stage: int = 1, fixed_kind=None,
                 threshold: float = 0.8, window: int = 100):
        if stage not in (1, 2):
            raise ValueError("stage must be 1 or 2")
        self.stage = stage
        self.fixed = ScenarioKind(fixed_kind) if fixed_kind else None
        self.threshold = threshold
        self.window = window
        self.position = 0
        self._wins: list[bool] = []

    def next_kind(self, rng: np.random.Generator) -> ScenarioKind:
        if self.fixed is not None:
            return self.fixed
        if self.stage == 1:
            return STAGE1_KINDS[self.position]
        return STAGE2_KINDS[int(rng.integers(len(STAGE2_KINDS)))]

    def record(self, success: bool):
        # stage 2 is a fixed mixture; only the stage-1 ladder promotes
        if self.fixed is not None or self.stage != 1:
            return
        self._wins.append(bool(success))
        new_pos = promote_curriculum(self._wins, self.position, len(STAGE1_KINDS),
                                     self.threshold, self.window)
        if new_pos != self.position:
            self.position = new_pos
            self._wins = []


# -- training loop ------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    total_decisions: int = 20_000
    stage: int = 1
    fixed_kind: str | None = None       # pin every episode to one scenario kind
    init_checkpoint: str | None = None
    lowlevel: bool = False              # per-dt (v, theta) baseline instead of paths
    eval_every: int = 2000              # 0 disables in-run eval probes
    eval_episodes: int = 50
    eval_kind: str | None = None        # defaults to fixed_kind or the stage staple
    early_stop_succ: float | None = None
    promote_threshold: float = 0.8
    promote_window: int = 100
    # Probability that a post-warmup episode runs on tight random actions
    # instead of the policy. Keeps a trickle of gentle, occasionally-successful
    # episodes flowing into the buffer so crash-heavy phases can't monopolize
    # the data the critics see. 0 = pure SAC behaviour.
    explore_episode_prob: float = 0.0
    sac: SACConfig = field(default_factory=SACConfig)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)


@dataclass
class TrainResult:
    checkpoint: Path
    log_path: Path
    decisions: int
    episodes: int
    eval_history: list          # (decision, success_rate)
    stopped_early: bool


def evaluate_success(policy_fn, kind, n_episodes: int, cfg: RolloutConfig,
                     seed_base: int = EVAL_SEED_BASE) -> float:
    """Deterministic success rate over held-out scenario seeds."""
    kind = ScenarioKind(kind)
    wins = 0
    total = 0
    for i in range(n_episodes):
        world = generate_scenario(kind, seed=seed_base + i)
        if kind is ScenarioKind.AGENTS8:
            results = run_multi_episode(world, policy_fn, cfg)
        else:
            results = [run_episode(world, policy_fn, cfg)]
        wins += sum(r.success for r in results)
        total += len(results)
    return wins / total


def _episode_seed(cfg_seed: int, episode: int) -> int:
    return cfg_seed * 1_000_000 + episode


def train(cfg: TrainConfig, out_dir) -> TrainResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(cfg.seed)
    init_ss, noise_ss, learn_ss, mix_ss = ss.spawn(4)
    noise_rng = np.random.default_rng(noise_ss)
    learn_rng = np.random.default_rng(learn_ss)
    mix_rng = np.random.default_rng(mix_ss)

    if cfg.init_checkpoint:
        agent, _ = load_checkpoint(cfg.init_checkpoint)
    elif cfg.lowlevel:
        agent = SACAgent(cfg.sac, np.random.default_rng(init_ss), n_actions=2,
                         action_scale=LOWLEVEL_SCALE, action_offset=LOWLEVEL_OFFSET)
    else:
        agent = SACAgent(cfg.sac, np.random.default_rng(init_ss),
                         n_actions=cfg.rollout.actions.n)
    buffer = ReplayBuffer(cfg.sac.buffer_capacity, agent.n_actions)
    curriculum = Curriculum(cfg.stage, cfg.fixed_kind,
                            cfg.promote_threshold, cfg.promote_window)
    eval_kind = cfg.eval_kind or cfg.fixed_kind or \
        (STAGE1_KINDS[0] if cfg.stage == 1 else ScenarioKind.MIXED4X4)

    log_path = out_dir / "train_log.jsonl"
    ckpt_path = out_dir / "checkpoint.npz"
    state = {"decision": 0, "episode": 0, "stop": False, "explore_mode": "seed",
             "explore_episode": False}
    eval_history: list = []
    can_seed = not cfg.lowlevel  # the tilted-line heuristic emits path offsets

    def explore_action(maps, goals):
        if state["explore_mode"] == "seed" and can_seed:
            return agent.seeded_action(goals, noise_rng, cfg.rollout.actions)
        return agent.random_action(noise_rng,
                                   tight=state["explore_mode"] != "broad")

    def policy_fn(maps, goals):
        if state["decision"] < cfg.sac.warmup and not cfg.init_checkpoint:
            return explore_action(maps, goals)
        if state["explore_episode"]:
            return explore_action(maps, goals)
        return agent.act(maps, goals, noise_rng)

    def eval_policy(maps, goals):
        return agent.act(maps, goals, deterministic=True)

    with open(log_path, "w") as log:

        def on_decision(rec: DecisionRecord):
            buffer.add(rec.stack, rec.action, rec.reward.total, rec.next_stack,
                       rec.done)
            state["decision"] += 1
            losses = None
            if len(buffer) >= max(cfg.sac.warmup, cfg.sac.batch_size):
                for _ in range(cfg.sac.updates_per_decision):
                    losses = agent.update(buffer.sample(cfg.sac.batch_size,
                                                        learn_rng), learn_rng)
            entry = {
                "decision": state["decision"],
                "episode": state["episode"],
                "kind": world.kind,
                "robot": rec.robot,
                "reward": asdict(rec.reward),
                "tau": rec.outcome.steps if rec.outcome else 1,
                "done": rec.done,
                "buffer": len(buffer),
                "losses": losses,
            }
            log.write(json.dumps(entry, sort_keys=True) + "\n")

            if cfg.eval_every and state["decision"] % cfg.eval_every == 0:
                succ = evaluate_success(eval_policy, eval_kind, cfg.eval_episodes,
                                        cfg.rollout)
                eval_history.append((state["decision"], succ))
                log.write(json.dumps({"decision": state["decision"],
                                      "eval_succ": succ}, sort_keys=True) + "\n")
                save_checkpoint(ckpt_path, agent,
                                {"decision": state["decision"], "succ": succ})
                if cfg.early_stop_succ is not None and succ >= cfg.early_stop_succ:
                    state["stop"] = True
            if state["stop"] or state["decision"] >= cfg.total_decisions:
                return False
            return True

        while state["decision"] < cfg.total_decisions and not state["stop"]:
            # exploration modes are held for the whole episode, see random_action
            u = noise_rng.random()
            state["explore_mode"] = ("seed" if u < 0.5 else
                                     "tight" if u < 0.75 else "broad")
            state["explore_episode"] = bool(
                noise_rng.random() < cfg.explore_episode_prob)
            kind = curriculum.next_kind(mix_rng)
            world = generate_scenario(kind, _episode_seed(cfg.seed, state["episode"]))
            if cfg.lowlevel:
                results = [run_lowlevel_episode(world, policy_fn, cfg.rollout,
                                                on_decision)]
            elif kind is ScenarioKind.AGENTS8:
                results = run_multi_episode(world, policy_fn, cfg.rollout,
                                            on_decision)
            else:
                results = [run_episode(world, policy_fn, cfg.rollout, on_decision)]
            for r in results:
                if not r.aborted:
                    curriculum.record(r.success)
            state["episode"] += 1

    save_checkpoint(ckpt_path, agent, {"decision": state["decision"],
                                       "episodes": state["episode"]})
    return TrainResult(ckpt_path, log_path, state["decision"], state["episode"],
                       eval_history, state["stop"])
