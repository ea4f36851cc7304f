import json

import numpy as np
import pytest
from scipy import stats

from pathnav.geometry import Pose2D
from pathnav.rl import (
    Curriculum,
    EpisodeOutcome,
    Observation,
    ReplayBuffer,
    RolloutConfig,
    SACAgent,
    SACConfig,
    ScenarioKind,
    TrainConfig,
    build_frame_stack,
    evaluate_success,
    load_checkpoint,
    promote_curriculum,
    run_episode,
    run_lowlevel_episode,
    run_multi_episode,
    save_checkpoint,
    stack_arrays,
    train,
)
from pathnav.scenarios import empty_world, generate_scenario
from pathnav.world import Circle, RelativeGoal

TINY = SACConfig(batch_size=4, buffer_capacity=64, warmup=4, hidden=8,
                 conv_channels=(2, 2), lr=1e-3)


def _ob(rng, x=1.0):
    grid = rng.choice([0.0, 0.5, 1.0], size=(84, 84)).astype(np.float32)
    return Observation(grid, RelativeGoal(x, 0.5, 0.1))


def straight_policy(maps, goals):
    return np.zeros(3, dtype=np.float32)


# -- frame stack ---------------------------------------------------------------

def test_frame_stack_padding():
    rng = np.random.default_rng(0)
    a, b, c = _ob(rng), _ob(rng), _ob(rng)
    assert build_frame_stack([], c) == (c, c, c)
    assert build_frame_stack([a], c) == (a, a, c)
    assert build_frame_stack([a, b], c) == (a, b, c)
    assert build_frame_stack([_ob(rng), a, b], c) == (a, b, c)


def test_stack_arrays_layout():
    rng = np.random.default_rng(1)
    obs = [Observation(np.full((84, 84), v, dtype=np.float32),
                       RelativeGoal(v, 10 * v, 100 * v)) for v in (0.0, 0.5, 1.0)]
    maps, goals = stack_arrays(tuple(obs))
    assert maps.shape == (3, 84, 84) and maps.dtype == np.float32
    assert np.all(maps[1] == 0.5)
    # goals are frame-major, oldest first
    assert np.allclose(goals, [0, 0, 0, 0.5, 5, 50, 1, 10, 100])


# -- replay buffer ---------------------------------------------------------------

def test_buffer_dedup_and_exact_roundtrip():
    rng = np.random.default_rng(2)
    buf = ReplayBuffer(capacity=16, n_actions=3)
    o1, o2 = _ob(rng), _ob(rng)
    stack = (o1, o1, o2)
    nxt = (o1, o2, o2)
    buf.add(stack, np.array([0.1, -0.2, 0.3]), 1.5, nxt, False)
    # three distinct observations -> three slots, shared via index
    assert buf._obs_count == 2
    assert o1.index is not None and o2.index is not None
    batch = buf.sample(4, np.random.default_rng(0))
    assert batch["maps"].shape == (4, 3, 84, 84)
    assert np.array_equal(batch["maps"][0, 0], o1.costmap)  # exact {0,.5,1} decode
    assert np.allclose(batch["goals"][0, :3], [o1.goal.xg, o1.goal.yg, o1.goal.alphag])
    assert batch["rewards"][0] == np.float32(1.5)


def test_buffer_fifo_bound_and_overwrite():
    rng = np.random.default_rng(3)
    buf = ReplayBuffer(capacity=4, n_actions=3)
    expected = {}
    for k in range(20):
        o_a, o_b = _ob(rng), _ob(rng)   # worst case: two fresh obs per transition
        buf.add((o_a, o_a, o_a), np.zeros(3), float(k), (o_a, o_b, o_b), k % 2 == 0)
        expected[k % 4] = (k, o_a.costmap.copy(), o_b.costmap.copy())
    assert len(buf) == 4
    # every live row must still decode to the costmaps it was stored with,
    # even though the observation ring has wrapped several times
    for pos, (k, m_a, m_b) in expected.items():
        maps_s, _ = buf._gather(buf._s[[pos]])
        maps_s2, _ = buf._gather(buf._s2[[pos]])
        assert buf._r[pos] == np.float32(k)
        assert np.array_equal(maps_s[0, 0], m_a)
        assert np.array_equal(maps_s2[0, 2], m_b)


def test_buffer_sampling_is_uniform():
    rng = np.random.default_rng(4)
    buf = ReplayBuffer(capacity=10, n_actions=3)
    o = _ob(rng)
    for k in range(10):
        buf.add((o, o, o), np.zeros(3), float(k), (o, o, o), False)
    draws = buf.sample(8000, np.random.default_rng(5))["rewards"].astype(int)
    counts = np.bincount(draws, minlength=10)
    p = stats.chisquare(counts).pvalue
    assert p > 0.001


# -- agent ----------------------------------------------------------------------

def _fake_batch(rng, batch=4, n_actions=3, all_done=False):
    return {
        "maps": rng.choice([0.0, 0.5, 1.0], size=(batch, 3, 84, 84)).astype(np.float32),
        "goals": rng.uniform(-4, 4, size=(batch, 9)).astype(np.float32),
        "actions": rng.uniform(-0.4, 0.4, size=(batch, n_actions)).astype(np.float32),
        "rewards": rng.uniform(-2, 2, size=batch).astype(np.float32),
        "dones": np.full(batch, all_done, dtype=np.bool_),
        "next_maps": rng.choice([0.0, 0.5, 1.0], size=(batch, 3, 84, 84)).astype(np.float32),
        "next_goals": rng.uniform(-4, 4, size=(batch, 9)).astype(np.float32),
    }


def test_agent_act_bounds_and_deterministic_repeat():
    agent = SACAgent(TINY, np.random.default_rng(6))
    rng = np.random.default_rng(7)
    maps = rng.choice([0.0, 0.5, 1.0], size=(3, 84, 84)).astype(np.float32)
    goals = rng.uniform(-4, 4, size=9).astype(np.float32)
    for _ in range(20):
        a = agent.act(maps, goals, rng)
        assert a.shape == (3,) and np.all(np.abs(a) <= 0.4)
    d1 = agent.act(maps, goals, deterministic=True)
    d2 = agent.act(maps, goals, deterministic=True)
    assert np.array_equal(d1, d2)


def test_update_moves_targets_and_keeps_alpha_positive():
    agent = SACAgent(TINY, np.random.default_rng(8))
    before = agent.q1_target.state_arrays()
    online_before = agent.q1.state_arrays()
    rng = np.random.default_rng(9)
    info = agent.update(_fake_batch(rng), rng)
    for v in info.values():
        assert np.isfinite(v)
    assert info["alpha"] > 0.0
    after = agent.q1_target.state_arrays()
    moved = [k for k in after if not np.array_equal(before[k], after[k])]
    assert moved
    # target lags the online net rather than copying it
    k = moved[0]
    assert not np.array_equal(after[k], agent.q1.state_arrays()[k])
    assert np.allclose(after[k],
                       0.005 * agent.q1.state_arrays()[k] + 0.995 * before[k],
                       atol=1e-5) or not np.array_equal(online_before[k],
                                                        agent.q1.state_arrays()[k])


def test_terminal_batch_regresses_q_toward_reward():
    # with done=True everywhere the target is exactly r, so repeated updates on
    # one batch must pull Q predictions onto the rewards
    agent = SACAgent(SACConfig(batch_size=4, warmup=0, hidden=8, conv_channels=(2, 2),
                               lr=3e-3, reward_scale=1.0), np.random.default_rng(10))
    rng = np.random.default_rng(11)
    batch = _fake_batch(rng, all_done=True)
    first = None
    for i in range(150):
        info = agent.update(batch, np.random.default_rng(12))
        if first is None:
            first = info["critic_loss"]
    assert info["critic_loss"] < first * 0.1
    q = agent.q1(batch["maps"], batch["goals"], batch["actions"]).data[:, 0]
    assert np.max(np.abs(q - batch["rewards"])) < 0.5


def test_update_is_deterministic_given_seeds():
    def run():
        agent = SACAgent(TINY, np.random.default_rng(13))
        rng = np.random.default_rng(14)
        out = [agent.update(_fake_batch(np.random.default_rng(15)), rng)
               for _ in range(3)]
        return out, agent.policy.state_arrays()

    o1, p1 = run()
    o2, p2 = run()
    assert o1 == o2
    for k in p1:
        assert np.array_equal(p1[k], p2[k])


# -- checkpoints -------------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path):
    agent = SACAgent(TINY, np.random.default_rng(16))
    rng = np.random.default_rng(17)
    for _ in range(2):
        agent.update(_fake_batch(rng), rng)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, agent, {"note": "x"})
    loaded, meta = load_checkpoint(path)
    assert meta["extra"]["note"] == "x"
    assert loaded.updates == agent.updates
    assert loaded.alpha == agent.alpha
    for mname, mod in agent._modules().items():
        got = loaded._modules()[mname].state_arrays()
        for k, v in mod.state_arrays().items():
            assert np.array_equal(got[k], v), (mname, k)
    assert loaded.critic_opt.t == agent.critic_opt.t
    for m1, m2 in zip(loaded.critic_opt.m, agent.critic_opt.m):
        assert np.array_equal(m1, m2)
    maps = np.zeros((3, 84, 84), dtype=np.float32)
    goals = np.zeros(9, dtype=np.float32)
    assert np.array_equal(agent.act(maps, goals, deterministic=True),
                          loaded.act(maps, goals, deterministic=True))


def test_checkpoint_schema_rejected(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez_compressed(path, meta=np.array(json.dumps({"schema": 99})))
    with pytest.raises(ValueError, match="schema"):
        load_checkpoint(path)


# -- episode runners ----------------------------------------------------------------

def test_semi_mdp_one_transition_per_path():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(30.0, 0, 0))
    records = []
    cfg = RolloutConfig(timeout_steps=200)
    result = run_episode(world, straight_policy, cfg,
                         on_decision=lambda r: records.append(r) or True)
    assert result.outcome is EpisodeOutcome.TIMEOUT
    assert len(records) == result.decisions == len(result.planned) == len(result.rewards)
    assert result.steps == sum(r.outcome.steps for r in records)
    assert result.steps <= 200
    assert all(not r.done for r in records)       # truncation never sets done
    assert len(result.poses) == result.steps + 1
    assert len(result.steering) == result.steps
    # straight paths chain forward along +x
    assert result.poses[-1].x > 1.5
    assert abs(result.poses[-1].y) < 0.05


def test_episode_reaches_goal_straight_ahead():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(1.0, 0, 0))
    records = []
    result = run_episode(world, straight_policy, RolloutConfig(),
                         on_decision=lambda r: records.append(r) or True)
    assert result.outcome is EpisodeOutcome.SUCCESS
    assert records[-1].done
    assert records[-1].reward.goal == 500.0
    assert all(not r.done for r in records[:-1])


def test_episode_collision_terminates_with_penalty():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(4.0, 0, 0))
    world.obstacles = [Circle((0.5, 0.0), 0.2)]
    records = []
    result = run_episode(world, straight_policy, RolloutConfig(),
                         on_decision=lambda r: records.append(r) or True)
    assert result.outcome is EpisodeOutcome.COLLISION
    assert records[-1].done
    assert records[-1].reward.safe == -700.0
    assert not result.success


def test_episode_respects_exact_step_budget():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(50.0, 0, 0))
    result = run_episode(world, straight_policy, RolloutConfig(timeout_steps=23))
    assert result.steps == 23
    assert result.outcome is EpisodeOutcome.TIMEOUT


def test_abort_mid_episode():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(50.0, 0, 0))
    result = run_episode(world, straight_policy, RolloutConfig(timeout_steps=500),
                         on_decision=lambda r: False)
    assert result.aborted
    assert result.decisions == 1


def test_multi_episode_transition_accounting():
    world = generate_scenario(ScenarioKind.AGENTS8, seed=0)
    per_robot = {i: 0 for i in range(8)}

    def on_decision(rec):
        per_robot[rec.robot] += 1
        return True

    results = run_multi_episode(world, straight_policy,
                                RolloutConfig(timeout_steps=150), on_decision)
    assert len(results) == 8
    for i, r in enumerate(results):
        assert per_robot[i] == r.decisions == len(r.planned) == len(r.rewards)
        assert r.outcome in (EpisodeOutcome.SUCCESS, EpisodeOutcome.COLLISION,
                             EpisodeOutcome.TIMEOUT)
        assert len(r.steering) == len(r.poses) - 1


def test_lowlevel_episode_per_dt():
    world = empty_world(Pose2D(0, 0, 0), Pose2D(50.0, 0, 0))
    count = [0]

    def policy(maps, goals):
        count[0] += 1
        return np.array([0.4, 0.0], dtype=np.float32)

    result = run_lowlevel_episode(world, policy, RolloutConfig(timeout_steps=40))
    assert count[0] == 40 == result.steps == result.decisions
    assert result.outcome is EpisodeOutcome.TIMEOUT
    assert all(r.total == 0.0 for r in result.rewards)
    assert result.planned == []


# -- curriculum -----------------------------------------------------------------

def test_promote_curriculum_rules():
    assert promote_curriculum([True] * 99, 0, 2) == 0          # window not full
    assert promote_curriculum([True] * 100, 0, 2) == 1
    assert promote_curriculum([True] * 100, 1, 2) == 1         # last rung holds
    mixed = [True] * 79 + [False] * 21
    assert promote_curriculum(mixed, 0, 2) == 0                # 0.79 < 0.8
    assert promote_curriculum([False] * 50 + [True] * 100, 0, 3) == 1


def test_curriculum_ladder_and_mixture():
    cur = Curriculum(stage=1)
    rng = np.random.default_rng(18)
    assert cur.next_kind(rng) is ScenarioKind.EMPTY
    for _ in range(100):
        cur.record(True)
    assert cur.next_kind(rng) is ScenarioKind.STATIC4
    for _ in range(100):
        cur.record(True)
    assert cur.next_kind(rng) is ScenarioKind.STATIC16
    for _ in range(100):
        cur.record(True)
    assert cur.next_kind(rng) is ScenarioKind.STATIC16   # nothing above the top

    mix = Curriculum(stage=2)
    kinds = {mix.next_kind(rng) for _ in range(300)}
    assert kinds == {ScenarioKind.MIXED4X4, ScenarioKind.PED6, ScenarioKind.AGENTS8}

    pinned = Curriculum(stage=1, fixed_kind="static4")
    for _ in range(150):
        pinned.record(True)
    assert pinned.next_kind(rng) is ScenarioKind.STATIC4


def test_evaluate_success_range():
    succ = evaluate_success(straight_policy, "static4", 3, RolloutConfig(timeout_steps=120))
    assert 0.0 <= succ <= 1.0


# -- trainer -----------------------------------------------------------------------

def _smoke_cfg(seed=0):
    return TrainConfig(
        seed=seed, total_decisions=12, fixed_kind="static4", eval_every=0,
        sac=SACConfig(batch_size=4, buffer_capacity=64, warmup=6, hidden=8,
                      conv_channels=(2, 2)),
        rollout=RolloutConfig(timeout_steps=60),
    )


def test_train_smoke_and_determinism(tmp_path):
    r1 = train(_smoke_cfg(), tmp_path / "a")
    r2 = train(_smoke_cfg(), tmp_path / "b")
    assert r1.decisions == 12
    lines = (tmp_path / "a" / "train_log.jsonl").read_text().splitlines()
    assert len(lines) == 12
    entry = json.loads(lines[-1])
    assert entry["decision"] == 12
    assert entry["losses"] is not None            # updates began after warmup
    assert json.loads(lines[0])["losses"] is None
    # byte-identical reruns: logs and checkpoints
    assert (tmp_path / "a" / "train_log.jsonl").read_bytes() == \
        (tmp_path / "b" / "train_log.jsonl").read_bytes()
    assert (tmp_path / "a" / "checkpoint.npz").read_bytes() == \
        (tmp_path / "b" / "checkpoint.npz").read_bytes()
    agent, meta = load_checkpoint(r1.checkpoint)
    assert meta["extra"]["decision"] == 12
    assert agent.updates > 0


def test_train_resumes_from_checkpoint(tmp_path):
    r1 = train(_smoke_cfg(), tmp_path / "a")
    cfg = TrainConfig(
        seed=1, total_decisions=4, fixed_kind="static4", eval_every=0,
        init_checkpoint=str(r1.checkpoint),
        sac=SACConfig(batch_size=4, buffer_capacity=64, warmup=6, hidden=8,
                      conv_channels=(2, 2)),
        rollout=RolloutConfig(timeout_steps=60),
    )
    r2 = train(cfg, tmp_path / "c")
    agent1, _ = load_checkpoint(r1.checkpoint)
    agent2, _ = load_checkpoint(r2.checkpoint)
    assert agent2.updates >= agent1.updates
