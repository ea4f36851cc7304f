"""TOML run configuration.

One file describes a whole run; every section maps onto one of the frozen
config dataclasses, so the set of legal keys is exactly the set of fields.
Unknown keys are errors (with their dotted path), not warnings -- a typo in
`eps_straight` silently reverting to the default would invalidate a run.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actions import ActionSpaceConfig
from .control import FollowerConfig
from .geometry import CurveKind
from .reward import RewardConfig
from .rl import EVAL_SEED_BASE, RolloutConfig, SACConfig, TrainConfig
from .scenarios import ScenarioKind
from .world import CostmapConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = 1
    out: str | None = None


@dataclass(frozen=True)
class TrainSection:
    total_decisions: int = 20_000
    stage: int = 1
    fixed_kind: str | None = None
    init_checkpoint: str | None = None
    lowlevel: bool = False
    eval_every: int = 2000
    eval_episodes: int = 50
    eval_kind: str | None = None
    early_stop_succ: float | None = None
    promote_threshold: float = 0.8
    promote_window: int = 100


@dataclass(frozen=True)
class EvalSection:
    kind: str = "static4"
    episodes: int = 100
    seed_base: int = EVAL_SEED_BASE


@dataclass(frozen=True)
class RolloutSection:
    timeout_steps: int = 600


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    actions: ActionSpaceConfig = field(default_factory=ActionSpaceConfig)
    follower: FollowerConfig = field(default_factory=FollowerConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    costmap: CostmapConfig = field(default_factory=CostmapConfig)
    sac: SACConfig = field(default_factory=SACConfig)
    train: TrainSection = field(default_factory=TrainSection)
    rollout: RolloutSection = field(default_factory=RolloutSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def rollout_config(self) -> RolloutConfig:
        return RolloutConfig(actions=self.actions, follower=self.follower,
                             reward=self.reward, costmap=self.costmap,
                             timeout_steps=self.rollout.timeout_steps)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            seed=self.run.seed, total_decisions=t.total_decisions, stage=t.stage,
            fixed_kind=t.fixed_kind, init_checkpoint=t.init_checkpoint,
            lowlevel=t.lowlevel, eval_every=t.eval_every,
            eval_episodes=t.eval_episodes, eval_kind=t.eval_kind,
            early_stop_succ=t.early_stop_succ,
            promote_threshold=t.promote_threshold, promote_window=t.promote_window,
            sac=self.sac, rollout=self.rollout_config(),
        )


_SECTIONS = {f.name: f.type for f in fields(RunConfig)}


def _coerce(value, section: str, name: str, target_type):
    where = f"{section}.{name}"
    if section == "actions" and name == "kind":
        try:
            return CurveKind(value)
        except ValueError:
            raise ConfigError(f"{where}: unknown curve kind {value!r}") from None
    if section == "sac" and name == "conv_channels":
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(f"{where}: expected a list of ints")
        return tuple(value)
    if isinstance(value, bool):
        if "bool" not in target_type:
            raise ConfigError(f"{where}: unexpected boolean")
        return value
    if isinstance(value, int) and "float" in target_type:
        return float(value)
    return value


def _build_section(cls, data: dict, section: str):
    legal = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in legal:
            raise ConfigError(f"unknown key {section}.{key}")
    kwargs = {k: _coerce(v, section, k, str(legal[k].type)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}") from None


def _validate(cfg: RunConfig) -> RunConfig:
    for label, kind in (("train.fixed_kind", cfg.train.fixed_kind),
                        ("train.eval_kind", cfg.train.eval_kind),
                        ("eval.kind", cfg.eval.kind)):
        if kind is not None:
            try:
                ScenarioKind(kind)
            except ValueError:
                raise ConfigError(f"{label}: unknown scenario kind {kind!r}") from None
    if cfg.train.stage not in (1, 2):
        raise ConfigError("train.stage must be 1 or 2")
    if cfg.run.workers < 1:
        raise ConfigError("run.workers must be >= 1")
    return cfg


def parse_config(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section [{sorted(unknown)[0]}]")
    kwargs = {}
    for name, f in ((f.name, f) for f in fields(RunConfig)):
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            kwargs[name] = _build_section(f.default_factory, data[name], name)
    return _validate(RunConfig(**kwargs))


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    return parse_config(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, CurveKind):
        return f'"{v.value}"'
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v).__name__} to TOML")


def emit_toml(cfg: RunConfig) -> str:
    """Fully resolved snapshot: every key explicit, None fields commented out."""
    lines = []
    for sec in fields(RunConfig):
        lines.append(f"[{sec.name}]")
        section = getattr(cfg, sec.name)
        for f in fields(section):
            v = getattr(section, f.name)
            if v is None:
                lines.append(f"# {f.name} unset")
            else:
                lines.append(f"{f.name} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)


def replace_section(cfg: RunConfig, section: str, **changes) -> RunConfig:
    return dataclasses.replace(
        cfg, **{section: dataclasses.replace(getattr(cfg, section), **changes)})
