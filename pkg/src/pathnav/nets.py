"""Policy and critic networks over costmap stacks.

All parameters are float32 Tensors initialized fan-in uniform from a seeded
generator, so two builds from the same seed are bit-identical. Inputs get
scaled to roughly unit range inside the forward passes (costmaps are already
{0, 0.5, 1}; goal offsets are meters over a ~10 m arena).
"""
from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor, concat, conv2d

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

GOAL_XY_SCALE = 0.1        # meters -> ~[-1, 1] over the arena
GOAL_ANGLE_SCALE = 1.0 / math.pi


class Module:
    def named_parameters(self, prefix: str = ""):
        out = []
        for name, value in vars(self).items():
            key = prefix + name
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((key, value))
            elif isinstance(value, Module):
                out += value.named_parameters(key + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out += item.named_parameters(f"{key}.{i}.")
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_arrays(self):
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_arrays(self, arrays: dict):
        params = dict(self.named_parameters())
        if set(arrays) != set(params):
            missing = set(params) ^ set(arrays)
            raise ValueError(f"parameter names do not match: {sorted(missing)[:4]}")
        for k, p in params.items():
            a = np.asarray(arrays[k], dtype=p.data.dtype)
            if a.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {a.shape} vs {p.data.shape}")
            p.data[...] = a


def _uniform(rng, shape, fan_in):
    k = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-k, k, size=shape).astype(np.float32), requires_grad=True)


class Linear(Module):
    def __init__(self, rng, n_in: int, n_out: int):
        self.w = _uniform(rng, (n_in, n_out), n_in)
        self.b = _uniform(rng, (n_out,), n_in)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b


class Conv2d(Module):
    def __init__(self, rng, c_in: int, c_out: int, kernel: int = 3,
                 stride: int = 2, padding: int = 1):
        self.stride = stride
        self.padding = padding
        fan_in = c_in * kernel * kernel
        self.w = _uniform(rng, (c_out, c_in, kernel, kernel), fan_in)
        self.b = _uniform(rng, (c_out,), fan_in)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, self.b, self.stride, self.padding)


class ConvEncoder(Module):
    def __init__(self, rng, in_channels: int = 3, channels=(16, 32, 32), size: int = 84):
        self.convs = []
        c = in_channels
        for c_out in channels:
            self.convs.append(Conv2d(rng, c, c_out))
            c = c_out
            size = (size + 2 * self.convs[-1].padding - 3) // self.convs[-1].stride + 1
        self.out_features = c * size * size

    def __call__(self, x: Tensor) -> Tensor:
        for conv in self.convs:
            x = conv(x).relu()
        return x.reshape(x.shape[0], self.out_features)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float32))


def scale_goals(goals) -> Tensor:
    """(B, 3k) stacked relative goals -> unit-ish network inputs."""
    g = np.asarray(goals, dtype=np.float32)
    k = g.shape[1] // 3
    scale = np.tile([GOAL_XY_SCALE, GOAL_XY_SCALE, GOAL_ANGLE_SCALE], k).astype(np.float32)
    return Tensor(g * scale)


class GaussianPolicy(Module):
    """Squashed-Gaussian head: a = offset + scale * tanh(u), u ~ N(mu, sigma)."""

    def __init__(self, rng, n_actions: int = 3, action_scale=0.4, action_offset=0.0,
                 conv_channels=(16, 32, 32), hidden: int = 256, goal_dim: int = 9):
        self.encoder = ConvEncoder(rng, 3, conv_channels)
        self.trunk = Linear(rng, self.encoder.out_features + goal_dim, hidden)
        # late goal re-entry, same reason as the critic's action branch: a
        # 9-dim goal vector against ~1000 conv features in one shared layer is
        # drowned at init, and the policy comes out goal-blind
        self.g_embed = Linear(rng, goal_dim, 32)
        self.trunk2 = Linear(rng, hidden + 32, hidden)
        self.mu_head = Linear(rng, hidden, n_actions)
        self.log_std_head = Linear(rng, hidden, n_actions)
        # buffers, not parameters
        self._scale = np.broadcast_to(np.asarray(action_scale, dtype=np.float32),
                                      (n_actions,)).copy()
        self._offset = np.broadcast_to(np.asarray(action_offset, dtype=np.float32),
                                       (n_actions,)).copy()

    def heads(self, costmaps, goals):
        feats = self.encoder(_as_tensor(costmaps))
        g = scale_goals(goals)
        h = self.trunk(concat([feats, g], axis=1)).relu()
        h = self.trunk2(concat([h, self.g_embed(g).relu()], axis=1)).relu()
        mean = self.mu_head(h)
        log_std = self.log_std_head(h).clamp(LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def sample(self, costmaps, goals, rng=None, deterministic: bool = False,
               return_mean: bool = False):
        """Returns (action Tensor (B,n), log-prob Tensor (B,1))."""
        mean, log_std = self.heads(costmaps, goals)
        std = log_std.exp()
        if deterministic:
            u = mean
        else:
            eps = Tensor(rng.standard_normal(mean.shape).astype(np.float32))
            u = mean + std * eps
        squashed = u.tanh()
        action = squashed * self._scale + self._offset
        # log N(u) minus the log-det of the tanh+scale change of variables;
        # log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)) avoids cancellation
        z = (u - mean) / std
        log_normal = z * z * -0.5 - log_std - 0.5 * math.log(2.0 * math.pi)
        log_det = 2.0 * (math.log(2.0) - u - (u * -2.0).softplus()) \
            + np.log(self._scale)
        logp = (log_normal - log_det).sum(axis=1, keepdims=True)
        if return_mean:
            return action, logp, mean
        return action, logp

    def act(self, costmaps, goals, rng=None, deterministic: bool = False) -> np.ndarray:
        action, _ = self.sample(costmaps, goals, rng, deterministic)
        return np.clip(action.data[0], self._offset - self._scale,
                       self._offset + self._scale)


class QNetwork(Module):
    def __init__(self, rng, n_actions: int = 3, action_scale=0.4, action_offset=0.0,
                 conv_channels=(16, 32, 32), hidden: int = 256, goal_dim: int = 9):
        self.encoder = ConvEncoder(rng, 3, conv_channels)
        self.trunk = Linear(rng, self.encoder.out_features + goal_dim + n_actions, hidden)
        # action and goal get their own embeddings and re-enter after the wide
        # image features are compressed: a handful of raw dims against ~1000
        # conv features in one shared layer get drowned at init, and the
        # critic comes out blind to them
        self.a_embed = Linear(rng, n_actions, 32)
        self.g_embed = Linear(rng, goal_dim, 32)
        self.trunk2 = Linear(rng, hidden + 64, hidden)
        self.out = Linear(rng, hidden, 1)
        self._scale = np.broadcast_to(np.asarray(action_scale, dtype=np.float32),
                                      (n_actions,)).copy()
        self._offset = np.broadcast_to(np.asarray(action_offset, dtype=np.float32),
                                       (n_actions,)).copy()

    def __call__(self, costmaps, goals, actions) -> Tensor:
        feats = self.encoder(_as_tensor(costmaps))
        if isinstance(actions, Tensor):
            a = (actions - self._offset) * (1.0 / self._scale)
        else:
            a = Tensor((np.asarray(actions, dtype=np.float32) - self._offset) / self._scale)
        g = scale_goals(goals)
        h = self.trunk(concat([feats, g, a], axis=1)).relu()
        h = self.trunk2(concat([h, self.a_embed(a).relu(),
                                self.g_embed(g).relu()], axis=1)).relu()
        return self.out(h)


def polyak_update(target: Module, online: Module, factor: float):
    """target <- factor * online + (1 - factor) * target, in place."""
    for (tn, tp), (on, op) in zip(target.named_parameters(), online.named_parameters()):
        assert tn == on
        tp.data *= 1.0 - factor
        tp.data += factor * op.data


def clone_into(target: Module, online: Module):
    target.load_state_arrays(online.state_arrays())
