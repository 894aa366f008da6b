"""Acting wrapper over an encoder + actor pair, with checkpoint loading."""

from __future__ import annotations

import numpy as np

from cnav import tensor as T
from cnav.checkpoint import CheckpointError, load_checkpoint
from cnav.config import RunConfig, run_config_from_dict
from cnav.networks import PolicyNets, deterministic_action


class ActingPolicy:
    """Maps batched observations to commands in [-1, 1]^3.

    Deterministic mode emits tanh(mean); stochastic mode draws one
    reparameterized sample using the supplied generator.
    """

    def __init__(self, encoder, actor, depth_max: float, deterministic: bool = True):
        self.encoder = encoder
        self.actor = actor
        self.depth_max = float(depth_max)
        self.deterministic = deterministic

    def encode_observations(self, observations) -> tuple:
        depth = np.stack([o.depth for o in observations]).astype(np.float32)
        depth = depth[:, None, :, :] / np.float32(self.depth_max)
        goal = np.stack([o.goal_body for o in observations])
        vel = np.stack([o.velocity for o in observations])
        return depth, goal, vel

    def act(self, observations, rng: np.random.Generator | None = None) -> np.ndarray:
        if not observations:
            return np.zeros((0, 3), dtype=np.float32)
        depth, goal, vel = self.encode_observations(observations)
        z = self.encoder.encode(T.Tensor(depth))
        mean, log_std, _ = self.actor.forward(z, goal, vel)
        if self.deterministic:
            return deterministic_action(mean)
        if rng is None:
            raise ValueError("stochastic acting needs a generator")
        noise = rng.standard_normal(mean.shape).astype(mean.dtype)
        return np.tanh(mean.data + np.exp(log_std.data) * noise)


def restore_nets(path) -> tuple:
    """(PolicyNets, RunConfig) rebuilt from a training checkpoint."""
    tensors, meta = load_checkpoint(path)
    if "config" not in meta:
        raise CheckpointError(f"{path}: no embedded run config; not a training checkpoint")
    cfg = run_config_from_dict(meta["config"])
    nets = PolicyNets(cfg.nets, cfg.world.depth_height, cfg.world.depth_width,
                      np.random.default_rng(0))
    for name, tensor in nets.named_params():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name}")
        if tensors[name].shape != tensor.shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {tensors[name].shape}, "
                f"expected {tensor.shape}")
        tensor.data[...] = tensors[name]
    return nets, cfg


def load_policy(path, deterministic: bool = True) -> tuple:
    """(ActingPolicy, RunConfig) from a checkpoint file."""
    nets, cfg = restore_nets(path)
    policy = ActingPolicy(nets.encoder, nets.actor, cfg.world.depth_max,
                          deterministic=deterministic)
    return policy, cfg
