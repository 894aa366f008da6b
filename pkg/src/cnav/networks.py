"""Vision autoencoder, gated Gaussian actor, and twin critics.

The encoder maps a depth frame to a compact latent vector through a valid
padding conv stack; the decoder mirrors it with transposed convs so the
reconstruction shape matches the input exactly (stack geometry is
validated at construction).  The actor is a fully connected Gaussian head
over [latent, scaled goal offset, body velocity] with a channel gate after
each hidden activation; the critics are two independent MLPs that also see
the action.
"""

from __future__ import annotations

import numpy as np

from cnav import cfs
from cnav import tensor as T
from cnav.config import NetConfig
from cnav.nn import Conv2d, ConvTranspose2d, Linear

LOG_2PI = float(np.log(2.0 * np.pi))
ACTION_DIM = 3
AUX_DIM = 6  # goal offset + body velocity


def conv_output_dims(conv, height: int, width: int):
    """Per-stage (h, w) for a conv stack, input first.

    Each stage must tile exactly ((size - kernel) divisible by stride) so
    the mirrored transposed stack reproduces the input shape bit-for-bit.
    """
    dims = [(height, width)]
    h, w = height, width
    for i, (_, k, s) in enumerate(conv):
        if h < k or w < k:
            raise ValueError(
                f"conv stage {i}: kernel {k} exceeds input {h}x{w}")
        if (h - k) % s or (w - k) % s:
            raise ValueError(
                f"conv stage {i}: kernel {k}/stride {s} does not tile {h}x{w}")
        h = (h - k) // s + 1
        w = (w - k) // s + 1
        dims.append((h, w))
    return dims


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        data = a.data if isinstance(a, T.Tensor) else np.asarray(a)
        if not np.isfinite(data).all():
            raise ValueError(f"{name}: non-finite input")


def _aux_features(goal_body, velocity, goal_scale: float, dtype) -> T.Tensor:
    goal = np.asarray(goal_body, dtype=dtype)
    vel = np.asarray(velocity, dtype=dtype)
    if goal.ndim != 2 or goal.shape[1] != 3 or goal.shape != vel.shape:
        raise ValueError(
            f"goal/velocity must be [batch, 3], got {goal.shape} and {vel.shape}")
    return T.Tensor(np.concatenate([goal * dtype(goal_scale), vel], axis=1))


class Encoder:
    def __init__(self, cfg: NetConfig, height: int, width: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.height = height
        self.width = width
        self.dtype = dtype
        dims = conv_output_dims(cfg.conv, height, width)
        self.convs = []
        in_ch = 1
        for out_ch, k, s in cfg.conv:
            self.convs.append(Conv2d(in_ch, out_ch, k, s, rng, dtype))
            in_ch = out_ch
        self.out_ch = in_ch
        self.out_hw = dims[-1]
        self.flat_dim = in_ch * dims[-1][0] * dims[-1][1]
        self.head = Linear(self.flat_dim, cfg.latent_dim, rng, dtype)

    def encode(self, depth: T.Tensor) -> T.Tensor:
        if depth.ndim != 4 or depth.shape[1:] != (1, self.height, self.width):
            raise ValueError(
                f"expected depth [batch, 1, {self.height}, {self.width}], "
                f"got {depth.shape}")
        x = depth
        for conv in self.convs:
            x = T.relu(conv(x))
        x = T.reshape(x, (depth.shape[0], self.flat_dim))
        return self.head(x)

    def params(self, prefix: str = "encoder"):
        out = []
        for i, conv in enumerate(self.convs):
            out += conv.params(f"{prefix}/conv{i}")
        return out + self.head.params(f"{prefix}/head")


class Decoder:
    def __init__(self, encoder: Encoder, rng: np.random.Generator):
        cfg = encoder.cfg
        self.dtype = encoder.dtype
        self.out_ch = encoder.out_ch
        self.out_hw = encoder.out_hw
        self.flat_dim = encoder.flat_dim
        self.height = encoder.height
        self.width = encoder.width
        self.head = Linear(cfg.latent_dim, self.flat_dim, rng, self.dtype)
        self.deconvs = []
        chans = [1] + [c for c, _, _ in cfg.conv]
        for i in range(len(cfg.conv) - 1, -1, -1):
            out_ch, k, s = cfg.conv[i]
            self.deconvs.append(
                ConvTranspose2d(out_ch, chans[i], k, s, rng, self.dtype))

    def decode(self, z: T.Tensor) -> T.Tensor:
        if z.ndim != 2 or z.shape[1] != self.head.in_dim:
            raise ValueError(f"expected latent [batch, {self.head.in_dim}], got {z.shape}")
        x = T.relu(self.head(z))
        x = T.reshape(x, (z.shape[0], self.out_ch, self.out_hw[0], self.out_hw[1]))
        for i, deconv in enumerate(self.deconvs):
            if i:
                x = T.relu(x)
            x = deconv(x)
        return x

    def params(self, prefix: str = "decoder"):
        out = self.head.params(f"{prefix}/head")
        for i, deconv in enumerate(self.deconvs):
            out += deconv.params(f"{prefix}/deconv{i}")
        return out


class Actor:
    """Gaussian policy head; one channel gate per hidden activation."""

    def __init__(self, cfg: NetConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.layers = []
        self.gates = []
        in_dim = cfg.latent_dim + AUX_DIM
        for width in cfg.hidden:
            self.layers.append(Linear(in_dim, width, rng, dtype))
            self.gates.append(cfs.CfsModule(
                width, rng, eps=cfg.cfs_eps, enabled=cfg.cfs_enabled, dtype=dtype))
            in_dim = width
        # near-zero initial actions
        self.mean_head = Linear(in_dim, ACTION_DIM, rng, dtype, scale=0.1)
        self.log_std_head = Linear(in_dim, ACTION_DIM, rng, dtype, scale=0.1)

    def forward(self, z: T.Tensor, goal_body, velocity):
        """(mean, log_std, masks); log_std is squashed into the config range."""
        _check_finite("actor_forward", z, goal_body, velocity)
        aux = _aux_features(goal_body, velocity, self.cfg.goal_scale, self.dtype)
        x = T.concat([z, aux], axis=1)
        masks = []
        for lin, gate in zip(self.layers, self.gates):
            x = T.relu(lin(x))
            m = cfs.compute_mask(gate)
            x = cfs.apply(x, m)
            masks.append(m)
        mean = self.mean_head(x)
        lo, hi = self.cfg.log_std_min, self.cfg.log_std_max
        raw = T.tanh(self.log_std_head(x))
        log_std = T.add(T.mul(raw, 0.5 * (hi - lo)), 0.5 * (hi + lo))
        return mean, log_std, masks

    def params(self, prefix: str = "actor"):
        out = []
        for i, lin in enumerate(self.layers):
            out += lin.params(f"{prefix}/fc{i}")
        out += self.mean_head.params(f"{prefix}/mean")
        out += self.log_std_head.params(f"{prefix}/log_std")
        return out

    def gate_params(self, prefix: str = "cfs"):
        out = []
        for i, gate in enumerate(self.gates):
            out += gate.params(f"{prefix}/gate{i}")
        return out


def actor_forward(actor: Actor, z: T.Tensor, goal_body, velocity):
    return actor.forward(z, goal_body, velocity)


def sample_action(mean: T.Tensor, log_std: T.Tensor, noise):
    """Reparameterized tanh-squashed sample and its log density.

    ``noise`` is the standard normal draw, supplied by the caller so the
    whole computation stays a deterministic function of its inputs.
    """
    noise = np.asarray(noise, dtype=mean.dtype)
    if noise.shape != mean.shape:
        raise ValueError(f"noise shape {noise.shape} must match mean {mean.shape}")
    std = T.exp(log_std)
    pre = T.add(mean, T.mul(std, T.Tensor(noise)))
    action = T.tanh(pre)
    zscore = T.div(T.sub(pre, mean), std)
    gauss = T.sub(T.mul(T.square(zscore), -0.5),
                  T.add(log_std, 0.5 * LOG_2PI))
    # tanh change of variables, with the usual floor for numerical safety
    correction = T.log(T.sub(1.0 + 1e-6, T.square(action)))
    log_prob = T.reduce_sum(T.sub(gauss, correction), axes=1)
    return action, log_prob


def deterministic_action(mean: T.Tensor) -> np.ndarray:
    return np.tanh(mean.data)


class Critic:
    """Two independent Q MLPs over [latent, aux, action]."""

    def __init__(self, cfg: NetConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        in_dim = cfg.latent_dim + AUX_DIM + ACTION_DIM
        self.q1 = self._mlp(in_dim, cfg.hidden, rng, dtype)
        self.q2 = self._mlp(in_dim, cfg.hidden, rng, dtype)

    @staticmethod
    def _mlp(in_dim, hidden, rng, dtype):
        layers = []
        for width in hidden:
            layers.append(Linear(in_dim, width, rng, dtype))
            in_dim = width
        layers.append(Linear(in_dim, 1, rng, dtype))
        return layers

    @staticmethod
    def _run(layers, x: T.Tensor) -> T.Tensor:
        for lin in layers[:-1]:
            x = T.relu(lin(x))
        out = layers[-1](x)
        return T.reshape(out, (x.shape[0],))

    def forward(self, z: T.Tensor, goal_body, velocity, action: T.Tensor):
        _check_finite("critic_forward", z, goal_body, velocity, action)
        aux = _aux_features(goal_body, velocity, self.cfg.goal_scale, self.dtype)
        x = T.concat([z, aux, action], axis=1)
        return self._run(self.q1, x), self._run(self.q2, x)

    def params(self, prefix: str = "critic"):
        out = []
        for name, layers in (("q1", self.q1), ("q2", self.q2)):
            for i, lin in enumerate(layers):
                out += lin.params(f"{prefix}/{name}/fc{i}")
        return out


def copy_params(src_params, dst_params) -> None:
    """Overwrite destination tensor data with the source values."""
    if len(src_params) != len(dst_params):
        raise ValueError("parameter lists differ in length")
    for (_, a), (_, b) in zip(src_params, dst_params):
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        b.data[...] = a.data


class PolicyNets:
    """Everything the trainer owns: autoencoder, actor, critics, targets."""

    def __init__(self, cfg: NetConfig, height: int, width: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.encoder = Encoder(cfg, height, width, rng, dtype)
        self.decoder = Decoder(self.encoder, rng)
        self.actor = Actor(cfg, rng, dtype)
        self.critic = Critic(cfg, rng, dtype)
        self.target_critic = Critic(cfg, rng, dtype)
        copy_params(self.critic.params(), self.target_critic.params())

    def named_params(self):
        return (self.encoder.params() + self.decoder.params()
                + self.actor.params() + self.actor.gate_params()
                + self.critic.params() + self.target_critic.params("target"))
