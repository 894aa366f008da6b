"""Composite finite-difference targets: each training objective rebuilt in
float64 on tiny networks so central differences resolve the adjoints.

The builders restate the trainer's loss formulas with frozen inputs, noise,
and targets; parameters listed per component are the ones the corresponding
optimizer group owns.
"""

from __future__ import annotations

import numpy as np

from cnav import cfs
from cnav import tensor as T
from cnav.config import NetConfig
from cnav.networks import Actor, Critic, Decoder, Encoder, sample_action

HEIGHT, WIDTH = 3, 5
BATCH = 2


def _tiny_cfg() -> NetConfig:
    # With the production gate eps an open mask's weight gradient is O(eps),
    # below central-difference resolution; the op chain is eps-independent,
    # so the check runs where the gradient is O(1).
    return NetConfig(latent_dim=4, conv=((4, 3, 1),), hidden=(8,), cfs_eps=0.5)


def _batch(rng: np.random.Generator) -> dict:
    return {
        "depth": rng.uniform(0.05, 1.0, (BATCH, 1, HEIGHT, WIDTH)),
        "goal": rng.uniform(-2.0, 2.0, (BATCH, 3)),
        "vel": rng.uniform(-1.0, 1.0, (BATCH, 3)),
        "action": rng.uniform(-0.9, 0.9, (BATCH, 3)),
        "noise": rng.standard_normal((BATCH, 3)),
    }


def _tensors(params):
    return [t for _, t in params]


def _critic_component(rng: np.random.Generator):
    cfg = _tiny_cfg()
    enc = Encoder(cfg, HEIGHT, WIDTH, rng, np.float64)
    critic = Critic(cfg, rng, np.float64)
    b = _batch(rng)
    y = rng.standard_normal(BATCH)

    def build():
        z = enc.encode(T.Tensor(b["depth"]))
        q1, q2 = critic.forward(z, b["goal"], b["vel"], T.Tensor(b["action"]))
        yt = T.Tensor(y)
        return T.reduce_mean(T.add(T.square(T.sub(q1, yt)),
                                   T.square(T.sub(q2, yt))))

    return ("critic_residual_composite", build,
            _tensors(critic.params() + enc.params()))


def _actor_component(rng: np.random.Generator):
    cfg = _tiny_cfg()
    actor = Actor(cfg, rng, np.float64)
    critic = Critic(cfg, rng, np.float64)
    for _, t in critic.params():
        t.requires_grad = False
    b = _batch(rng)
    z = rng.standard_normal((BATCH, cfg.latent_dim))
    alpha = 0.2

    def build():
        mean, log_std, _ = actor.forward(T.Tensor(z), b["goal"], b["vel"])
        a, logp = sample_action(mean, log_std, b["noise"])
        q1, q2 = critic.forward(T.Tensor(z), b["goal"], b["vel"], a)
        return T.reduce_mean(T.sub(T.mul(logp, alpha), T.minimum(q1, q2)))

    # a twin-head tie would put the minimum on its kink under bumping
    mean, log_std, _ = actor.forward(T.Tensor(z), b["goal"], b["vel"])
    a, _ = sample_action(mean, log_std, b["noise"])
    q1, q2 = critic.forward(T.Tensor(z), b["goal"], b["vel"], a)
    assert np.abs(q1.data - q2.data).min() > 1e-3

    return ("policy_objective_composite", build,
            _tensors(actor.params() + actor.gate_params()))


def _recon_component(rng: np.random.Generator):
    cfg = _tiny_cfg()
    enc = Encoder(cfg, HEIGHT, WIDTH, rng, np.float64)
    dec = Decoder(enc, rng)
    frames = rng.uniform(0.05, 1.0, (BATCH, 1, HEIGHT, WIDTH))
    weight_names = [n for n, _ in dec.params() if n.endswith("/w")]
    weight_set = set(weight_names)

    def build():
        z = enc.encode(T.Tensor(frames))
        recon = dec.decode(z)
        loss = T.reduce_mean(T.square(T.sub(recon, T.Tensor(frames))))
        znorm = T.reduce_mean(T.reduce_sum(T.square(z), axes=1))
        loss = T.add(loss, T.mul(znorm, 1e-2))
        for name, t in dec.params():
            if name in weight_set:
                loss = T.add(loss, T.mul(T.reduce_sum(T.square(t)), 1e-2))
        return loss

    return ("reconstruction_objective_composite", build,
            _tensors(enc.params() + dec.params()))


def _gate_component(rng: np.random.Generator):
    gate = cfs.CfsModule(6, rng, eps=0.5, dtype=np.float64)
    x = rng.uniform(0.1, 1.0, (BATCH, 6))

    def build():
        m = cfs.compute_mask(gate)
        gated = cfs.apply(T.Tensor(x), m)
        return T.reduce_sum(T.square(gated))

    return ("channel_gate_composite", build, _tensors(gate.params("gate")))


def _sample_component(rng: np.random.Generator):
    mean = T.Tensor(rng.standard_normal((BATCH, 3)), requires_grad=True)
    log_std = T.Tensor(rng.uniform(-1.5, -0.5, (BATCH, 3)), requires_grad=True)
    noise = rng.standard_normal((BATCH, 3))

    def build():
        a, logp = sample_action(mean, log_std, noise)
        return T.add(T.reduce_sum(logp), T.reduce_sum(T.square(a)))

    return ("squashed_sample_logprob", build, [mean, log_std])


def _temperature_component(rng: np.random.Generator):
    log_alpha = T.Tensor(np.array(rng.uniform(-2.0, 0.0)), requires_grad=True)
    logp_mean = float(rng.uniform(-5.0, 5.0))

    def build():
        return T.mul(log_alpha, -(logp_mean + (-3.0)))

    return ("temperature_objective", build, [log_alpha])


def components(rng: np.random.Generator):
    """(name, build, params) triples for gradcheck's battery."""
    return [
        _critic_component(rng),
        _actor_component(rng),
        _recon_component(rng),
        _gate_component(rng),
        _sample_component(rng),
        _temperature_component(rng),
    ]
