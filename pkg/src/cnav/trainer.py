"""Off-policy training loop: twin-critic actor updates, a reconstruction
objective on the encoder, learned temperature, and channel-gate updates."""

from __future__ import annotations

import json
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from cnav import cfs
from cnav import tensor as T
from cnav.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from cnav.config import RunConfig, run_config_from_dict, run_config_to_dict, save_run_config
from cnav.metrics import run_episode, success_rate
from cnav.networks import PolicyNets, sample_action
from cnav.optim import Adam
from cnav.policy import ActingPolicy
from cnav.replay import ReplayBuffer
from cnav.scenario import build_scenario
from cnav.world import Status

ACTION_DIM = 3


class TrainerError(RuntimeError):
    pass


@contextmanager
def frozen(named_params):
    """Exclude the given parameters from gradient accumulation.

    Must stay open across both the forward pass and the backward call;
    accumulation consults the flag when gradients are routed.
    """
    tensors = [t for _, t in named_params]
    saved = [t.requires_grad for t in tensors]
    for t in tensors:
        t.requires_grad = False
    try:
        yield
    finally:
        for t, flag in zip(tensors, saved):
            t.requires_grad = flag


def soft_update(src_params, dst_params, tau: float) -> None:
    """dst <- (1 - tau) * dst + tau * src, pairwise over named parameters."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    src = list(src_params)
    dst = list(dst_params)
    if len(src) != len(dst):
        raise ValueError(f"parameter count mismatch: {len(src)} vs {len(dst)}")
    for (_, a), (_, b) in zip(src, dst):
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        b.data[...] = (1.0 - tau) * b.data + tau * a.data


class Trainer:
    """Owns the networks, buffer, optimizers, and the environment loop.

    Gradient routing per objective:
      critic loss   -> critics + encoder
      actor loss    -> actor + channel gates (latent detached, critics frozen)
      recon loss    -> encoder + decoder
      alpha loss    -> log_alpha only
    """

    def __init__(self, cfg: RunConfig, out_dir=None, fresh_metrics: bool = True):
        self.cfg = cfg
        wc, tc = cfg.world, cfg.trainer
        ss = np.random.SeedSequence(tc.seed)
        env_s, init_s, sampler_s, noise_s, eval_s = ss.spawn(5)
        self.rng_env = np.random.default_rng(env_s)
        self.rng_noise = np.random.default_rng(noise_s)
        self.rng_eval = np.random.default_rng(eval_s)
        self.nets = PolicyNets(cfg.nets, wc.depth_height, wc.depth_width,
                               np.random.default_rng(init_s))
        self.buffer = ReplayBuffer(tc.buffer_capacity,
                                   (wc.depth_height, wc.depth_width),
                                   np.random.default_rng(sampler_s))
        self.log_alpha = T.Tensor(
            np.array(np.log(tc.alpha_init), dtype=np.float32), requires_grad=True)
        self.target_entropy = (-float(ACTION_DIM) if tc.target_entropy is None
                               else float(tc.target_entropy))
        self.opt_critic = Adam(self.nets.critic.params() + self.nets.encoder.params(),
                               lr=tc.lr)
        self.opt_actor = Adam(self.nets.actor.params(), lr=tc.lr)
        self.opt_cfs = Adam(self.nets.actor.gate_params(), lr=tc.cfs_lr)
        self.opt_rae = Adam(self.nets.encoder.params() + self.nets.decoder.params(),
                            lr=tc.lr)
        self.opt_alpha = Adam([("log_alpha", self.log_alpha)], lr=tc.lr)
        self.step = 0
        self.updates = 0
        self.episode = 0
        self.eval_history = []
        self._explore = ActingPolicy(self.nets.encoder, self.nets.actor,
                                     wc.depth_max, deterministic=False)
        self._prev_masks = [cfs.mask_values(g) for g in self.nets.actor.gates]
        self.world = None
        self._obs = {}
        self._ep_reward = 0.0
        self.history = []
        self.out_dir = None
        self._metrics_fh = None
        if out_dir is not None:
            self.out_dir = Path(out_dir)
            self.out_dir.mkdir(parents=True, exist_ok=True)
            save_run_config(cfg, self.out_dir / "config.json")
            mode = "w" if fresh_metrics else "a"
            self._metrics_fh = open(self.out_dir / "metrics.jsonl", mode)

    # -- bookkeeping -----------------------------------------------------

    def close(self) -> None:
        if self._metrics_fh is not None:
            self._metrics_fh.close()
            self._metrics_fh = None

    def _write(self, record: dict) -> None:
        if self._metrics_fh is not None:
            self._metrics_fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._metrics_fh.flush()
        else:
            self.history.append(record)

    def _opts(self):
        return [("critic", self.opt_critic), ("actor", self.opt_actor),
                ("cfs", self.opt_cfs), ("rae", self.opt_rae),
                ("alpha", self.opt_alpha)]

    def _rngs(self):
        return [("env", self.rng_env), ("noise", self.rng_noise),
                ("eval", self.rng_eval), ("sampler", self.buffer._rng)]

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))

    # -- environment loop ------------------------------------------------

    def _start_episode(self) -> None:
        seed = int(self.rng_env.integers(0, 2**31 - 1))
        sc = build_scenario(self.cfg.scenario, self.cfg.world, seed=seed)
        self.world = sc.make_world(self.cfg.world)
        self._obs = dict(enumerate(self.world.reset_observations()))
        self.episode += 1
        self._ep_reward = 0.0

    def _log_episode(self) -> None:
        agents = self.world.agents
        self._write({
            "step": self.step,
            "episode": self.episode,
            "episode_return": round(float(self._ep_reward), 6),
            "episode_steps": self.world.step_count,
            "arrivals": sum(a.status is Status.ARRIVED for a in agents),
            "collisions": sum(a.status is Status.COLLIDED for a in agents),
        })

    def rollout_step(self) -> None:
        """Advance every live agent one step and store the transitions."""
        if self.world is None or not self.world.active_ids():
            if self.world is not None:
                self._log_episode()
            self._start_episode()
        active = self.world.active_ids()
        obs_list = [self._obs[i] for i in active]
        if self.step < self.cfg.trainer.warmup_steps:
            actions = self.rng_env.uniform(
                -1.0, 1.0, (len(active), ACTION_DIM)).astype(np.float32)
        else:
            actions = self._explore.act(obs_list, self.rng_noise)
        results = self.world.step(actions)
        for k, res in enumerate(results):
            i = res.agent_id
            # Arrival and collision always cut the return; timeouts only do
            # when configured, trading a horizon bias for grounded values in
            # states that otherwise never terminate.
            done = res.status in (Status.ARRIVED, Status.COLLIDED)
            if not self.cfg.trainer.timeout_bootstrap:
                done = done or res.status is Status.TIMED_OUT
            self.buffer.add(self._obs[i], actions[k], res.reward, res.obs, done)
            self._ep_reward += res.reward
            self._obs[i] = res.obs
        self.step += 1

    # -- losses ------------------------------------------------------------

    def _depth_input(self, depth: np.ndarray) -> np.ndarray:
        return depth[:, None, :, :] / np.float32(self.cfg.world.depth_max)

    def bellman_target(self, batch: dict, noise=None) -> np.ndarray:
        """One-step targets from the target critics; no tape involved."""
        tc = self.cfg.trainer
        z = self.nets.encoder.encode(T.Tensor(self._depth_input(batch["next_depth"])))
        mean, log_std, _ = self.nets.actor.forward(
            z, batch["next_goal"], batch["next_vel"])
        if noise is None:
            noise = self.rng_noise.standard_normal(mean.shape).astype(np.float32)
        action, logp = sample_action(mean, log_std, noise)
        q1, q2 = self.nets.target_critic.forward(
            z, batch["next_goal"], batch["next_vel"], action)
        v = np.minimum(q1.data, q2.data) - np.float32(self.alpha) * logp.data
        y = batch["reward"] + np.float32(tc.gamma) * (1.0 - batch["done"]) * v
        return y.astype(np.float32)

    def critic_loss(self, batch: dict, target=None, noise=None):
        if target is None:
            target = self.bellman_target(batch, noise)
        tape = T.Tape()
        with tape:
            z = self.nets.encoder.encode(T.Tensor(self._depth_input(batch["depth"])))
            q1, q2 = self.nets.critic.forward(
                z, batch["goal"], batch["vel"], T.Tensor(batch["action"]))
            yt = T.Tensor(np.asarray(target, dtype=np.float32))
            loss = T.reduce_mean(T.add(T.square(T.sub(q1, yt)),
                                       T.square(T.sub(q2, yt))))
        info = {"q_mean": float(q1.data.mean()), "target_mean": float(target.mean())}
        return tape, loss, info

    def actor_loss(self, batch: dict, noise=None):
        """Entropy-regularized policy objective on a detached latent."""
        z_data = self.nets.encoder.encode(
            T.Tensor(self._depth_input(batch["depth"]))).data
        tape = T.Tape()
        with tape:
            mean, log_std, _ = self.nets.actor.forward(
                T.Tensor(z_data), batch["goal"], batch["vel"])
            if noise is None:
                noise = self.rng_noise.standard_normal(mean.shape).astype(np.float32)
            action, logp = sample_action(mean, log_std, noise)
            q1, q2 = self.nets.critic.forward(
                T.Tensor(z_data), batch["goal"], batch["vel"], action)
            loss = T.reduce_mean(T.sub(T.mul(logp, np.float32(self.alpha)),
                                       T.minimum(q1, q2)))
        return tape, loss, logp

    def _l2_params(self):
        target = self.cfg.trainer.rae_l2_target
        params = []
        if target in ("decoder", "both"):
            params += self.nets.decoder.params()
        if target in ("encoder", "both"):
            params += self.nets.encoder.params()
        return [(n, t) for n, t in params if n.endswith("/w")]

    def rae_loss(self, batch: dict):
        """Reconstruction + latent norm + weight decay on selected weights."""
        tc = self.cfg.trainer
        frames = self._depth_input(batch["depth"])
        tape = T.Tape()
        with tape:
            z = self.nets.encoder.encode(T.Tensor(frames))
            recon = self.nets.decoder.decode(z)
            mse = T.reduce_mean(T.square(T.sub(recon, T.Tensor(frames))))
            znorm = T.reduce_mean(T.reduce_sum(T.square(z), axes=1))
            loss = T.add(mse, T.mul(znorm, np.float32(tc.rae_latent_weight)))
            l2 = None
            for _, t in self._l2_params():
                term = T.reduce_sum(T.square(t))
                l2 = term if l2 is None else T.add(l2, term)
            if l2 is not None:
                loss = T.add(loss, T.mul(l2, np.float32(tc.rae_l2_weight)))
        return tape, loss, {"recon_mse": float(mse.data)}

    def temperature_loss(self, logp_mean: float):
        tape = T.Tape()
        with tape:
            loss = T.mul(self.log_alpha,
                         np.float32(-(logp_mean + self.target_entropy)))
        return tape, loss

    # -- updates -----------------------------------------------------------

    def _abort(self, name: str, what: str, batch: dict | None) -> None:
        detail = ""
        if batch is not None and self.out_dir is not None:
            path = self.out_dir / f"diagnostic_{name}_step{self.step}.npz"
            np.savez(path, **batch)
            detail = f"; offending batch saved to {path}"
        raise TrainerError(f"{name}: {what} at env step {self.step}{detail}")

    def _guard(self, name: str, loss: T.Tensor, batch: dict | None) -> None:
        if not np.isfinite(loss.data).all():
            self._abort(name, "loss is non-finite", batch)

    def _guard_grads(self, name: str, params, batch: dict | None) -> None:
        # A finite loss does not imply finite gradients: comparisons inside
        # the forward can flush a poisoned activation to a finite value while
        # the backward pass still multiplies by it.
        for pname, t in params:
            if t.grad is not None and not np.isfinite(t.grad).all():
                self._abort(name, f"non-finite gradient for {pname}", batch)

    def update_critic(self, batch: dict) -> dict:
        tape, loss, info = self.critic_loss(batch)
        self._guard("critic_loss", loss, batch)
        self.opt_critic.zero_grad()
        T.backward(loss, tape)
        self._guard_grads("critic_loss", self.opt_critic.named_params, batch)
        self.opt_critic.step()
        info["critic_loss"] = float(loss.data)
        return info

    def update_actor(self, batch: dict):
        with frozen(self.nets.critic.params()):
            tape, loss, logp = self.actor_loss(batch)
            self._guard("actor_loss", loss, batch)
            self.opt_actor.zero_grad()
            self.opt_cfs.zero_grad()
            T.backward(loss, tape)
            self._guard_grads("actor_loss",
                              self.opt_actor.named_params + self.opt_cfs.named_params,
                              batch)
            self.opt_actor.step()
            self.opt_cfs.step()
        logp_mean = float(logp.data.mean())
        return {"actor_loss": float(loss.data), "entropy": -logp_mean}, logp_mean

    def update_rae(self, batch: dict) -> dict:
        tape, loss, info = self.rae_loss(batch)
        self._guard("recon_loss", loss, batch)
        self.opt_rae.zero_grad()
        T.backward(loss, tape)
        self._guard_grads("recon_loss", self.opt_rae.named_params, batch)
        self.opt_rae.step()
        info["recon_loss"] = float(loss.data)
        return info

    def update_alpha(self, logp_mean: float) -> dict:
        tape, loss = self.temperature_loss(logp_mean)
        self.opt_alpha.zero_grad()
        T.backward(loss, tape)
        self.opt_alpha.step()
        return {"alpha": self.alpha}

    def update(self, batch: dict | None = None) -> dict:
        if batch is None:
            batch = self.buffer.sample(self.cfg.trainer.batch_size)
        info = {}
        info.update(self.update_critic(batch))
        actor_info, logp_mean = self.update_actor(batch)
        info.update(actor_info)
        info.update(self.update_rae(batch))
        info.update(self.update_alpha(logp_mean))
        soft_update(self.nets.critic.params(), self.nets.target_critic.params(),
                    self.cfg.trainer.tau)
        self.updates += 1
        return info

    def mask_diagnostics(self):
        """Per-gate zero fractions plus the count of channels that came back."""
        lines = []
        revivals = 0
        current = []
        for idx, gate in enumerate(self.nets.actor.gates):
            m = cfs.mask_values(gate)
            current.append(m)
            lines.append({"step": self.step, "module_index": idx,
                          "zero_fraction": cfs.sparsity(m)})
            revivals += int(np.count_nonzero(
                (self._prev_masks[idx] == 0.0) & (m > 0.0)))
        self._prev_masks = current
        return lines, revivals

    # -- evaluation / persistence -------------------------------------------

    def evaluate(self, episodes: int | None = None) -> float:
        if episodes is None:
            episodes = self.cfg.trainer.eval_episodes
        policy = ActingPolicy(self.nets.encoder, self.nets.actor,
                              self.cfg.world.depth_max, deterministic=True)
        records = []
        for e in range(episodes):
            seed = int(self.rng_eval.integers(0, 2**31 - 1))
            sc = build_scenario(self.cfg.scenario, self.cfg.world, seed=seed)
            ep_records, _ = run_episode(sc, self.cfg.world, policy, episode_index=e)
            records += ep_records
        return success_rate(records)

    def save(self, path) -> None:
        tensors = [(n, t.data) for n, t in self.nets.named_params()]
        tensors.append(("log_alpha", self.log_alpha.data))
        for prefix, opt in self._opts():
            tensors += opt.state_tensors(f"opt/{prefix}")
        meta = {
            "kind": "cnav-train",
            "step": self.step,
            "updates": self.updates,
            "episode": self.episode,
            "config": run_config_to_dict(self.cfg),
            "opt_t": {prefix: opt.t for prefix, opt in self._opts()},
            "rng": {name: gen.bit_generator.state for name, gen in self._rngs()},
            "eval_history": self.eval_history,
        }
        save_checkpoint(path, tensors, meta)

    @classmethod
    def restore(cls, path, out_dir=None) -> "Trainer":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "cnav-train":
            raise CheckpointError(f"{path}: not a training checkpoint")
        cfg = run_config_from_dict(meta["config"])
        tr = cls(cfg, out_dir=out_dir, fresh_metrics=False)
        for name, t in tr.nets.named_params():
            if name not in tensors:
                raise CheckpointError(f"{path}: missing tensor {name}")
            t.data[...] = tensors[name]
        tr.log_alpha.data[...] = tensors["log_alpha"]
        for prefix, opt in tr._opts():
            opt.load_state(f"opt/{prefix}", tensors)
            opt.t = int(meta["opt_t"][prefix])
        for name, gen in tr._rngs():
            gen.bit_generator.state = meta["rng"][name]
        tr.step = int(meta["step"])
        tr.updates = int(meta["updates"])
        tr.episode = int(meta["episode"])
        tr.eval_history = list(meta["eval_history"])
        tr._prev_masks = [cfs.mask_values(g) for g in tr.nets.actor.gates]
        return tr

    # -- main loop -----------------------------------------------------------

    def _should_stop(self) -> bool:
        goal = self.cfg.trainer.stop_at_success
        if goal is None or len(self.eval_history) < 2:
            return False
        return all(sr >= goal for sr in self.eval_history[-2:])

    def train(self) -> dict:
        tc = self.cfg.trainer
        while self.step < tc.total_steps:
            self.rollout_step()
            can_update = (self.step >= tc.warmup_steps
                          and len(self.buffer) >= tc.batch_size)
            if can_update and self.step % tc.update_every == 0:
                info = self.update()
                if self.updates % tc.metrics_every == 0:
                    mask_lines, revivals = self.mask_diagnostics()
                    line = {"step": self.step, "buffer": len(self.buffer),
                            "mask_revivals": revivals}
                    line.update(info)
                    self._write(line)
                    for ml in mask_lines:
                        self._write(ml)
            if can_update and self.step % tc.eval_every == 0:
                sr = self.evaluate()
                self.eval_history.append(sr)
                self._write({"step": self.step, "eval_success_rate": sr,
                             "eval_episodes": tc.eval_episodes})
                if self.out_dir is not None:
                    self.save(self.out_dir / f"step_{self.step}.cnav")
                if self._should_stop():
                    break
        if self.out_dir is not None:
            self.save(self.out_dir / f"step_{self.step}.cnav")
        return {"steps": self.step, "updates": self.updates,
                "episodes": self.episode, "eval_history": list(self.eval_history)}
