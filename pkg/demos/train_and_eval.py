# End-to-end smoke run: train a tiny policy on a small world for a few
# thousand steps, checkpoint it, then score it with the evaluation suite.
# Heavier configs only change the numbers, not the moving parts.
#
# Run: python3 demos/train_and_eval.py

import tempfile
from pathlib import Path

from cnav.config import NetConfig, RunConfig, ScenarioSpec, TrainerConfig, WorldConfig
from cnav.metrics import run_suite
from cnav.trainer import Trainer

out = Path(tempfile.mkdtemp(prefix="cnav_demo_"))

# A deliberately small setup so this demo finishes in about a minute:
# coarse depth, short episodes, narrow nets.

cfg = RunConfig(
    world=WorldConfig(depth_width=8, depth_height=6, max_steps=80),
    scenario=ScenarioSpec(background="playground", n_agents=2),
    nets=NetConfig(latent_dim=8, conv=((4, 2, 2),), hidden=(16, 16), cfs_eps=1e-2),
    trainer=TrainerConfig(batch_size=32, warmup_steps=200, buffer_capacity=5000,
                          total_steps=4000, update_every=2, metrics_every=100,
                          eval_every=2000, eval_episodes=5, seed=0),
)

trainer = Trainer(cfg, out_dir=out)
summary = trainer.train()
trainer.close()

print(f"trained {summary['steps']} steps, {summary['updates']} updates, "
      f"{summary['episodes']} episodes")
print(f"eval success history: {summary['eval_history']}")
print(f"artifacts in {out}: config.json, metrics.jsonl, checkpoints")

# The suite evaluator reloads the checkpoint fresh and scores scenario
# families with a shared set of episode layouts.

suite = [
    ScenarioSpec(name="playground", background="playground", n_agents=2),
    ScenarioSpec(name="cubes", background="playground",
                 obstacles=(("cube", 2),), n_agents=2),
]
table = run_suite(out / f"step_{summary['steps']}.cnav", suite,
                  episodes=10, seed=7, out_dir=out / "eval")

print("\nsuite results (10 episodes each; a fresh policy will be weak):")
for row in table:
    print(f"  {row['scene']:12s} success {row['success_rate']:5.1f}%  "
          f"spl {row['spl']:5.1f}%  mean speed {row['speed_mean']:.2f} m/s")
print(f"tables and trajectories written under {out / 'eval'}")
