"""Navigation performance indicators and evaluation-suite orchestration.

Four aggregate metrics over per-(agent, episode) records: success rate,
success weighted by normalized path length, extra distance over the
straight line (successes only; undefined when there are none), and average
speed (per-episode mean of per-agent means).  ``run_suite`` evaluates a
checkpoint deterministically over a list of scenarios and emits the table
plus trajectory CSVs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cnav.config import ScenarioSpec, WorldConfig
from cnav.policy import load_policy
from cnav.scenario import Scenario, build_scenario
from cnav.world import Status, trajectory_row, write_trajectory_csv

TABLE_COLUMNS = ("scene", "success_rate", "spl", "extra_mean", "extra_std",
                 "speed_mean", "speed_std")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeRecord:
    """One agent's outcome in one evaluated episode."""

    success: bool
    straight_line: float  # start->goal distance, meters
    path_length: float  # traveled, closed out to the goal on success
    mean_speed: float  # m/s while active
    status: str
    episode: int
    agent_id: int

    def __post_init__(self):
        if self.straight_line < 0 or self.path_length < 0:
            raise MetricsError("negative distance in episode record")
        if self.success and self.path_length < self.straight_line - 1e-9:
            raise MetricsError(
                f"successful path {self.path_length} beats the straight line "
                f"{self.straight_line}")


def _require(records, what: str):
    records = list(records)
    if not records:
        raise MetricsError(f"{what} of zero records")
    return records


def success_rate(records) -> float:
    records = _require(records, "success_rate")
    return 100.0 * sum(r.success for r in records) / len(records)


def spl(records, n_agents: int, n_episodes: int) -> float:
    """Success weighted by straight-line/path ratio, in percent."""
    records = _require(records, "spl")
    if len(records) != n_agents * n_episodes:
        raise MetricsError(
            f"expected {n_agents}x{n_episodes} records, got {len(records)}")
    total = sum(
        r.straight_line / max(r.path_length, r.straight_line)
        for r in records if r.success)
    return 100.0 * total / (n_agents * n_episodes)


def extra_distance(records):
    """(mean, std) of path minus straight line over successes only."""
    extras = [r.path_length - r.straight_line
              for r in _require(records, "extra_distance") if r.success]
    if not extras:
        raise MetricsError("no successful episodes; extra distance undefined")
    return float(np.mean(extras)), float(np.std(extras))


def average_speed(records):
    """(mean, std) across episodes of the per-episode mean agent speed."""
    records = _require(records, "average_speed")
    by_episode = {}
    for r in records:
        by_episode.setdefault(r.episode, []).append(r.mean_speed)
    per_ep = [float(np.mean(v)) for _, v in sorted(by_episode.items())]
    return float(np.mean(per_ep)), float(np.std(per_ep))


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

def run_episode(scenario: Scenario, cfg: WorldConfig, policy,
                episode_index: int = 0, rng: np.random.Generator | None = None,
                collect_rows: bool = False):
    """Roll one episode to termination; (records, trajectory rows)."""
    world = scenario.make_world(cfg)
    obs = dict(enumerate(world.reset_observations()))
    rows = []
    while True:
        active = world.active_ids()
        if not active:
            break
        actions = policy.act([obs[i] for i in active], rng)
        for res in world.step(actions):
            obs[res.agent_id] = res.obs
            if collect_rows:
                rows.append(trajectory_row(
                    episode_index, res.agent_id, world.step_count,
                    world.agents[res.agent_id], res.reward))
    records = []
    for i, agent in enumerate(world.agents):
        active_time = agent.steps_active * cfg.dt
        records.append(EpisodeRecord(
            success=agent.status is Status.ARRIVED,
            straight_line=float(np.linalg.norm(agent.goal - agent.start)),
            path_length=agent.path_length,
            mean_speed=agent.moved_length / active_time if active_time else 0.0,
            status=agent.status.value,
            episode=episode_index,
            agent_id=i,
        ))
    return records, rows


def episode_seeds(seed: int, episodes: int):
    """The shared per-episode scenario seeds for a suite evaluation."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(episodes)]


def evaluate_scenario(spec: ScenarioSpec, cfg: WorldConfig, policy,
                      episodes: int, seed: int, collect_rows: bool = False):
    """(records, rows) for one scenario over seeded episode layouts."""
    records, rows = [], []
    for e, ep_seed in enumerate(episode_seeds(seed, episodes)):
        sc = build_scenario(spec, cfg, seed=ep_seed)
        ep_records, ep_rows = run_episode(sc, cfg, policy, episode_index=e,
                                          collect_rows=collect_rows)
        records += ep_records
        rows += ep_rows
    return records, rows


def table_row(scene: str, records, n_agents: int, episodes: int) -> dict:
    try:
        extra_mean, extra_std = extra_distance(records)
    except MetricsError:
        extra_mean = extra_std = None  # undefined without successes
    speed_mean, speed_std = average_speed(records)
    return {
        "scene": scene,
        "success_rate": success_rate(records),
        "spl": spl(records, n_agents, episodes),
        "extra_mean": extra_mean,
        "extra_std": extra_std,
        "speed_mean": speed_mean,
        "speed_std": speed_std,
    }


def run_suite(checkpoint_path, suite, episodes: int, seed: int,
              out_dir=None, world_cfg: WorldConfig | None = None):
    """Evaluate a checkpoint on every scenario; returns the table rows.

    The checkpoint's own world settings apply unless ``world_cfg``
    overrides them.  With ``out_dir`` set, writes ``table.csv``,
    ``table.json`` and one trajectory CSV per scenario.
    """
    policy, run_cfg = load_policy(checkpoint_path, deterministic=True)
    cfg = world_cfg if world_cfg is not None else run_cfg.world
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    table = []
    for spec in suite:
        records, rows = evaluate_scenario(
            spec, cfg, policy, episodes, seed, collect_rows=out is not None)
        table.append(table_row(spec.label, records, spec.n_agents, episodes))
        if out is not None:
            write_trajectory_csv(out / f"trajectories_{spec.label}.csv", rows)
    if out is not None:
        write_table(out / "table.csv", table)
        (out / "table.json").write_text(
            json.dumps(table, indent=2, sort_keys=True) + "\n")
    return table


def write_table(path, table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TABLE_COLUMNS)
        writer.writeheader()
        for row in table:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def paired_delta(table_a, table_b):
    """Per-scene numeric differences (a minus b) for paired evaluations."""
    rows_b = {row["scene"]: row for row in table_b}
    delta = []
    for row in table_a:
        other = rows_b.get(row["scene"])
        if other is None:
            raise MetricsError(f"scene {row['scene']} missing from the second table")
        out = {"scene": row["scene"]}
        for key in TABLE_COLUMNS[1:]:
            a, b = row[key], other[key]
            out[key] = None if a is None or b is None else a - b
        delta.append(out)
    return delta
