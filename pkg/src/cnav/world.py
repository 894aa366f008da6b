"""Multi-agent kinematic flight world with an analytic depth camera.

Each agent is a sphere flying among static shapes inside (optionally) a
walled box.  Commands are normalized [-1, 1] triples (forward, climb,
steer) smoothed by a first-order lag; yaw integrates the steer rate in the
default mode.  Observations are egocentric: a depth frame over a fixed
angular grid, the goal offset rotated into the body frame, and the current
body velocities.

Agents terminate independently (arrival, collision, or the shared step
limit).  A terminated agent keeps its final state but is removed from
rendering and collision checks on subsequent steps.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from cnav.config import WorldConfig
from cnav.geometry import Shape, Sphere, ray_box_exit, ray_hits, surface_distance


class Status(str, enum.Enum):
    ACTIVE = "active"
    ARRIVED = "arrived"
    COLLIDED = "collided"
    TIMED_OUT = "timed_out"


@dataclass
class AgentState:
    position: np.ndarray
    yaw: float
    goal: np.ndarray
    start: np.ndarray
    v_forward: float = 0.0
    v_climb: float = 0.0
    v_steer: float = 0.0
    status: Status = Status.ACTIVE
    path_length: float = 0.0  # on arrival, closed out to the goal point
    moved_length: float = 0.0  # raw traveled distance, for speed accounting
    steps_active: int = 0
    world_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def velocity(self) -> np.ndarray:
        """Body-frame rates (forward, climb, steer)."""
        return np.array([self.v_forward, self.v_climb, self.v_steer])

    def goal_distance(self) -> float:
        return float(np.linalg.norm(self.goal - self.position))


@dataclass
class Observation:
    depth: np.ndarray  # [H, W] float32, meters in [0, depth_max]
    goal_body: np.ndarray  # [3] float32, goal offset in the body frame
    velocity: np.ndarray  # [3] float32 (forward, climb, steer)


@dataclass
class StepResult:
    agent_id: int
    obs: Observation
    reward: float
    r_goal: float
    r_avoid: float
    done: bool
    status: Status
    depth_min: float
    goal_distance: float


def to_body_frame(position: np.ndarray, yaw: float, point: np.ndarray) -> np.ndarray:
    """World point -> body frame (x forward, y left, z up). Norm-preserving."""
    rel = np.asarray(point, dtype=float) - np.asarray(position, dtype=float)
    c = np.cos(yaw)
    s = np.sin(yaw)
    return np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1], rel[2]])


def min_depth(depth: np.ndarray) -> float:
    """Smallest rendered distance in a depth frame."""
    d = np.asarray(depth)
    if d.size == 0:
        raise ValueError("min_depth of an empty frame")
    return float(d.min())


def compute_reward(prev_dist: float, cur_dist: float, depth_min: float,
                   collided: bool, cfg: WorldConfig):
    """(goal term, avoidance term) for one transition.

    The goal term is the arrival bonus inside the arrival radius, otherwise
    progress toward the goal scaled by ``w_goal``.  The avoidance term is
    the collision penalty on contact, otherwise ``w_avoid`` times the
    intrusion into the safety margin.  The two are independent and additive.
    """
    if cur_dist < cfg.arrive_radius:
        r_goal = cfg.r_arrival
    else:
        r_goal = cfg.w_goal * (prev_dist - cur_dist)
    if collided:
        r_avoid = cfg.r_collision
    else:
        r_avoid = cfg.w_avoid * max(cfg.d_safe - depth_min, 0.0)
    return float(r_goal), float(r_avoid)


class DepthCamera:
    """Pinhole-free depth sensor: one ray per pixel on an even angular grid.

    Azimuth spans [-fov_h/2, +fov_h/2] across columns (leftmost column is
    the most positive azimuth), elevation spans [-fov_v/2, +fov_v/2] down
    the rows (top row looks up).  With odd resolutions the central pixel
    looks exactly along the camera axis.
    """

    def __init__(self, cfg: WorldConfig):
        self.cfg = cfg
        h, w = cfg.depth_height, cfg.depth_width
        az = np.linspace(np.deg2rad(cfg.fov_h_deg) / 2.0,
                         -np.deg2rad(cfg.fov_h_deg) / 2.0, w)
        el = np.linspace(np.deg2rad(cfg.fov_v_deg) / 2.0,
                         -np.deg2rad(cfg.fov_v_deg) / 2.0, h)
        if w == 1:
            az = np.zeros(1)
        if h == 1:
            el = np.zeros(1)
        elg, azg = np.meshgrid(el, az, indexing="ij")
        ce = np.cos(elg)
        self._local = np.stack(
            [ce * np.cos(azg), ce * np.sin(azg), np.sin(elg)], axis=-1
        ).reshape(-1, 3)

    def ray_directions(self, yaw: float) -> np.ndarray:
        c = np.cos(yaw)
        s = np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return self._local @ rot.T

    def render(self, position: np.ndarray, yaw: float, shapes, bounds=None) -> np.ndarray:
        """Depth frame [H, W] float32; misses clamp to depth_max."""
        cfg = self.cfg
        dirs = self.ray_directions(yaw)
        origin = np.asarray(position, dtype=float)[None]
        best = np.full(dirs.shape[0], np.inf)
        for sh in shapes:
            best = np.minimum(best, ray_hits(sh, origin, dirs))
        if bounds is not None:
            best = np.minimum(best, ray_box_exit(origin, dirs, bounds[0], bounds[1]))
        np.clip(best, 0.0, cfg.depth_max, out=best)
        return best.reshape(cfg.depth_height, cfg.depth_width).astype(np.float32)


class World:
    """Stateful episode container over a fixed set of shapes and goals."""

    def __init__(self, cfg: WorldConfig, shapes, starts, goals, yaws=None):
        starts = np.asarray(starts, dtype=float)
        goals = np.asarray(goals, dtype=float)
        if starts.ndim != 2 or starts.shape[1] != 3 or starts.shape != goals.shape:
            raise ValueError(
                f"starts/goals must both be [n, 3], got {starts.shape} and {goals.shape}"
            )
        self.cfg = cfg
        self.shapes = list(shapes)
        self.camera = DepthCamera(cfg)
        self.bounds = (np.array(cfg.bounds_lo), np.array(cfg.bounds_hi)) if cfg.bounded else None
        if yaws is None:
            # face the goal at spawn
            yaws = np.arctan2(goals[:, 1] - starts[:, 1], goals[:, 0] - starts[:, 0])
        self.agents = [
            AgentState(position=starts[i].copy(), yaw=float(yaws[i]),
                       goal=goals[i].copy(), start=starts[i].copy())
            for i in range(starts.shape[0])
        ]
        self.step_count = 0

    # -- queries ---------------------------------------------------------
    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def active_ids(self):
        return [i for i, a in enumerate(self.agents) if a.status is Status.ACTIVE]

    def _visible_shapes(self, viewer: int, present):
        shapes = list(self.shapes)
        for j in present:
            if j != viewer:
                shapes.append(Sphere(tuple(self.agents[j].position), self.cfg.agent_radius))
        return shapes

    def render_depth(self, agent_id: int, present=None) -> np.ndarray:
        if present is None:
            present = self.active_ids()
        a = self.agents[agent_id]
        return self.camera.render(a.position, a.yaw,
                                  self._visible_shapes(agent_id, present), self.bounds)

    def observe(self, agent_id: int, depth: np.ndarray | None = None,
                present=None) -> Observation:
        a = self.agents[agent_id]
        if depth is None:
            depth = self.render_depth(agent_id, present)
        goal_body = to_body_frame(a.position, a.yaw, a.goal)
        return Observation(depth=depth,
                           goal_body=goal_body.astype(np.float32),
                           velocity=a.velocity.astype(np.float32))

    def reset_observations(self):
        """Initial observation per agent (all agents start active)."""
        return [self.observe(i) for i in range(self.n_agents)]

    def _collides_static(self, pos: np.ndarray) -> bool:
        r = self.cfg.agent_radius
        if self.bounds is not None:
            lo, hi = self.bounds
            if (pos - r < lo).any() or (pos + r > hi).any():
                return True
        for sh in self.shapes:
            if surface_distance(sh, pos) < r:
                return True
        return False

    # -- dynamics --------------------------------------------------------
    def step(self, actions):
        """Advance every active agent one tick; returns their StepResults.

        ``actions`` must hold one [forward, climb, steer] command in
        [-1, 1] per active agent, ordered by agent id.
        """
        cfg = self.cfg
        active = self.active_ids()
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (len(active), 3):
            raise ValueError(
                f"expected actions of shape {(len(active), 3)} for the active agents, "
                f"got {actions.shape}"
            )
        if not np.isfinite(actions).all():
            raise ValueError("non-finite action command")
        actions = np.clip(actions, -1.0, 1.0)

        self.step_count += 1
        prev_dist = {i: self.agents[i].goal_distance() for i in active}

        # simultaneous move
        for row, i in enumerate(active):
            a = self.agents[i]
            cmd_f = actions[row, 0] * cfg.max_forward_speed
            cmd_c = actions[row, 1] * cfg.max_climb_speed
            cmd_s = actions[row, 2] * cfg.max_steer_rate
            k = cfg.velocity_lag
            a.v_forward += k * (cmd_f - a.v_forward)
            a.v_climb += k * (cmd_c - a.v_climb)
            a.v_steer += k * (cmd_s - a.v_steer)
            lateral = 0.0
            if cfg.steer_mode == "yaw_rate":
                a.yaw = float((a.yaw + a.v_steer * cfg.dt + np.pi) % (2 * np.pi) - np.pi)
            else:
                lateral = a.v_steer
            c = np.cos(a.yaw)
            s = np.sin(a.yaw)
            wv = np.array([
                c * a.v_forward - s * lateral,
                s * a.v_forward + c * lateral,
                a.v_climb,
            ])
            a.world_velocity = wv
            delta = wv * cfg.dt
            a.position = a.position + delta
            moved = float(np.linalg.norm(delta))
            a.path_length += moved
            a.moved_length += moved
            a.steps_active += 1

        # collisions at the new positions
        collided = {i: False for i in active}
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                gap = np.linalg.norm(self.agents[i].position - self.agents[j].position)
                if gap < 2.0 * cfg.agent_radius:
                    collided[i] = True
                    collided[j] = True
        for i in active:
            if not collided[i] and self._collides_static(self.agents[i].position):
                collided[i] = True

        timeout = self.step_count >= cfg.max_steps
        results = []
        for i in active:
            a = self.agents[i]
            cur_dist = a.goal_distance()
            arrived = cur_dist < cfg.arrive_radius
            if collided[i]:
                a.status = Status.COLLIDED
            elif arrived:
                a.status = Status.ARRIVED
                # close the path out to the goal point so recorded length
                # can never beat the straight line
                a.path_length += cur_dist
            elif timeout:
                a.status = Status.TIMED_OUT
            depth = self.render_depth(i, present=active)
            d_min = min_depth(depth)
            r_goal, r_avoid = compute_reward(prev_dist[i], cur_dist, d_min,
                                             collided[i], cfg)
            results.append(StepResult(
                agent_id=i,
                obs=self.observe(i, depth=depth, present=active),
                reward=r_goal + r_avoid,
                r_goal=r_goal,
                r_avoid=r_avoid,
                done=a.status is not Status.ACTIVE,
                status=a.status,
                depth_min=d_min,
                goal_distance=cur_dist,
            ))
        return results


# ---------------------------------------------------------------------------
# trajectory export
# ---------------------------------------------------------------------------

TRAJECTORY_COLUMNS = (
    "episode", "agent_id", "step", "x", "y", "z", "yaw",
    "vx", "vy", "vz", "reward", "status",
)


def trajectory_row(episode: int, agent_id: int, step: int,
                   state: AgentState, reward: float):
    p = state.position
    v = state.world_velocity
    return (episode, agent_id, step,
            float(p[0]), float(p[1]), float(p[2]), float(state.yaw),
            float(v[0]), float(v[1]), float(v[2]),
            float(reward), state.status.value)


def write_trajectory_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_COLUMNS)
        writer.writerows(rows)
