"""Procedural scene construction: backgrounds, obstacles, starts and goals.

A scenario is built in three passes from one seeded generator: background
furniture first, then agent starts/goals validated against it, then the
requested obstacle mix placed clear of everything already in the scene.
Placement is rejection sampling with conservative bounding-sphere keepouts,
so a freshly built scene never starts in contact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cnav.config import ScenarioSpec, WorldConfig
from cnav.geometry import Box, Cylinder, Prism, Sphere, bounding_sphere, surface_distance

# canonical obstacle footprints (meters)
CUBE_HALF = 0.5
SPHERE_RADIUS = 0.5
CYLINDER_RADIUS = 0.4
CYLINDER_HEIGHT = 3.0
PRISM_EDGE = 1.0
PRISM_HEIGHT = 3.0

OBSTACLE_KEEPOUT = 1.5  # min gap between an obstacle shell and starts/goals
START_SEPARATION_FACTOR = 4.0  # pairwise spawn gap, in agent radii
MIN_GOAL_DISTANCE = 4.0
PLACE_ATTEMPTS = 4000


class ScenarioError(RuntimeError):
    """Raised when rejection sampling cannot satisfy the constraints."""


@dataclass
class Scenario:
    spec: ScenarioSpec
    shapes: list
    starts: np.ndarray  # [n_agents, 3]
    goals: np.ndarray  # [n_agents, 3]

    def make_world(self, cfg: WorldConfig):
        from cnav.world import World

        return World(cfg, self.shapes, self.starts, self.goals)


def _margin_bounds(cfg: WorldConfig, margin: float):
    lo = np.array(cfg.bounds_lo) + margin
    hi = np.array(cfg.bounds_hi) - margin
    if (hi <= lo).any():
        raise ScenarioError(f"world extent {cfg.extent} too small for margin {margin}")
    return lo, hi


def _clear_of_shapes(point: np.ndarray, shapes, clearance: float) -> bool:
    for sh in shapes:
        c, r = bounding_sphere(sh)
        # cheap reject on the bounding sphere before the exact test
        if np.linalg.norm(point - c) > r + clearance:
            continue
        if surface_distance(sh, point) < clearance:
            return False
    return True


# ---------------------------------------------------------------------------
# backgrounds
# ---------------------------------------------------------------------------

def build_background(name: str, cfg: WorldConfig, rng: np.random.Generator):
    """Static furniture for a named background style."""
    lo, hi = np.array(cfg.bounds_lo), np.array(cfg.bounds_hi)
    span_x = hi[0] - lo[0]
    span_y = hi[1] - lo[1]
    shapes = []
    if name == "playground":
        pass  # open floor
    elif name == "grassland":
        # scattered knee-high tufts; low enough to overfly
        n = max(4, int(span_x * span_y / 32))
        for _ in range(n):
            cx = rng.uniform(lo[0] + 1.0, hi[0] - 1.0)
            cy = rng.uniform(lo[1] + 1.0, hi[1] - 1.0)
            half = rng.uniform(0.2, 0.5)
            h = rng.uniform(0.2, 0.5)
            shapes.append(Box((cx, cy, h / 2), (half, half, h / 2)))
    elif name == "forest":
        # thin full-height trunks
        for _ in range(20):
            cx = rng.uniform(lo[0] + 1.0, hi[0] - 1.0)
            cy = rng.uniform(lo[1] + 1.0, hi[1] - 1.0)
            r = rng.uniform(0.15, 0.3)
            shapes.append(Cylinder((cx, cy, 0.0), r, hi[2]))
    elif name == "snow_mountain":
        # a few large wedges hugging the walls, leaving the middle open
        for sx in (-1.0, 1.0):
            cx = sx * (hi[0] - 2.5)
            cy = rng.uniform(lo[1] + 3.0, hi[1] - 3.0)
            h = rng.uniform(0.5, 0.8) * hi[2]
            base = [(cx - 2.0, cy - 2.0), (cx + 2.0, cy - 2.0), (cx, cy + 2.0)]
            shapes.append(Prism(tuple(base), 0.0, h))
    else:
        raise ScenarioError(f"unknown background: {name}")
    return shapes


# ---------------------------------------------------------------------------
# agent initialization
# ---------------------------------------------------------------------------

def init_random(spec: ScenarioSpec, cfg: WorldConfig, shapes,
                rng: np.random.Generator):
    """Independent start/goal pairs, mutually separated and clear of shapes."""
    lo, hi = _margin_bounds(cfg, 2.0 * cfg.agent_radius + 0.25)
    clearance = OBSTACLE_KEEPOUT
    min_gap = START_SEPARATION_FACTOR * cfg.agent_radius

    def draw(existing):
        for _ in range(PLACE_ATTEMPTS):
            p = rng.uniform(lo, hi)
            if existing and min(
                np.linalg.norm(p - q) for q in existing) < min_gap:
                continue
            if _clear_of_shapes(p, shapes, clearance):
                return p
        raise ScenarioError(
            f"could not place {spec.n_agents} agents in {spec.label}")

    starts, goals = [], []
    for _ in range(spec.n_agents):
        s = draw(starts)
        starts.append(s)
    for i in range(spec.n_agents):
        for _ in range(PLACE_ATTEMPTS):
            g = rng.uniform(lo, hi)
            if np.linalg.norm(g - starts[i]) < MIN_GOAL_DISTANCE:
                continue
            if goals and min(np.linalg.norm(g - q) for q in goals) < min_gap:
                continue
            if _clear_of_shapes(g, shapes, clearance):
                goals.append(g)
                break
        else:
            raise ScenarioError(f"could not place goal {i} in {spec.label}")
    return np.array(starts), np.array(goals)


def init_circle(spec: ScenarioSpec, cfg: WorldConfig, shapes,
                rng: np.random.Generator):
    """Evenly spaced ring; every goal is the antipode of its start."""
    n = spec.n_agents
    radius = spec.circle_radius
    lo, hi = _margin_bounds(cfg, 2.0 * cfg.agent_radius + 0.25)
    if radius > min(hi[0], hi[1]) or spec.circle_height >= hi[2] or spec.circle_height <= lo[2]:
        raise ScenarioError(
            f"circle radius {radius} / height {spec.circle_height} exceeds the world")
    arc_gap = 2.0 * radius * np.sin(np.pi / n)  # chord between neighbors
    if arc_gap < START_SEPARATION_FACTOR * cfg.agent_radius:
        raise ScenarioError(
            f"{n} agents on a {radius} m circle spawn closer than "
            f"{START_SEPARATION_FACTOR}x the body radius")
    phase = rng.uniform(0.0, 2.0 * np.pi)
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    z = spec.circle_height
    starts = np.stack([radius * np.cos(theta), radius * np.sin(theta),
                       np.full(n, z)], axis=1)
    goals = np.stack([radius * np.cos(theta + np.pi),
                      radius * np.sin(theta + np.pi), np.full(n, z)], axis=1)
    for p in list(starts) + list(goals):
        if not _clear_of_shapes(p, shapes, OBSTACLE_KEEPOUT):
            raise ScenarioError("circle spawn or goal intersects the background")
    return starts, goals


# ---------------------------------------------------------------------------
# obstacles
# ---------------------------------------------------------------------------

def _make_obstacle(kind: str, center, rng: np.random.Generator):
    cx, cy, cz = center
    if kind == "cube":
        return Box((cx, cy, cz), (CUBE_HALF, CUBE_HALF, CUBE_HALF))
    if kind == "sphere":
        return Sphere((cx, cy, cz), SPHERE_RADIUS)
    if kind == "cylinder":
        return Cylinder((cx, cy, 0.0), CYLINDER_RADIUS, CYLINDER_HEIGHT)
    if kind == "prism":
        ang = rng.uniform(0.0, 2.0 * np.pi)
        pts = []
        for k in range(3):
            a = ang + 2.0 * np.pi * k / 3.0
            pts.append((cx + PRISM_EDGE * np.cos(a), cy + PRISM_EDGE * np.sin(a)))
        return Prism(tuple(pts), 0.0, PRISM_HEIGHT)
    raise ScenarioError(f"unknown obstacle kind: {kind}")


def place_obstacles(spec: ScenarioSpec, cfg: WorldConfig, shapes,
                    starts: np.ndarray, goals: np.ndarray,
                    rng: np.random.Generator):
    """Drop the requested obstacle mix clear of agents, goals and furniture."""
    lo, hi = _margin_bounds(cfg, 1.0)
    placed = []
    protected = list(starts) + list(goals)
    for kind, count in spec.obstacles:
        for _ in range(count):
            for _ in range(PLACE_ATTEMPTS):
                cx = rng.uniform(lo[0], hi[0])
                cy = rng.uniform(lo[1], hi[1])
                if kind == "cube":
                    cz = rng.uniform(max(lo[2], CUBE_HALF + 0.1), hi[2])
                elif kind == "sphere":
                    cz = rng.uniform(max(lo[2], SPHERE_RADIUS + 0.1), hi[2])
                else:
                    cz = 0.0  # grounded kinds ignore z
                cand = _make_obstacle(kind, (cx, cy, cz), rng)
                c, r = bounding_sphere(cand)
                if min(
                    (np.linalg.norm(np.asarray(c) - np.asarray(qc)) - r - qr
                     for qc, qr in map(bounding_sphere, shapes + placed)),
                    default=np.inf,
                ) < 0.2:
                    continue
                if any(np.linalg.norm(np.asarray(c) - p) < r + OBSTACLE_KEEPOUT
                       for p in protected):
                    continue
                placed.append(cand)
                break
            else:
                raise ScenarioError(
                    f"could not place {kind} #{len(placed) + 1} in {spec.label}")
    return placed


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

def build_scenario(spec: ScenarioSpec, cfg: WorldConfig,
                   seed: int | None = None) -> Scenario:
    """Assemble a full scene; deterministic for a given (spec, cfg, seed)."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    shapes = build_background(spec.background, cfg, rng)
    if spec.init == "random":
        starts, goals = init_random(spec, cfg, shapes, rng)
    elif spec.init == "circle":
        starts, goals = init_circle(spec, cfg, shapes, rng)
    else:
        raise ScenarioError(f"unknown init pattern: {spec.init}")
    shapes = shapes + place_obstacles(spec, cfg, shapes, starts, goals, rng)
    return Scenario(spec=spec, shapes=shapes, starts=starts, goals=goals)
