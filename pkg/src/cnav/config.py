"""Run configuration: dataclasses, defaults, strict JSON (de)serialization.

Every field has a default, so an empty JSON object is a valid config.
Unknown keys are rejected with the offending path named, which catches
typos before they silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


BACKGROUNDS = ("playground", "grassland", "forest", "snow_mountain")
OBSTACLE_KINDS = ("cube", "sphere", "cylinder", "prism")
INIT_PATTERNS = ("random", "circle")
STEER_MODES = ("yaw_rate", "lateral")
RAE_L2_TARGETS = ("decoder", "encoder", "both")


@dataclass
class WorldConfig:
    """Simulator constants; distances in meters, angles in degrees."""

    extent: tuple = (16.0, 16.0, 4.0)  # x/y spans centered on 0, z from 0
    dt: float = 0.1
    max_forward_speed: float = 2.0
    max_climb_speed: float = 1.0
    max_steer_rate: float = 1.0  # rad/s when steering yaw, m/s in lateral mode
    steer_mode: str = "yaw_rate"
    velocity_lag: float = 0.5  # first-order response gain toward commands
    agent_radius: float = 0.25
    arrive_radius: float = 0.5
    d_safe: float = 1.0
    depth_width: int = 32
    depth_height: int = 24
    fov_h_deg: float = 90.0
    fov_v_deg: float = 60.0
    depth_max: float = 10.0
    max_steps: int = 200
    r_arrival: float = 5.0
    r_collision: float = -5.0
    w_goal: float = 1.0
    w_avoid: float = -0.5
    bounded: bool = True  # False removes the walls (open test world)

    def __post_init__(self):
        if len(self.extent) != 3 or any(e <= 0 for e in self.extent):
            raise ConfigError(f"world.extent must be 3 positive spans, got {self.extent}")
        for name in ("dt", "max_forward_speed", "max_climb_speed", "max_steer_rate",
                     "agent_radius", "arrive_radius", "d_safe", "depth_max"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"world.{name} must be positive")
        if not 0 < self.velocity_lag <= 1:
            raise ConfigError(f"world.velocity_lag must be in (0, 1], got {self.velocity_lag}")
        if self.steer_mode not in STEER_MODES:
            raise ConfigError(f"world.steer_mode must be one of {STEER_MODES}")
        if self.depth_width < 1 or self.depth_height < 1:
            raise ConfigError("world depth resolution must be at least 1x1")
        if not 0 < self.fov_h_deg < 360 or not 0 < self.fov_v_deg < 180:
            raise ConfigError("world field of view out of range")
        if self.d_safe >= self.depth_max:
            raise ConfigError("world.d_safe must be below world.depth_max")
        if self.max_steps < 1:
            raise ConfigError("world.max_steps must be at least 1")

    @property
    def bounds_lo(self):
        return (-self.extent[0] / 2.0, -self.extent[1] / 2.0, 0.0)

    @property
    def bounds_hi(self):
        return (self.extent[0] / 2.0, self.extent[1] / 2.0, self.extent[2])


@dataclass
class ScenarioSpec:
    """One evaluation or training scene family."""

    name: str | None = None
    background: str = "playground"
    obstacles: tuple = ()  # ((kind, count), ...)
    init: str = "random"
    n_agents: int = 2
    circle_radius: float = 6.0
    circle_height: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.background not in BACKGROUNDS:
            raise ConfigError(f"scenario.background must be one of {BACKGROUNDS}")
        if self.init not in INIT_PATTERNS:
            raise ConfigError(f"scenario.init must be one of {INIT_PATTERNS}")
        if self.n_agents < 1:
            raise ConfigError("scenario.n_agents must be at least 1")
        norm = []
        for entry in self.obstacles:
            if isinstance(entry, dict):
                entry = (entry.get("kind"), entry.get("count"))
            kind, count = entry
            if kind not in OBSTACLE_KINDS:
                raise ConfigError(f"scenario obstacle kind must be one of {OBSTACLE_KINDS}")
            count = int(count)
            if count < 0:
                raise ConfigError("scenario obstacle count must be non-negative")
            norm.append((kind, count))
        object.__setattr__(self, "obstacles", tuple(norm))
        if self.circle_radius <= 0 or self.circle_height <= 0:
            raise ConfigError("scenario circle placement must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        parts = [self.background]
        for kind, count in self.obstacles:
            parts.append(f"{count}{kind}")
        return "+".join(parts)


@dataclass
class NetConfig:
    """Sizes of encoder/decoder/actor/critic and the channel-mask stage."""

    latent_dim: int = 16
    conv: tuple = ((8, 4, 2), (8, 3, 2), (8, 3, 1), (8, 3, 1))  # (out_ch, kernel, stride)
    hidden: tuple = (64, 64)
    log_std_min: float = -10.0
    log_std_max: float = 2.0
    cfs_enabled: bool = True
    cfs_eps: float = 1e-8
    goal_scale: float = 0.1  # applied to the goal vector before the actor/critic

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError("nets.latent_dim must be at least 1")
        conv = tuple(tuple(int(x) for x in layer) for layer in self.conv)
        if not conv or any(len(l) != 3 for l in conv):
            raise ConfigError("nets.conv must be a list of (out_ch, kernel, stride)")
        if any(c < 1 or k < 1 or s < 1 for c, k, s in conv):
            raise ConfigError("nets.conv entries must be positive")
        object.__setattr__(self, "conv", conv)
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigError("nets.hidden must be positive widths")
        object.__setattr__(self, "hidden", hidden)
        if self.log_std_min >= self.log_std_max:
            raise ConfigError("nets.log_std_min must be below nets.log_std_max")
        if self.cfs_eps <= 0:
            raise ConfigError("nets.cfs_eps must be positive")


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 128
    warmup_steps: int = 1000
    buffer_capacity: int = 100_000
    lr: float = 3e-4
    cfs_lr: float = 1e-3
    alpha_init: float = 0.1
    target_entropy: float | None = None  # None -> -(action dim)
    rae_latent_weight: float = 1e-6
    rae_l2_weight: float = 1e-7
    rae_l2_target: str = "decoder"
    total_steps: int = 60_000
    update_every: int = 1
    timeout_bootstrap: bool = True  # False treats running out of time as terminal
    metrics_every: int = 1
    eval_every: int = 5000
    eval_episodes: int = 20
    stop_at_success: float | None = None  # early stop on 2 consecutive evals >= this
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ConfigError("trainer.gamma must be in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ConfigError("trainer.tau must be in (0, 1]")
        for name in ("batch_size", "buffer_capacity", "total_steps",
                     "update_every", "metrics_every", "eval_every", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"trainer.{name} must be at least 1")
        if self.warmup_steps < 0:
            raise ConfigError("trainer.warmup_steps must be non-negative")
        if self.batch_size > self.buffer_capacity:
            raise ConfigError("trainer.batch_size cannot exceed buffer_capacity")
        if self.alpha_init <= 0:
            raise ConfigError("trainer.alpha_init must be positive")
        if self.rae_l2_target not in RAE_L2_TARGETS:
            raise ConfigError(f"trainer.rae_l2_target must be one of {RAE_L2_TARGETS}")
        if self.stop_at_success is not None and not 0 < self.stop_at_success <= 100:
            raise ConfigError("trainer.stop_at_success must be in (0, 100]")


@dataclass
class EvalConfig:
    episodes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("eval.episodes must be at least 1")


@dataclass
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    nets: NetConfig = field(default_factory=NetConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTIONS = {
    "world": WorldConfig,
    "scenario": ScenarioSpec,
    "nets": NetConfig,
    "trainer": TrainerConfig,
    "eval": EvalConfig,
}


def _build_section(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None


def run_config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"config: unknown section(s) {unknown}")
    kwargs = {
        name: _build_section(cls, data.get(name, {}), name)
        for name, cls in _SECTIONS.items()
    }
    return RunConfig(**kwargs)


def scenario_from_dict(data: dict, path: str = "scenario") -> ScenarioSpec:
    return _build_section(ScenarioSpec, data, path)


def run_config_to_dict(cfg: RunConfig) -> dict:
    def clean(obj):
        if isinstance(obj, tuple):
            return [clean(v) for v in obj]
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        return obj

    return {name: clean(dataclasses.asdict(getattr(cfg, name))) for name in _SECTIONS}


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    return run_config_from_dict(data)


def save_run_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(run_config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
