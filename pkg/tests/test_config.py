import json

import pytest

from cnav.config import (
    ConfigError,
    RunConfig,
    ScenarioSpec,
    WorldConfig,
    load_run_config,
    run_config_from_dict,
    run_config_to_dict,
    save_run_config,
)


def test_defaults_construct():
    cfg = RunConfig()
    assert cfg.world.depth_width == 32
    assert cfg.world.depth_height == 24
    assert cfg.world.extent == (16.0, 16.0, 4.0)
    assert cfg.nets.cfs_enabled is True
    assert cfg.trainer.gamma == 0.99
    assert cfg.scenario.background == "playground"


def test_bounds_derived_from_extent():
    w = WorldConfig(extent=(10.0, 8.0, 4.0))
    assert w.bounds_lo == (-5.0, -4.0, 0.0)
    assert w.bounds_hi == (5.0, 4.0, 4.0)


def test_unknown_key_named_in_error():
    with pytest.raises(ConfigError, match=r"world.*warp_speed"):
        run_config_from_dict({"world": {"warp_speed": 9}})


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="flux"):
        run_config_from_dict({"flux": {}})


@pytest.mark.parametrize("section,key,value", [
    ("world", "dt", 0.0),
    ("world", "depth_width", 0),
    ("world", "steer_mode", "sideways"),
    ("world", "depth_max", -1.0),
    ("scenario", "background", "moon"),
    ("scenario", "init", "spiral"),
    ("scenario", "n_agents", 0),
    ("nets", "latent_dim", 0),
    ("nets", "log_std_min", 3.0),  # must stay below log_std_max
    ("trainer", "gamma", 1.5),
    ("trainer", "tau", 0.0),
    ("trainer", "rae_l2_target", "everything"),
    ("eval", "episodes", 0),
])
def test_invalid_values_rejected(section, key, value):
    with pytest.raises(ConfigError):
        run_config_from_dict({section: {key: value}})


def test_obstacle_kind_validated():
    with pytest.raises(ConfigError):
        ScenarioSpec(obstacles=(("torus", 2),))


def test_obstacle_dict_form_normalized():
    cfg = run_config_from_dict(
        {"scenario": {"obstacles": [{"kind": "cube", "count": 3}]}}
    )
    assert cfg.scenario.obstacles == (("cube", 3),)


def test_dict_round_trip():
    cfg = run_config_from_dict({
        "world": {"extent": [12.0, 12.0, 5.0], "max_steps": 50},
        "scenario": {"background": "forest", "n_agents": 4, "init": "circle"},
        "trainer": {"total_steps": 1000, "seed": 7},
    })
    again = run_config_from_dict(run_config_to_dict(cfg))
    assert again == cfg


def test_file_round_trip(tmp_path):
    cfg = RunConfig(scenario=ScenarioSpec(background="grassland", seed=3))
    path = tmp_path / "run.json"
    save_run_config(cfg, path)
    text = path.read_text()
    assert text.endswith("\n")
    json.loads(text)  # valid JSON on disk
    assert load_run_config(path) == cfg


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "nope.json")


def test_malformed_json_is_config_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(p)


def test_scenario_label_mentions_contents():
    s = ScenarioSpec(background="forest", obstacles=(("cube", 4),))
    assert "forest" in s.label
    assert "cube" in s.label
