"""Command-line surface: exit codes, artifacts, determinism, error paths."""

import csv
import json
from pathlib import Path

import pytest

from cnav.cli import main

TINY_CONFIG = {
    "world": {"depth_width": 5, "depth_height": 3, "max_steps": 60},
    "scenario": {"background": "playground", "n_agents": 2},
    "nets": {"latent_dim": 4, "conv": [[4, 3, 1]], "hidden": [8, 8]},
    "trainer": {"batch_size": 16, "warmup_steps": 30, "buffer_capacity": 500,
                "total_steps": 120, "eval_every": 60, "eval_episodes": 2,
                "metrics_every": 10, "seed": 3},
}

SUITE = [{"background": "playground", "n_agents": 2}]


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data))
    return path


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    """One trained tiny run shared by the eval tests."""
    root = tmp_path_factory.mktemp("smoke")
    cfg = write_json(root / "config.json", TINY_CONFIG)
    out = root / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    return out


class TestTrain:
    def test_missing_config_exits_2_naming_path(self, tmp_path, capsys):
        rc = main(["train", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "nope.json" in capsys.readouterr().err

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        bad = dict(TINY_CONFIG)
        bad["trainer"] = dict(TINY_CONFIG["trainer"], warp_speed=9)
        cfg = write_json(tmp_path / "bad.json", bad)
        rc = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "warp_speed" in capsys.readouterr().err

    def test_smoke_run_writes_checkpoints_and_config(self, smoke_run):
        assert (smoke_run / "step_120.cnav").exists()
        assert (smoke_run / "config.json").exists()
        assert (smoke_run / "metrics.jsonl").exists()

    def test_seed_flag_and_env_fallback_agree(self, tmp_path, monkeypatch):
        cfg = write_json(tmp_path / "c.json", TINY_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.delenv("CNAV_SEED", raising=False)
        assert main(["train", "--config", str(cfg), "--out", str(a),
                     "--seed", "7"]) == 0
        monkeypatch.setenv("CNAV_SEED", "7")
        assert main(["train", "--config", str(cfg), "--out", str(b)]) == 0
        assert (a / "metrics.jsonl").read_text() == (b / "metrics.jsonl").read_text()

    def test_bad_env_seed_exits_2(self, tmp_path, monkeypatch, capsys):
        cfg = write_json(tmp_path / "c.json", TINY_CONFIG)
        monkeypatch.setenv("CNAV_SEED", "many")
        rc = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "CNAV_SEED" in capsys.readouterr().err

    def test_train_without_config_or_resume_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["train", "--out", str(tmp_path / "o")])
        assert e.value.code == 2

    def test_resume_continues_to_new_total(self, smoke_run, tmp_path):
        out = tmp_path / "resumed"
        rc = main(["train", "--resume", str(smoke_run / "step_60.cnav"),
                   "--out", str(out)])
        assert rc == 0
        assert (out / "step_120.cnav").exists()


class TestEval:
    def test_deterministic_tables(self, smoke_run, tmp_path):
        suite = write_json(tmp_path / "suite.json", SUITE)
        ckpt = str(smoke_run / "step_120.cnav")
        for out in ("e1", "e2"):
            rc = main(["eval", "--checkpoint", ckpt, "--suite", str(suite),
                       "--episodes", "2", "--seed", "5",
                       "--out", str(tmp_path / out)])
            assert rc == 0
        assert (tmp_path / "e1/table.json").read_text() == \
               (tmp_path / "e2/table.json").read_text()

    def test_table_columns_exact(self, smoke_run, tmp_path):
        suite = write_json(tmp_path / "suite.json", SUITE)
        out = tmp_path / "ev"
        main(["eval", "--checkpoint", str(smoke_run / "step_120.cnav"),
              "--suite", str(suite), "--episodes", "1", "--out", str(out)])
        with open(out / "table.csv", newline="") as f:
            header = next(csv.reader(f))
        assert header == ["scene", "success_rate", "spl", "extra_mean",
                          "extra_std", "speed_mean", "speed_std"]
        assert (out / "trajectories_playground.csv").exists()

    def test_paired_eval_writes_both_tables_and_delta(self, smoke_run, tmp_path):
        suite = write_json(tmp_path / "suite.json", SUITE)
        out = tmp_path / "pair"
        ckpt = str(smoke_run / "step_120.cnav")
        rc = main(["eval", "--checkpoint", ckpt, "--baseline", ckpt,
                   "--suite", str(suite), "--episodes", "2", "--seed", "1",
                   "--out", str(out)])
        assert rc == 0
        assert (out / "table.json").exists()
        assert (out / "baseline" / "table.json").exists()
        delta = json.loads((out / "delta.json").read_text())
        # identical checkpoints: every defined difference is exactly zero
        assert delta[0]["scene"] == "playground"
        for key, value in delta[0].items():
            if key != "scene" and value is not None:
                assert value == 0.0

    def test_bad_magic_exits_1_with_no_partial_output(self, tmp_path, capsys):
        bad = tmp_path / "bad.cnav"
        bad.write_bytes(b"BAD!")
        suite = write_json(tmp_path / "suite.json", SUITE)
        out = tmp_path / "ev"
        rc = main(["eval", "--checkpoint", str(bad), "--suite", str(suite),
                   "--episodes", "1", "--out", str(out)])
        assert rc == 1
        assert "magic" in capsys.readouterr().err
        assert not out.exists()

    def test_empty_suite_exits_2(self, smoke_run, tmp_path):
        suite = write_json(tmp_path / "suite.json", [])
        rc = main(["eval", "--checkpoint", str(smoke_run / "step_120.cnav"),
                   "--suite", str(suite), "--episodes", "1",
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_out_flag_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["eval", "--checkpoint", "x", "--suite", "y"])
        assert e.value.code == 2


class TestGradcheck:
    def test_fresh_checkout_passes_and_covers_ops(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == 0
        report = capsys.readouterr().out
        for op in ("matmul", "div", "relu", "tanh", "exp", "log", "square",
                   "minimum", "clip", "reduce_sum_axes", "reduce_mean",
                   "reshape", "concat", "conv2d_s1", "conv2d_transpose_s1"):
            assert op in report
        for composite in ("critic_residual_composite",
                          "policy_objective_composite",
                          "reconstruction_objective_composite",
                          "channel_gate_composite"):
            assert composite in report
        assert "worst:" in report

    def test_threshold_breach_exits_1(self, capsys):
        rc = main(["gradcheck", "--seed", "0", "--threshold", "1e-15",
                   "--primitives-only"])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out


class TestScenarioPreview:
    def test_circle_exports_antipodal_pairs(self, tmp_path):
        spec = write_json(tmp_path / "s.json",
                          {"background": "playground", "init": "circle",
                           "n_agents": 8, "circle_radius": 6.0})
        out = tmp_path / "scene"
        assert main(["scenario", "--spec", str(spec), "--seed", "4",
                     "--out", str(out)]) == 0
        with open(out / "agents.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        starts = [r for r in rows if r["role"] == "start"]
        goals = [r for r in rows if r["role"] == "goal"]
        assert len(starts) == 8 and len(goals) == 8
        for s, g in zip(starts, goals):
            assert float(s["x"]) == pytest.approx(-float(g["x"]), abs=1e-5)
            assert float(s["y"]) == pytest.approx(-float(g["y"]), abs=1e-5)

    def test_forest_exports_trunk_rows(self, tmp_path):
        spec = write_json(tmp_path / "s.json",
                          {"background": "forest", "n_agents": 2})
        out = tmp_path / "scene"
        assert main(["scenario", "--spec", str(spec), "--seed", "1",
                     "--out", str(out)]) == 0
        with open(out / "geometry.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert sum(r["kind"] == "cylinder" for r in rows) >= 20

    def test_preview_is_deterministic(self, tmp_path):
        spec = write_json(tmp_path / "s.json",
                          {"background": "snow_mountain", "n_agents": 2,
                           "obstacles": [["cube", 3], ["sphere", 2]]})
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["scenario", "--spec", str(spec), "--seed", "9",
                         "--out", str(out)]) == 0
            outs.append((out / "geometry.csv").read_text()
                        + (out / "agents.csv").read_text())
        assert outs[0] == outs[1]

    def test_invalid_spec_exits_2(self, tmp_path, capsys):
        spec = write_json(tmp_path / "s.json", {"background": "volcano"})
        rc = main(["scenario", "--spec", str(spec), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "background" in capsys.readouterr().err
