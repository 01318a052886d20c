"""End-to-end command-line behavior: exit codes, files, and overrides."""

import json

import numpy as np
import pytest

from bossal.cli import PRESETS, build_config, deep_merge, main
from bossal.data import load_feature_file
from bossal.errors import ValidationError


def write_config(path, text):
    path.write_text(text)
    return str(path)


BASE_CONFIG = """
name = "cli-margin"
selector = "margin"
b = 4
cycles = 2
repetitions = 2
master_seed = 3

[dataset.synthetic]
classes = 3
dim = 4
per_class = 30
spread = 0.8
separation = 5.0
seed = 2

[train]
epochs = 10
"""

RANDOM_CONFIG = BASE_CONFIG.replace('"cli-margin"', '"cli-random"').replace(
    '"margin"', '"random"'
)

BOSS_CONFIG = """
name = "cli-boss"
selector = "boss"
b = 4
cycles = 2
repetitions = 2
master_seed = 3

[dataset.synthetic]
classes = 3
dim = 4
per_class = 30
spread = 0.8
separation = 5.0
seed = 2

[train]
epochs = 10

[boss]
strategies = ["random", "margin"]
num_batches = 4
assess_epochs = 4
"""


def run_cli(*argv):
    return main(list(argv))


class TestHelpers:
    def test_deep_merge_nested(self):
        base = {"a": 1, "sub": {"x": 1, "y": 2}}
        extra = {"sub": {"y": 3, "z": 4}, "b": 5}
        merged = deep_merge(base, extra)
        assert merged == {"a": 1, "sub": {"x": 1, "y": 3, "z": 4}, "b": 5}
        assert base["sub"] == {"x": 1, "y": 2}  # untouched

    def test_build_config_rejects_unknown_field(self):
        with pytest.raises(ValidationError, match="mystery"):
            build_config({"selector": "margin", "b": 5, "mystery": 1})

    def test_build_config_rejects_bool_int(self):
        with pytest.raises(ValidationError):
            build_config({"selector": "margin", "b": True})

    def test_presets_shape(self):
        assert set(PRESETS) == {
            "boss", "boss-s", "boss-xs", "boss-xxs",
            "cdo-cifar10", "cdo-snacks", "cdo-dopanim", "cdo-dtd",
            "sas-cifar10", "sas-snacks", "sas-dopanim", "sas-dtd",
        }
        ladder = [PRESETS[p]["boss"] for p in ("boss", "boss-s", "boss-xs", "boss-xxs")]
        assert [p["num_batches"] for p in ladder] == [100, 50, 25, 10]
        assert [p["assess_epochs"] for p in ladder] == [50, 25, 10, 5]


class TestSynth:
    def test_writes_loadable_file(self, tmp_path, capsys):
        out = tmp_path / "toy.alfx"
        code = run_cli(
            "synth", "--classes", "3", "--dim", "5", "--per-class", "8",
            "--spread", "0.5", "--separation", "4.0", "--seed", "7",
            "--name", "toy", "--out", str(out),
        )
        assert code == 0
        assert "toy.alfx" in capsys.readouterr().out
        ds = load_feature_file(out)
        assert ds.n == 24
        assert ds.dim == 5
        assert ds.name == "toy"

    def test_deterministic_bytes(self, tmp_path):
        args = [
            "synth", "--classes", "2", "--dim", "3", "--per-class", "5",
            "--spread", "0.5", "--separation", "4.0", "--seed", "1",
        ]
        a, b = tmp_path / "a.alfx", tmp_path / "b.alfx"
        assert run_cli(*args, "--out", str(a)) == 0
        assert run_cli(*args, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_spec_exits_2(self, tmp_path, capsys):
        code = run_cli(
            "synth", "--classes", "3", "--dim", "5", "--per-class", "1",
            "--spread", "0.5", "--separation", "4.0",
            "--out", str(tmp_path / "x.alfx"),
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestRun:
    def test_full_run_outputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        out = tmp_path / "out"
        assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
        assert "run complete" in capsys.readouterr().out
        assert (out / "curves.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["selector"] == "margin"
        assert summary["name"] == "cli-margin"
        assert summary["cycles"] == 2
        assert summary["repetitions"] == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 3
        assert manifest["dataset"]["instances"] == 90
        assert len(manifest["config_sha256"]) == 64
        assert manifest["finished_unix"] >= manifest["started_unix"]
        assert sorted(manifest["outputs"]) == manifest["outputs"]

    def test_rerun_byte_identical_curves(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out", str(a)) == 0
        assert run_cli("run", "--config", cfg, "--out", str(b)) == 0
        assert (a / "curves.csv").read_bytes() == (b / "curves.csv").read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--config", cfg, "--out", str(a), "--seed", "99") == 0
        assert run_cli("run", "--config", cfg, "--out", str(b)) == 0
        manifest = json.loads((a / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 99
        assert (a / "curves.csv").read_bytes() != (b / "curves.csv").read_bytes()

    def test_preset_plus_config_merge(self, tmp_path):
        # The config file wins over the preset where they overlap.
        cfg = write_config(tmp_path / "c.toml", BOSS_CONFIG)
        out = tmp_path / "out"
        assert run_cli(
            "run", "--preset", "boss-xxs", "--config", cfg, "--out", str(out)
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["boss"]["num_batches"] == 4
        assert manifest["config"]["boss"]["assess_epochs"] == 4
        assert manifest["config"]["selector"] == "boss"

    def test_preset_defaults_survive_merge(self, tmp_path):
        # Fields the config leaves out keep their preset values.
        partial = BOSS_CONFIG.replace("num_batches = 4\n", "")
        cfg = write_config(tmp_path / "c.toml", partial)
        out = tmp_path / "out"
        assert run_cli(
            "run", "--preset", "boss-xxs", "--config", cfg, "--out", str(out)
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["boss"]["num_batches"] == 10

    def test_out_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BOSSAL_OUT", str(tmp_path / "envroot"))
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        assert run_cli("run", "--config", cfg) == 0
        assert (tmp_path / "envroot" / "cli-margin" / "curves.csv").exists()

    def test_default_out_under_cwd(self, tmp_path, monkeypatch):
        monkeypatch.delenv("BOSSAL_OUT", raising=False)
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        assert run_cli("run", "--config", cfg) == 0
        assert (tmp_path / "bossal-out" / "cli-margin" / "curves.csv").exists()

    def test_missing_config_and_preset(self, capsys):
        assert run_cli("run") == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_preset(self, capsys):
        assert run_cli("run", "--preset", "warp") == 2
        assert "unknown preset" in capsys.readouterr().err

    def test_config_file_missing(self, tmp_path, capsys):
        assert run_cli("run", "--config", str(tmp_path / "nope.toml")) == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_toml(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", "selector = [unclosed")
        assert run_cli("run", "--config", cfg) == 2
        assert "TOML" in capsys.readouterr().err

    def test_unknown_config_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG + "\nwarp_drive = 1\n")
        assert run_cli("run", "--config", cfg) == 2
        assert "warp_drive" in capsys.readouterr().err

    def test_missing_dataset(self, tmp_path, capsys):
        text = BASE_CONFIG.split("[dataset.synthetic]")[0]
        cfg = write_config(tmp_path / "c.toml", text)
        assert run_cli("run", "--config", cfg) == 2
        assert "dataset" in capsys.readouterr().err

    def test_dataset_file_path(self, tmp_path):
        feature_file = tmp_path / "toy.alfx"
        assert run_cli(
            "synth", "--classes", "3", "--dim", "4", "--per-class", "30",
            "--spread", "0.8", "--separation", "5.0", "--seed", "2",
            "--out", str(feature_file),
        ) == 0
        text = BASE_CONFIG.split("[dataset.synthetic]")[0] + (
            f'dataset = "{feature_file}"\n[train]\nepochs = 10\n'
        )
        cfg = write_config(tmp_path / "c.toml", text)
        out = tmp_path / "out"
        assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["dataset"]["instances"] == 90

    def test_bad_jobs(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", BASE_CONFIG)
        assert run_cli("run", "--config", cfg, "--jobs", "0") == 2
        assert "--jobs" in capsys.readouterr().err

    def test_budget_overflow_exits_2(self, tmp_path, capsys):
        text = BASE_CONFIG.replace("cycles = 2", "cycles = 50")
        cfg = write_config(tmp_path / "c.toml", text)
        assert run_cli("run", "--config", cfg, "--out", str(tmp_path / "o")) == 2
        assert "budget" in capsys.readouterr().err


@pytest.fixture
def finished_runs(tmp_path):
    dirs = {}
    for label, text in (
        ("margin", BASE_CONFIG),
        ("random", RANDOM_CONFIG),
        ("boss", BOSS_CONFIG),
    ):
        cfg = write_config(tmp_path / f"{label}.toml", text)
        out = tmp_path / label
        assert run_cli("run", "--config", cfg, "--out", str(out)) == 0
        dirs[label] = out
    return dirs


class TestReport:
    def test_curves_mode_writes_three_files(self, finished_runs, tmp_path, capsys):
        out = tmp_path / "report"
        code = run_cli(
            "report", str(finished_runs["margin"]), str(finished_runs["random"]),
            "--mode", "curves", "--out", str(out),
        )
        assert code == 0
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 3
        for suffix in ("csv", "dat", "png"):
            assert (out / f"curves.{suffix}").exists()
            assert (out / f"curves.{suffix}").stat().st_size > 0

    def test_relative_mode_needs_random_run(self, finished_runs, tmp_path, capsys):
        out = tmp_path / "report"
        code = run_cli(
            "report", str(finished_runs["margin"]), "--mode", "relative",
            "--out", str(out),
        )
        assert code == 2
        assert "random" in capsys.readouterr().err

        code = run_cli(
            "report", str(finished_runs["margin"]), str(finished_runs["random"]),
            "--mode", "relative", "--out", str(out),
        )
        assert code == 0
        assert (out / "relative.csv").exists()

    def test_aulc_mode(self, finished_runs, tmp_path):
        out = tmp_path / "report"
        code = run_cli(
            "report", str(finished_runs["margin"]), str(finished_runs["boss"]),
            "--mode", "aulc", "--out", str(out),
        )
        assert code == 0
        text = (out / "aulc.csv").read_text()
        assert "cli-margin" in text and "cli-boss" in text

    def test_picks_mode_oracle_only(self, finished_runs, tmp_path, capsys):
        out = tmp_path / "report"
        code = run_cli(
            "report", str(finished_runs["margin"]), "--mode", "picks",
            "--out", str(out),
        )
        assert code == 2
        assert "no pick records" in capsys.readouterr().err

        code = run_cli(
            "report", str(finished_runs["boss"]), "--mode", "picks",
            "--out", str(out),
        )
        assert code == 0
        text = (out / "picks.csv").read_text()
        assert "cli-boss" in text

    def test_non_run_directory(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli("report", str(empty), "--mode", "curves") == 2
        assert "missing" in capsys.readouterr().err

    def test_incompatible_runs(self, finished_runs, tmp_path, capsys):
        text = BASE_CONFIG.replace("cycles = 2", "cycles = 3").replace(
            '"cli-margin"', '"cli-long"'
        )
        cfg = write_config(tmp_path / "long.toml", text)
        long_out = tmp_path / "long"
        assert run_cli("run", "--config", cfg, "--out", str(long_out)) == 0
        code = run_cli(
            "report", str(finished_runs["margin"]), str(long_out),
            "--mode", "curves", "--out", str(tmp_path / "r"),
        )
        assert code == 2
        assert "cycles" in capsys.readouterr().err


class TestTopLevel:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--version")
        assert exc.value.code == 0
        assert "bossal" in capsys.readouterr().out

    def test_no_command_errors(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli()
        assert exc.value.code == 2
