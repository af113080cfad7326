import json

import numpy as np
import pytest

from entrocache.cli import main
from entrocache.config import RunConfig, build_config, read_config_file
from entrocache.errors import InputError
from entrocache.imageio import write_pgm
from entrocache.synth import SceneSpec, synth_scene, write_scene
from entrocache.tensorio import MAGIC_ATTENTION, write_tensor

SMALL_SPEC_JSON = {
    "width": 32,
    "height": 32,
    "steps": 4,
    "grid_rows": 4,
    "grid_cols": 4,
    "object_size": 8,
    "object_start": [0, 8],
    "object_speed": [8, 8],
    "distractor_size": 8,
    "distractor_pos": [24, 24],
    "d_model": 6,
    "d_k": 3,
    "d_v": 3,
}

SMALL_FLAGS = ["--grid", "4x4", "--k1", "2", "--k2", "4", "--T", "8"]


@pytest.fixture
def scene_dir(tmp_path):
    spec = SceneSpec(
        **{
            k: tuple(v) if isinstance(v, list) else v
            for k, v in SMALL_SPEC_JSON.items()
        }
    )
    scene = synth_scene(7, spec)
    return write_scene(scene, tmp_path / "scene")


class TestRunCommand:
    def test_run_on_scene_dir(self, tmp_path, scene_dir, capsys):
        out = tmp_path / "out"
        code = main(
            ["run", "--scene", str(scene_dir), "--out", str(out), *SMALL_FLAGS]
        )
        assert code == 0
        assert (out / "report.json").is_file()
        assert (out / "trace.json").is_file()
        assert (out / "report.csv").is_file()
        assert (out / "overlays" / "step_0000.png").is_file()
        printed = capsys.readouterr().out
        assert "flops_ratio" in printed

    def test_run_missing_scene_dir_is_input_error(self, tmp_path, capsys):
        code = main(["run", "--scene", str(tmp_path / "nope"), *SMALL_FLAGS])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_run_bad_grid_is_input_error(self, scene_dir, capsys):
        code = main(["run", "--scene", str(scene_dir), "--grid", "3x5"])
        assert code == 1

    def test_run_config_file_with_cli_override(self, tmp_path, scene_dir):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# demo config\ngrid_rows=4\ngrid_cols=4\nk1=2\nk2=3\n"
            "total_steps=8\nwrite_overlays=false\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--config",
                str(cfg),
                "--scene",
                str(scene_dir),
                "--out",
                str(out),
                "--k2",
                "4",
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["k1"] == 2  # from file
        assert report["config"]["k2"] == 4  # CLI override wins
        assert not (out / "overlays").exists()


class TestSynthCommand:
    def test_synth_writes_scene(self, tmp_path):
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(SMALL_SPEC_JSON), encoding="utf-8")
        out = tmp_path / "scene"
        code = main(["synth", "--seed", "9", "--spec", str(spec_file), "--out", str(out)])
        assert code == 0
        assert (out / "scene.json").is_file()
        assert len(list((out / "frames").glob("*.pgm"))) == 4
        assert len(list((out / "attn").glob("*.bin"))) == 4
        assert len(list((out / "embed").glob("*.bin"))) == 4
        assert len(list((out / "weights").glob("*.bin"))) == 3

    def test_synth_deterministic_bytes(self, tmp_path):
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(SMALL_SPEC_JSON), encoding="utf-8")
        for name in ("a", "b"):
            main(["synth", "--seed", "9", "--spec", str(spec_file), "--out", str(tmp_path / name)])
        a_files = sorted((tmp_path / "a").rglob("*"))
        for a in a_files:
            if a.is_file():
                b = tmp_path / "b" / a.relative_to(tmp_path / "a")
                assert a.read_bytes() == b.read_bytes()

    def test_synth_invalid_spec_is_input_error(self, tmp_path, capsys):
        spec_file = tmp_path / "spec.json"
        bad = dict(SMALL_SPEC_JSON, object_size=99)
        spec_file.write_text(json.dumps(bad), encoding="utf-8")
        code = main(["synth", "--spec", str(spec_file), "--out", str(tmp_path / "x")])
        assert code == 1


class TestEntropyCommand:
    def test_scores_one_frame(self, tmp_path, scene_dir, capsys):
        code = main(
            [
                "entropy",
                "--frame",
                str(scene_dir / "frames" / "frame_0000.pgm"),
                "--attn",
                str(scene_dir / "attn" / "attn_0000.bin"),
                "--grid",
                "4x4",
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["visual"]) == 16
        assert len(doc["attention_info"]) == 16
        assert all(0.0 <= v <= 1.0 for v in doc["visual"])

    def test_json_attention_accepted(self, tmp_path, capsys, rng):
        from entrocache.frames import Frame
        from entrocache.tensorio import write_attention_json

        frame_path = tmp_path / "f.pgm"
        write_pgm(
            Frame(pixels=rng.integers(0, 256, size=(8, 8), dtype=np.uint8)),
            frame_path,
        )
        attn_path = tmp_path / "a.json"
        write_attention_json(attn_path, rng.random((1, 1, 3, 4)))
        code = main(
            ["entropy", "--frame", str(frame_path), "--attn", str(attn_path), "--grid", "2x2"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["visual"]) == 4


class TestSelectCommand:
    def test_first_step_has_empty_static(self, scene_dir, capsys):
        code = main(
            [
                "select",
                "--frame",
                str(scene_dir / "frames" / "frame_0000.pgm"),
                "--attn",
                str(scene_dir / "attn" / "attn_0000.bin"),
                "--t",
                "0",
                *SMALL_FLAGS,
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["static"] == []
        assert doc["reuse"] == []
        assert doc["t"] == 0
        assert doc["k_vis"] == 4 and doc["k_attn"] == 2

    def test_with_previous_frame(self, scene_dir, capsys):
        code = main(
            [
                "select",
                "--frame",
                str(scene_dir / "frames" / "frame_0001.pgm"),
                "--prev",
                str(scene_dir / "frames" / "frame_0000.pgm"),
                "--attn",
                str(scene_dir / "attn" / "attn_0000.bin"),
                "--t",
                "1",
                *SMALL_FLAGS,
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["static"]) > 0
        assert set(doc["reuse"]) == set(doc["static"]) - set(doc["important"])


class TestSweepCommand:
    def test_sweep_outputs_monotone_table(self, tmp_path, scene_dir, capsys):
        out_file = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                "--scene",
                str(scene_dir),
                "--budgets",
                "5,10,15",
                "--ratio",
                "2:3",
                "--out-file",
                str(out_file),
                *SMALL_FLAGS,
            ]
        )
        assert code == 0
        rows = json.loads(out_file.read_text())
        assert [r["budget"] for r in rows] == [5, 10, 15]
        ratios = [r["flops_ratio"] for r in rows]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        stdout = capsys.readouterr().out
        assert stdout.splitlines()[0].startswith("budget,k1,k2")

    def test_bad_ratio_is_input_error(self, scene_dir):
        assert main(["sweep", "--scene", str(scene_dir), "--ratio", "abc"]) == 1


class TestConfigFile:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus=1\n", encoding="utf-8")
        with pytest.raises(InputError):
            read_config_file(cfg)

    def test_dash_keys_normalized(self, tmp_path):
        cfg = tmp_path / "ok.cfg"
        cfg.write_text("g-levels=128\nattn-source=same-frame\n", encoding="utf-8")
        values = read_config_file(cfg)
        assert values == {"g_levels": 128, "attn_source": "same-frame"}

    def test_bool_parsing(self, tmp_path):
        cfg = tmp_path / "ok.cfg"
        cfg.write_text("write_overlays=no\n", encoding="utf-8")
        assert read_config_file(cfg)["write_overlays"] is False

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("k1=forty\n", encoding="utf-8")
        with pytest.raises(InputError):
            read_config_file(cfg)

    def test_build_config_precedence(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("k1=10\nk2=20\n", encoding="utf-8")
        merged = build_config(cfg, k2=30, tau=None)
        assert merged.k1 == 10
        assert merged.k2 == 30
        assert merged.tau == RunConfig().tau

    def test_defaults_match_reference_setup(self):
        config = RunConfig()
        assert (config.k1, config.k2, config.total_steps) == (40, 60, 100)
        assert (config.grid_rows, config.grid_cols, config.g_levels) == (16, 16, 256)
        assert config.tau == 0.996
        assert config.attn_source == "previous-frame"
