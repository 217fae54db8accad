import hashlib
import json
import os
from pathlib import Path

import pytest

from floodwalk.cli import main


def tree_digest(root):
    """Stable digest of every file under root (relative path + bytes)."""
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    rc = main(["synth", "--out", str(out), "--seed", "7", "--blocks", "2",
               "--keyframes", "6", "--points-per-kf", "10"])
    assert rc == 0
    return out


SMALL_CFG = {
    "n_frames": 4,
    "render_width": 128,
    "render_height": 64,
    "max_evals": 18,
    "seed": 0,
}


class TestSynth:
    def test_outputs_complete(self, synth_dir):
        names = {p.name for p in synth_dir.iterdir()}
        assert {"footprints.geojson", "dem.asc", "slam.json", "masks",
                "endpoints.json", "ground_truth.json"} <= names

    def test_deterministic_per_seed(self, synth_dir, tmp_path):
        again = tmp_path / "again"
        rc = main(["synth", "--out", str(again), "--seed", "7", "--blocks", "2",
                   "--keyframes", "6", "--points-per-kf", "10"])
        assert rc == 0
        assert tree_digest(synth_dir) == tree_digest(again)

    def test_different_seed_differs(self, synth_dir, tmp_path):
        other = tmp_path / "other"
        rc = main(["synth", "--out", str(other), "--seed", "8", "--blocks", "2",
                   "--keyframes", "6", "--points-per-kf", "10"])
        assert rc == 0
        assert tree_digest(synth_dir) != tree_digest(other)


class TestBuildModel:
    def test_writes_glb_deterministically(self, synth_dir, tmp_path):
        outs = []
        for name in ("a.glb", "b.glb"):
            out = tmp_path / name
            rc = main(["build-model", "--footprints", str(synth_dir / "footprints.geojson"),
                       "--dem", str(synth_dir / "dem.asc"), "--out", str(out),
                       "--sidecar", str(out) + ".json"])
            assert rc == 0
            outs.append(out)
        assert outs[0].read_bytes() == outs[1].read_bytes()
        assert (tmp_path / "a.glb.json").read_bytes() == (tmp_path / "b.glb.json").read_bytes()

    def test_default_height_equals_explicit(self, synth_dir, tmp_path):
        implicit = tmp_path / "implicit.glb"
        explicit = tmp_path / "explicit.glb"
        base = ["build-model", "--footprints", str(synth_dir / "footprints.geojson"),
                "--dem", str(synth_dir / "dem.asc")]
        assert main(base + ["--out", str(implicit)]) == 0
        assert main(base + ["--height", "20", "--out", str(explicit)]) == 0
        assert implicit.read_bytes() == explicit.read_bytes()

    def test_missing_input_exits_1(self, tmp_path):
        rc = main(["build-model", "--footprints", str(tmp_path / "nope.geojson"),
                   "--dem", str(tmp_path / "nope.asc"), "--out", str(tmp_path / "o.glb")])
        assert rc == 1


class TestAlign:
    def test_byte_identical_runs(self, synth_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(SMALL_CFG))
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            rc = main(["align",
                       "--footprints", str(synth_dir / "footprints.geojson"),
                       "--dem", str(synth_dir / "dem.asc"),
                       "--slam", str(synth_dir / "slam.json"),
                       "--masks", str(synth_dir / "masks"),
                       "--endpoints", str(synth_dir / "endpoints.json"),
                       "--config", str(cfg),
                       "--out", str(out)])
            assert rc == 0
            outs.append(out)
        assert outs[0].read_bytes() == outs[1].read_bytes()
        doc = json.loads(outs[0].read_text())
        assert {"v_s", "v_e", "lambda", "loss", "history", "detail", "tool_version"} <= set(doc)

    def test_result_loss_finite(self, synth_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(SMALL_CFG))
        out = tmp_path / "r.json"
        assert main(["align",
                     "--footprints", str(synth_dir / "footprints.geojson"),
                     "--dem", str(synth_dir / "dem.asc"),
                     "--slam", str(synth_dir / "slam.json"),
                     "--masks", str(synth_dir / "masks"),
                     "--endpoints", str(synth_dir / "endpoints.json"),
                     "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["loss"]["total"] >= 0.0


class TestRenderDebugAndExport:
    @pytest.fixture()
    def gt_params_file(self, synth_dir, tmp_path):
        gt = json.loads((synth_dir / "ground_truth.json").read_text())
        p = tmp_path / "params.json"
        p.write_text(json.dumps({"v_s": gt["v_s"], "v_e": gt["v_e"], "lambda": gt["lambda"]}))
        return p

    def test_render_debug(self, synth_dir, tmp_path, gt_params_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_frames": 2, "render_width": 64, "render_height": 32}))
        out = tmp_path / "debug"
        rc = main(["render-debug",
                   "--footprints", str(synth_dir / "footprints.geojson"),
                   "--dem", str(synth_dir / "dem.asc"),
                   "--slam", str(synth_dir / "slam.json"),
                   "--params", str(gt_params_file),
                   "--config", str(cfg),
                   "--out", str(out)])
        assert rc == 0
        assert len(list(out.glob("render_*.png"))) == 2

    def test_export_bundle(self, synth_dir, tmp_path, gt_params_file):
        frames = tmp_path / "frames"
        frames.mkdir()
        traj = json.loads((synth_dir / "slam.json").read_text())
        for kf in traj["keyframes"]:
            (frames / f"frame_{kf['id']}.jpg").write_bytes(b"\xff\xd8\xff\xd9")
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({
            "points": [{"name": "goal", "pos": [12040.0, 34000.0], "radius": 5.0}],
            "time_limit": 60.0,
            "schedule": [[0.0, 0.0], [90.0, 21.0]],
            "drown_depth": 0.5,
        }))
        out = tmp_path / "bundle"
        rc = main(["export",
                   "--footprints", str(synth_dir / "footprints.geojson"),
                   "--dem", str(synth_dir / "dem.asc"),
                   "--slam", str(synth_dir / "slam.json"),
                   "--params", str(gt_params_file),
                   "--frames", str(frames),
                   "--scenario", str(scenario),
                   "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["keyframes"]) == len(traj["keyframes"])
        assert (out / "city.glb").exists()


class TestScenarioCheck:
    def test_status_output(self, synth_dir, tmp_path, capsys):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps({
            "points": [{"name": "goal", "pos": [12040.0, 34000.0], "radius": 5.0}],
            "time_limit": 60.0,
            "schedule": [[0.0, 0.0]],
        }))
        rc = main(["scenario-check", "--scenario", str(scenario),
                   "--dem", str(synth_dir / "dem.asc"),
                   "--avatar", "12040,34000", "--time", "0"])
        assert rc == 0
        out = capsys.readouterr().out
        assert json.loads(out) == {"status": "Evacuated:goal"}

    def test_unknown_subcommand_exits_1(self):
        assert main(["frobnicate"]) == 1
