from __future__ import annotations

import json
import time

import numpy as np
import toml
from click.testing import CliRunner

from agbmap.cli import main
from agbmap.geotiff import read_raster, write_raster
from agbmap.raster import AGB_CHANNEL, ZONE_CHANNEL, Grid, Raster


def _run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def _synth(tmp_path, size=128, seed=3, density=25.0):
    out = tmp_path / "scene"
    result = _run("synth", "--size", size, "--seed", seed,
                  "--density", density, "--out", out)
    assert result.exit_code == 0, result.output
    return out


class TestSynthCommand:
    def test_writes_scene_files(self, tmp_path):
        out = _synth(tmp_path, size=64)
        for name in ("true_agb.tif", "manifest_s2.txt", "manifest_s1.txt",
                     "manifest_sif.txt", "footprints.csv", "synth_config.toml"):
            assert (out / name).exists(), name

    def test_snapshot_has_version(self, tmp_path):
        out = _synth(tmp_path, size=64)
        snap = toml.load(out / "synth_config.toml")
        assert snap["tool"]["name"] == "agbmap"
        assert snap["tool"]["version"]

    def test_bad_params_fail_with_nonzero_exit(self, tmp_path):
        result = _run("synth", "--size", 64, "--cloud-fraction", "1.7",
                      "--out", tmp_path / "x")
        assert result.exit_code != 0
        assert "cloud_fraction" in result.output


class TestCompositeCommand:
    def test_median_matches_library(self, tmp_path):
        from agbmap.compositing import median_composite, read_manifest

        scene = _synth(tmp_path, size=64)
        out = tmp_path / "composite" / "s2_median.tif"
        result = _run("composite", "--manifest", scene / "manifest_s2.txt",
                      "--method", "median", "--out", out)
        assert result.exit_code == 0, result.output
        got = read_raster(out)
        want = median_composite(read_manifest(scene / "manifest_s2.txt"))
        assert np.allclose(got.data[got.valid_mask], want.data[want.valid_mask])

    def test_mean_with_window(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        out = tmp_path / "gpp.tif"
        result = _run("composite", "--manifest", scene / "manifest_sif.txt",
                      "--method", "mean", "--window", "2021-06-01:2021-08-31",
                      "--out", out)
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_missing_manifest(self, tmp_path):
        result = _run("composite", "--manifest", tmp_path / "nope.txt",
                      "--out", tmp_path / "o.tif")
        assert result.exit_code != 0
        assert "nope.txt" in result.output


class TestResampleAndMatch:
    def test_resample_onto_target(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        s1_composite = tmp_path / "s1.tif"
        _run("composite", "--manifest", scene / "manifest_s1.txt",
             "--method", "median", "--out", s1_composite)
        out = tmp_path / "s1_30m.tif"
        result = _run("resample", "--input", s1_composite,
                      "--like", scene / "true_agb.tif", "--out", out)
        assert result.exit_code == 0, result.output
        assert read_raster(out).grid == read_raster(scene / "true_agb.tif").grid

    def test_match_reports_counts(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        out = tmp_path / "target.tif"
        result = _run("match", "--footprints", scene / "footprints.csv",
                      "--like", scene / "true_agb.tif", "--out", out)
        assert result.exit_code == 0, result.output
        assert "matched" in result.output
        assert out.exists()


class TestCubeTrainPredict:
    def test_full_chain_under_two_minutes(self, tmp_path):
        start = time.time()
        scene = _synth(tmp_path, size=128)
        cube_path = tmp_path / "cube.tif"
        result = _run("cube", "--scene-dir", scene, "--subset", "SIF/S1/S2",
                      "--out", cube_path)
        assert result.exit_code == 0, result.output
        assert cube_path.exists()
        assert cube_path.with_suffix(".json").exists()

        artifact_path = tmp_path / "model" / "linear.bin"
        result = _run("train", "--cube", cube_path, "--model", "linear",
                      "--out", artifact_path)
        assert result.exit_code == 0, result.output
        assert artifact_path.exists()
        metrics = json.loads((artifact_path.parent / "metrics.json").read_text())
        assert metrics["model"] == "linear"
        assert np.isfinite(metrics["testing_rmse"])
        assert (artifact_path.parent / "train_config.toml").exists()
        assert time.time() - start < 120

        map_path = tmp_path / "map.tif"
        result = _run("predict", "--artifact", artifact_path, "--cube", cube_path,
                      "--out", map_path)
        assert result.exit_code == 0, result.output
        dense = read_raster(map_path)
        assert dense.data[dense.valid_mask].min() >= 0.0  # clamped at export

    def test_cube_validation_lists_all_errors(self, tmp_path):
        result = _run("cube", "--s2-manifest", tmp_path / "missing_s2.txt",
                      "--subset", "SIF/S1/S2", "--out", tmp_path / "c.tif")
        assert result.exit_code != 0
        # one message listing every violated field at once
        assert "footprints: required" in result.output
        assert "s1_manifest: required" in result.output
        assert "missing_s2.txt" in result.output

    def test_train_unknown_model(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        cube_path = tmp_path / "cube.tif"
        _run("cube", "--scene-dir", scene, "--subset", "S2-only", "--out", cube_path)
        result = _run("train", "--cube", cube_path, "--model", "svm",
                      "--out", tmp_path / "a.bin")
        assert result.exit_code != 0
        assert "svm" in result.output


class TestEvaluateCommand:
    def test_missing_artifact_names_path(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        cube_path = tmp_path / "cube.tif"
        _run("cube", "--scene-dir", scene, "--subset", "S2-only", "--out", cube_path)
        result = _run("evaluate", "--artifact", tmp_path / "missing_model.bin",
                      "--cube", cube_path)
        assert result.exit_code != 0
        assert "missing_model.bin" in result.output

    def test_evaluate_round_trip(self, tmp_path):
        scene = _synth(tmp_path)
        cube_path = tmp_path / "cube.tif"
        _run("cube", "--scene-dir", scene, "--subset", "S2-only", "--out", cube_path)
        artifact_path = tmp_path / "rf.bin"
        result = _run("train", "--cube", cube_path, "--model", "rf",
                      "--config", _cfg(tmp_path, {"train": {
                          "hyperparams": {"n_trees": 20}}}),
                      "--out", artifact_path)
        assert result.exit_code == 0, result.output
        out = tmp_path / "eval" / "eval.json"
        result = _run("evaluate", "--artifact", artifact_path, "--cube", cube_path,
                      "--split", "validation", "--out", out)
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["split"] == "validation"
        assert payload["rmse"] >= 0


def _cfg(tmp_path, data):
    path = tmp_path / "config.toml"
    path.write_text(toml.dumps(data))
    return path


class TestSearchCommand:
    def test_search_writes_trials_and_best(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        cube_path = tmp_path / "cube.tif"
        _run("cube", "--scene-dir", scene, "--subset", "S2-only", "--out", cube_path)
        space = tmp_path / "space.toml"
        space.write_text(toml.dumps({
            "n_samples": 3, "seed": 1,
            "params": {"n_trees": {"choices": [5, 10]},
                       "max_depth": {"choices": [4, 0]}}}))
        out = tmp_path / "trials.csv"
        result = _run("search", "--cube", cube_path, "--model", "rf",
                      "--space", space, "--n", 3, "--out", out)
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("trial,")
        assert len(lines) == 4
        assert (tmp_path / "best.json").exists()

    def test_search_deterministic(self, tmp_path):
        scene = _synth(tmp_path, size=64)
        cube_path = tmp_path / "cube.tif"
        _run("cube", "--scene-dir", scene, "--subset", "S2-only", "--out", cube_path)
        out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
        for out in (out1, out2):
            result = _run("search", "--cube", cube_path, "--model", "gbm",
                          "--n", 2, "--seed", 5, "--out", out)
            assert result.exit_code == 0, result.output
        assert out1.read_text() == out2.read_text()


class TestZonesAndWildfire:
    def test_zones_outputs(self, tmp_path):
        g = Grid(0.0, 0.0, 30.0, 30.0, 32, 32, "utm")
        rng = np.random.default_rng(0)
        pred = Raster(g, (AGB_CHANNEL,), rng.uniform(0, 300, (32, 32)))
        zones = Raster(g, (ZONE_CHANNEL,), rng.integers(1, 7, (32, 32)).astype(float))
        write_raster(tmp_path / "pred.tif", pred)
        write_raster(tmp_path / "zones.tif", zones)
        legend = tmp_path / "legend.json"
        legend.write_text(json.dumps({str(i): name for i, name in
                                      enumerate(["BWh", "BSk", "Csb", "Cfa", "Dfa", "Dfb"], 1)}))
        out = tmp_path / "zone_report"
        result = _run("zones", "--prediction", tmp_path / "pred.tif",
                      "--zones", tmp_path / "zones.tif", "--legend", legend,
                      "--top-n", 6, "--out", out)
        assert result.exit_code == 0, result.output
        assert (out / "zones.csv").exists()
        assert (out / "zones.png").exists()
        assert "Cfa" in (out / "zones.csv").read_text()

    def test_wildfire_outputs(self, tmp_path):
        from agbmap.synth import SceneParams, burn_scene

        scene = burn_scene(SceneParams(size=64, seed=9))
        write_raster(tmp_path / "before.tif", scene.before_agb)
        write_raster(tmp_path / "after.tif", scene.after_agb)
        write_raster(tmp_path / "b08.tif", scene.b08_after)
        write_raster(tmp_path / "b12.tif", scene.b12_after)
        out = tmp_path / "fire"
        result = _run("wildfire", "--before", tmp_path / "before.tif",
                      "--after", tmp_path / "after.tif",
                      "--b08", tmp_path / "b08.tif", "--b12", tmp_path / "b12.tif",
                      "--out", out)
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text())
        assert report["total_loss_mg_c"] > 0
        assert report["nbr_kind"] == "post"
        for name in ("delta.tif", "nbr.tif", "panel.png", "wildfire_config.toml"):
            assert (out / name).exists()

    def test_wildfire_dnbr_needs_before_bands(self, tmp_path):
        g = Grid(0.0, 0.0, 30.0, 30.0, 8, 8, "utm")
        r = Raster(g, (AGB_CHANNEL,), np.ones((8, 8)))
        for name in ("before", "after", "b08", "b12"):
            write_raster(tmp_path / f"{name}.tif", r)
        result = _run("wildfire", "--before", tmp_path / "before.tif",
                      "--after", tmp_path / "after.tif",
                      "--b08", tmp_path / "b08.tif", "--b12", tmp_path / "b12.tif",
                      "--use-dnbr", "--out", tmp_path / "fire")
        assert result.exit_code != 0
        assert "b08-before" in result.output or "b08_before" in result.output
