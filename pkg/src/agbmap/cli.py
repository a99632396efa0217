"""Command-line entry point: one subcommand per pipeline stage.

Config-file-first: every subcommand accepts ``--config FILE.toml`` whose
section named after the subcommand supplies defaults; explicit flags override
the file. Each run writes a resolved-config snapshot (with the tool version)
next to its outputs so reruns are reproducible, and validation errors list
every violated field at once.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import click
import numpy as np
import toml

from . import __version__
from .errors import AgbMapError, ConfigError

_MODEL_ALIASES = {
    "linear": "linear",
    "lr": "linear",
    "rf": "random_forest",
    "random_forest": "random_forest",
    "gbm": "gradient_boosting",
    "xgb": "gradient_boosting",
    "gradient_boosting": "gradient_boosting",
    "unet": "unet",
}


def _fail(exc: BaseException, code: int = 2) -> "None":
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(code)


def _load_section(config_path: str | None, section: str) -> dict:
    if not config_path:
        return {}
    try:
        data = toml.load(config_path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {config_path}")
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"config file {config_path}: {exc}")
    return dict(data.get(section, {}))


def _resolve(section: dict, **flags) -> dict:
    """File values first, then every explicitly-set flag on top."""
    out = dict(section)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _write_snapshot(out_dir: Path, command: str, params: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {
        "tool": {"name": "agbmap", "version": __version__},
        command: _toml_safe(params),
    }
    (out_dir / f"{command}_config.toml").write_text(toml.dumps(snapshot))


def _toml_safe(value):
    if isinstance(value, dict):
        return {k: _toml_safe(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_toml_safe(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _parse_window(text: str) -> tuple[date, date]:
    try:
        start, _, end = text.partition(":")
        return (date.fromisoformat(start), date.fromisoformat(end))
    except ValueError:
        raise ConfigError(f"window must be YYYY-MM-DD:YYYY-MM-DD, got {text!r}")


def _require(errors: list[str], condition: bool, message: str) -> None:
    if not condition:
        errors.append(message)


def _check(errors: list[str]) -> None:
    if errors:
        raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(errors))


@click.group()
@click.version_option(__version__, prog_name="agbmap")
def main() -> None:
    """Sparse-footprint biomass mapping pipeline."""


# --- synth -------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--size", type=int, default=None, help="Scene side in 30 m pixels.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--density", type=float, default=None, help="Footprints per 1000 pixels.")
@click.option("--cloud-fraction", type=float, default=None)
@click.option("--gpp-informative/--gpp-uninformative", default=None)
def synth(config_path, size, seed, out_dir, density, cloud_fraction, gpp_informative):
    """Generate a synthetic scene: truth, per-modality series, footprints."""
    from .synth import SceneParams, generate_scene, save_scene

    try:
        params = _resolve(
            _load_section(config_path, "synth"),
            size=size, seed=seed, footprint_density=density,
            cloud_fraction=cloud_fraction, gpp_informative=gpp_informative)
        params.setdefault("size", 256)
        params.setdefault("seed", 0)
        try:
            scene_params = SceneParams(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc))
        out = Path(out_dir)
        scene = generate_scene(scene_params)
        save_scene(scene, out)
        _write_snapshot(out, "synth", params)
        click.echo(f"wrote scene ({scene_params.size}x{scene_params.size}) to {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- composite ---------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--manifest", type=str, required=True)
@click.option("--method", type=click.Choice(["median", "mean"]), default=None)
@click.option("--window", type=str, default=None, help="YYYY-MM-DD:YYYY-MM-DD (mean only)")
@click.option("--out", "out_path", type=str, required=True)
def composite(config_path, manifest, method, window, out_path):
    """Composite a scene series into one raster (cloud-aware median or windowed mean)."""
    from .compositing import SUMMER_WINDOW_2021, median_composite, read_manifest, temporal_mean
    from .geotiff import write_raster

    try:
        params = _resolve(_load_section(config_path, "composite"),
                          manifest=manifest, method=method, window=window,
                          out=str(out_path))
        params.setdefault("method", "median")
        errors: list[str] = []
        _require(errors, Path(params["manifest"]).exists(),
                 f"manifest: no such file {params['manifest']!r}")
        _require(errors, params["method"] in ("median", "mean"),
                 f"method: must be median or mean, got {params['method']!r}")
        _check(errors)
        series = read_manifest(params["manifest"])
        if params["method"] == "median":
            result = median_composite(series)
        else:
            win = _parse_window(params["window"]) if params.get("window") \
                else SUMMER_WINDOW_2021
            result = temporal_mean(series, win)
        out = Path(params["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        write_raster(out, result)
        _write_snapshot(out.parent, "composite", params)
        click.echo(f"wrote composite to {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- resample ----------------------------------------------------------------

@main.command()
@click.option("--input", "input_path", type=str, required=True)
@click.option("--like", "like_path", type=str, required=True,
              help="Raster whose grid the input is resampled onto.")
@click.option("--out", "out_path", type=str, required=True)
def resample(input_path, like_path, out_path):
    """Bilinearly resample a raster onto another raster's grid."""
    from .geotiff import read_raster, write_raster
    from .raster import bilinear_resample

    try:
        errors: list[str] = []
        _require(errors, Path(input_path).exists(), f"input: no such file {input_path!r}")
        _require(errors, Path(like_path).exists(), f"like: no such file {like_path!r}")
        _check(errors)
        src = read_raster(input_path)
        ref = read_raster(like_path)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_raster(out, bilinear_resample(src, ref.grid))
        _write_snapshot(out.parent, "resample",
                        {"input": input_path, "like": like_path, "out": out_path})
        click.echo(f"wrote resampled raster to {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- match -------------------------------------------------------------------

@main.command()
@click.option("--footprints", "footprints_path", type=str, required=True)
@click.option("--like", "like_path", type=str, required=True)
@click.option("--out", "out_path", type=str, required=True)
def match(footprints_path, like_path, out_path):
    """Match footprints to grid cells; collided cells take the mean."""
    from .cube import match_footprints, read_footprints_csv
    from .geotiff import read_raster, write_raster

    try:
        errors: list[str] = []
        _require(errors, Path(footprints_path).exists(),
                 f"footprints: no such file {footprints_path!r}")
        _require(errors, Path(like_path).exists(), f"like: no such file {like_path!r}")
        _check(errors)
        ref = read_raster(like_path)
        fps = read_footprints_csv(footprints_path, crs_id=ref.grid.crs_id)
        target, mask, stats = match_footprints(fps, ref.grid)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_raster(out, target, metadata={"match_stats": stats.__dict__})
        _write_snapshot(out.parent, "match",
                        {"footprints": footprints_path, "like": like_path, "out": out_path})
        click.echo(f"matched {stats.assigned}/{stats.total} footprints "
                   f"({stats.out_of_bounds} out of bounds) into {stats.cells} cells")
    except AgbMapError as exc:
        _fail(exc)


# --- cube --------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--scene-dir", type=str, default=None,
              help="Directory written by `synth` (manifests + footprints).")
@click.option("--s2-manifest", type=str, default=None)
@click.option("--s1-manifest", type=str, default=None)
@click.option("--sif-manifest", type=str, default=None)
@click.option("--footprints", "footprints_path", type=str, default=None)
@click.option("--subset", type=click.Choice(["SIF/S1/S2", "S1/S2", "S2-only"]), default=None)
@click.option("--window", type=str, default=None)
@click.option("--out", "out_path", type=str, required=True)
def cube(config_path, scene_dir, s2_manifest, s1_manifest, sif_manifest,
         footprints_path, subset, window, out_path):
    """Assemble a datacube from composited modalities plus matched footprints."""
    from .compositing import SUMMER_WINDOW_2021, read_manifest
    from .cube import assemble, match_footprints, read_footprints_csv, save_cube
    from .pipeline import composite_inputs

    try:
        params = _resolve(_load_section(config_path, "cube"),
                          scene_dir=scene_dir, s2_manifest=s2_manifest,
                          s1_manifest=s1_manifest, sif_manifest=sif_manifest,
                          footprints=footprints_path, subset=subset,
                          window=window, out=str(out_path))
        params.setdefault("subset", "SIF/S1/S2")
        if params.get("scene_dir"):
            base = Path(params["scene_dir"])
            params.setdefault("s2_manifest", str(base / "manifest_s2.txt"))
            params.setdefault("s1_manifest", str(base / "manifest_s1.txt"))
            params.setdefault("sif_manifest", str(base / "manifest_sif.txt"))
            params.setdefault("footprints", str(base / "footprints.csv"))
        errors: list[str] = []
        _require(errors, bool(params.get("s2_manifest")), "s2_manifest: required")
        _require(errors, bool(params.get("footprints")), "footprints: required")
        subset_name = params["subset"]
        if subset_name != "S2-only":
            _require(errors, bool(params.get("s1_manifest")),
                     f"s1_manifest: required for subset {subset_name}")
        if subset_name == "SIF/S1/S2":
            _require(errors, bool(params.get("sif_manifest")),
                     f"sif_manifest: required for subset {subset_name}")
        for key in ("s2_manifest", "s1_manifest", "sif_manifest", "footprints"):
            if params.get(key):
                _require(errors, Path(params[key]).exists(),
                         f"{key}: no such file {params[key]!r}")
        _check(errors)

        win = _parse_window(params["window"]) if params.get("window") else SUMMER_WINDOW_2021
        s2 = read_manifest(params["s2_manifest"])
        s1 = read_manifest(params["s1_manifest"]) if params.get("s1_manifest") else None
        sif = read_manifest(params["sif_manifest"]) if params.get("sif_manifest") else None
        grid = s2.scenes[0].grid
        inputs = composite_inputs(grid, s2=s2, s1=s1, sif=sif, window=win)
        fps = read_footprints_csv(params["footprints"], crs_id=grid.crs_id)
        target, mask, stats = match_footprints(fps, grid)
        built = assemble(inputs, target, mask, subset_name)
        out = Path(params["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        save_cube(out, built, extra={"match_stats": stats.__dict__})
        _write_snapshot(out.parent, "cube", params)
        click.echo(f"wrote {subset_name} cube ({built.n_supervised} supervised pixels) to {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- train -------------------------------------------------------------------

def _train_config_from(params: dict) -> "TrainConfig":
    from .training import TrainConfig

    fields = {k: params[k] for k in
              ("learning_rate", "batch_size", "max_epochs", "patience", "crop_size",
               "hflip_p", "vflip_p", "random_crop", "seed", "n_runs") if k in params}
    try:
        return TrainConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train config: {exc}")


@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--cube", "cube_path", type=str, required=True)
@click.option("--model", "model_name", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--tile-size", type=int, default=None)
@click.option("--split-seed", type=int, default=None)
@click.option("--out", "out_path", type=str, required=True)
def train(config_path, cube_path, model_name, seed, tile_size, split_seed, out_path):
    """Split, normalize, and fit one model; writes the artifact + metrics."""
    from .cube import SplitSpec, compute_norm_stats, load_cube, normalize, split as split_cube
    from .evaluation import evaluate
    from .models import TabularModelKind, UNetConfig, save_artifact
    from .training import train_tabular_on_cube, train_unet

    try:
        params = _resolve(_load_section(config_path, "train"),
                          cube=cube_path, model=model_name, seed=seed,
                          tile_size=tile_size, split_seed=split_seed, out=str(out_path))
        params.setdefault("model", "linear")
        params.setdefault("seed", 0)
        params.setdefault("tile_size", 64)
        params.setdefault("split_seed", 17)
        errors: list[str] = []
        _require(errors, Path(params["cube"]).exists(),
                 f"cube: no such file {params['cube']!r}")
        _require(errors, params["model"] in _MODEL_ALIASES,
                 f"model: unknown {params['model']!r} "
                 f"(choose from {sorted(set(_MODEL_ALIASES))})")
        _check(errors)
        kind = _MODEL_ALIASES[params["model"]]

        raw = load_cube(params["cube"])
        unit = "tile" if kind == "unet" else "pixel"
        spec = SplitSpec(unit=unit, seed=int(params["split_seed"]),
                         tile_size=int(params["tile_size"]))
        train_view, test_view = split_cube(raw, spec)
        within = None
        if train_view.windows is not None:
            within = np.zeros(raw.grid.shape, dtype=bool)
            for w in train_view.windows:
                within[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width] = True
        stats = compute_norm_stats(raw, within=within)
        train_n = normalize(train_view, stats)
        test_n = normalize(test_view, stats)

        if kind == "unet":
            cfg = replace(_train_config_from(params), seed=int(params["seed"]))
            unet_cfg = UNetConfig(
                in_channels=len(train_n.channels),
                depth=int(params.get("depth", 4)),
                base_width=int(params.get("base_width", 32)))
            artifact = train_unet(train_n, cfg, test_n, unet_cfg)
        else:
            hyper = dict(params.get("hyperparams", {}))
            artifact = train_tabular_on_cube(TabularModelKind(kind, hyper), train_n,
                                             seed=int(params["seed"]))
        result = evaluate(artifact, test_n, "testing")
        out = Path(params["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        save_artifact(out, artifact)
        metrics = {"model": kind, "testing_rmse": result.rmse,
                   "n_pixels": result.n_pixels, "seed": int(params["seed"]),
                   "split_seed": int(params["split_seed"])}
        (out.parent / "metrics.json").write_text(
            json.dumps(metrics, indent=2, sort_keys=True))
        _write_snapshot(out.parent, "train", params)
        click.echo(f"trained {kind}: testing RMSE {result.rmse:.2f} Mg C/ha "
                   f"({result.n_pixels} px); artifact -> {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- search ------------------------------------------------------------------

DEFAULT_SPACES = {
    "unet": {"base_width": {"choices": [16, 32, 64]},
             "learning_rate": {"log_uniform": [1e-4, 1e-1]}},
    "random_forest": {"n_trees": {"choices": [100, 300, 500]},
                      "max_depth": {"choices": [8, 16, 0]}},
    "gradient_boosting": {"n_trees": {"choices": [100, 300]},
                          "learning_rate": {"choices": [0.05, 0.1, 0.3]},
                          "max_depth": {"choices": [4, 6, 8]}},
}


@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--cube", "cube_path", type=str, required=True)
@click.option("--model", "model_name", type=str, default=None)
@click.option("--space", "space_path", type=str, default=None,
              help="TOML search space; defaults to the model's built-in grid.")
@click.option("--n", "n_draws", type=int, default=None)
@click.option("--k", "k_folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None,
              help="Parallel trials (default $AGBMAP_WORKERS or 1).")
@click.option("--out", "out_path", type=str, required=True)
def search(config_path, cube_path, model_name, space_path, n_draws, k_folds, seed,
           workers, out_path):
    """Randomized hyperparameter search scored by k-fold cross-validation."""
    from .cube import load_cube, normalize
    from .models import TabularModelKind, extract_pixel_table
    from .training import SearchSpace, kfold_cv_tabular, random_search

    try:
        params = _resolve(_load_section(config_path, "search"),
                          cube=cube_path, model=model_name, space=space_path,
                          n=n_draws, k=k_folds, seed=seed, workers=workers,
                          out=str(out_path))
        params.setdefault("model", "random_forest")
        params.setdefault("n", 10)
        params.setdefault("k", 5)
        params.setdefault("seed", 0)
        params.setdefault("workers", int(os.environ.get("AGBMAP_WORKERS", "1")))
        errors: list[str] = []
        _require(errors, Path(params["cube"]).exists(),
                 f"cube: no such file {params['cube']!r}")
        _require(errors, params["model"] in _MODEL_ALIASES,
                 f"model: unknown {params['model']!r}")
        if params.get("space"):
            _require(errors, Path(params["space"]).exists(),
                     f"space: no such file {params['space']!r}")
        _check(errors)
        kind = _MODEL_ALIASES[params["model"]]
        if kind == "unet":
            raise ConfigError("search currently covers the tabular baselines; "
                              "tune the deep model through `ablate`/`train` configs")

        if params.get("space"):
            space_spec = toml.load(params["space"])
            space = SearchSpace(space_spec.get("params", {}),
                                n_samples=int(space_spec.get("n_samples", params["n"])),
                                seed=int(space_spec.get("seed", params["seed"])))
        else:
            space = SearchSpace(DEFAULT_SPACES[kind], n_samples=int(params["n"]),
                                seed=int(params["seed"]))

        raw = load_cube(params["cube"])
        cube_n = normalize(raw) if raw.norm_stats is None else raw
        X, y, _ = extract_pixel_table(cube_n)

        def objective(hp: dict):
            hyper = {k: (None if k == "max_depth" and v == 0 else v)
                     for k, v in hp.items()}
            return kfold_cv_tabular(TabularModelKind(kind, hyper), X, y,
                                    k=int(params["k"]), seed=int(params["seed"]))

        result = random_search(space, objective, n=int(params["n"]),
                               workers=int(params["workers"]))
        out = Path(params["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        lines = ["trial,hyperparams,fold_scores,mean,std"]
        for t in result.trials:
            folds = ";".join(repr(s) for s in t.fold_scores)
            std = float(np.std(t.fold_scores)) if t.fold_scores else 0.0
            lines.append(f"{t.index},{json.dumps(t.hyperparams, sort_keys=True)!r},"
                         f"\"{folds}\",{t.score!r},{std!r}")
        out.write_text("\n".join(lines) + "\n")
        best = {"hyperparams": result.best.hyperparams, "score": result.best.score,
                "trial": result.best.index}
        (out.parent / "best.json").write_text(json.dumps(best, indent=2, sort_keys=True))
        _write_snapshot(out.parent, "search", params)
        click.echo(f"best trial #{result.best.index}: score {result.best.score:.3f} "
                   f"{result.best.hyperparams}")
    except AgbMapError as exc:
        _fail(exc)


# --- evaluate ----------------------------------------------------------------

@main.command()
@click.option("--artifact", "artifact_path", type=str, required=True)
@click.option("--cube", "cube_path", type=str, required=True)
@click.option("--split", "split_name", type=str, default="validation")
@click.option("--out", "out_path", type=str, default=None)
def evaluate_cmd(artifact_path, cube_path, split_name, out_path):
    """Masked RMSE of an artifact over a cube's supervised pixels."""
    from .cube import load_cube, normalize
    from .evaluation import evaluate
    from .models import load_artifact

    try:
        errors: list[str] = []
        _require(errors, Path(artifact_path).exists(),
                 f"artifact: no such file {artifact_path!r}")
        _require(errors, Path(cube_path).exists(), f"cube: no such file {cube_path!r}")
        _check(errors)
        artifact = load_artifact(artifact_path)
        raw = load_cube(cube_path)
        cube_n = normalize(raw, artifact.norm_stats) if raw.norm_stats is None else raw
        result = evaluate(artifact, cube_n, split_name)
        payload = {"split": split_name, "rmse": result.rmse, "n_pixels": result.n_pixels,
                   "model": artifact.kind, "modality_subset": artifact.modality_subset}
        if out_path:
            out = Path(out_path)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(payload, indent=2, sort_keys=True))
            _write_snapshot(out.parent, "evaluate",
                            {"artifact": artifact_path, "cube": cube_path,
                             "split": split_name, "out": out_path})
        click.echo(f"{split_name} RMSE: {result.rmse:.2f} Mg C/ha over {result.n_pixels} px")
    except AgbMapError as exc:
        _fail(exc)


main.add_command(evaluate_cmd, name="evaluate")


# --- ablate ------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=str, default=None)
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--size", type=int, default=None)
@click.option("--val-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--val-seed", type=int, default=None)
@click.option("--density", type=float, default=None)
@click.option("--gpp-informative/--gpp-uninformative", default=None)
@click.option("--n-runs", type=int, default=None)
@click.option("--models", "models_csv", type=str, default=None,
              help="Comma-separated subset of linear,gbm,rf,unet.")
@click.option("--subsets", "subsets_csv", type=str, default=None)
@click.option("--tile-size", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--base-width", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--patience", type=int, default=None)
@click.option("--workers", type=int, default=None,
              help="Parallel tabular jobs (default $AGBMAP_WORKERS or 1).")
def ablate(config_path, out_dir, size, val_size, seed, val_seed, density,
           gpp_informative, n_runs, models_csv, subsets_csv, tile_size, epochs,
           base_width, lr, batch_size, patience, workers):
    """Full benchmark grid on synthetic scenes: models x subsets x splits."""
    from .evaluation import (AblationConfig, SUBSET_ORDER, ablation, format_report_csv,
                             format_report_table)
    from .pipeline import scene_to_cube
    from .synth import SceneParams, generate_scene
    from .training import TrainConfig

    try:
        params = _resolve(_load_section(config_path, "ablate"),
                          size=size, val_size=val_size, seed=seed, val_seed=val_seed,
                          density=density, gpp_informative=gpp_informative,
                          n_runs=n_runs, models=models_csv, subsets=subsets_csv,
                          tile_size=tile_size, epochs=epochs, base_width=base_width,
                          lr=lr, batch_size=batch_size, patience=patience,
                          workers=workers, out=str(out_dir))
        defaults = dict(size=512, val_size=256, seed=101, val_seed=202, density=4.0,
                        gpp_informative=True, n_runs=3, tile_size=128, epochs=40,
                        base_width=16, lr=1e-2, batch_size=4, patience=8)
        for key, val in defaults.items():
            params.setdefault(key, val)
        params.setdefault("workers", int(os.environ.get("AGBMAP_WORKERS", "1")))

        model_kinds = tuple(_MODEL_ALIASES[m.strip()]
                            for m in str(params.get("models", "linear,gbm,rf,unet")).split(","))
        subsets = tuple(s.strip() for s in str(params.get(
            "subsets", ",".join(SUBSET_ORDER))).split(","))
        errors: list[str] = []
        for s in subsets:
            _require(errors, s in SUBSET_ORDER, f"subsets: unknown subset {s!r}")
        _require(errors, int(params["n_runs"]) >= 1, "n_runs: must be >= 1")
        _check(errors)

        scene_params = SceneParams(
            size=int(params["size"]), seed=int(params["seed"]),
            footprint_density=float(params["density"]),
            gpp_informative=bool(params["gpp_informative"]))
        val_params = SceneParams(
            size=int(params["val_size"]), seed=int(params["val_seed"]),
            footprint_density=float(params["density"]),
            gpp_informative=bool(params["gpp_informative"]))
        click.echo("building scenes and cubes...")
        train_scene = generate_scene(scene_params)
        val_scene = generate_scene(val_params)
        train_cubes = {s: scene_to_cube(train_scene, s)[0] for s in subsets}
        val_cubes = {s: scene_to_cube(val_scene, s)[0] for s in subsets}

        config = AblationConfig(
            model_kinds=model_kinds,
            subsets=subsets,
            n_runs=int(params["n_runs"]),
            seed=int(params["seed"]),
            tile_size=int(params["tile_size"]),
            train=TrainConfig(
                learning_rate=float(params["lr"]),
                batch_size=int(params["batch_size"]),
                max_epochs=int(params["epochs"]),
                patience=int(params["patience"]),
                crop_size=int(params["tile_size"])),
            unet_base_width=int(params["base_width"]),
            workers=int(params["workers"]),
        )

        def progress(model, subset_name, run):
            click.echo(f"  {model:>18} | {subset_name:<9} | run {run + 1}/{params['n_runs']}")

        report = ablation(train_cubes, val_cubes, config, progress=progress)
        out = Path(params["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(format_report_csv(report))
        table = format_report_table(report)
        (out / "report.txt").write_text(table)
        _write_snapshot(out, "ablate", params)
        click.echo(table)
    except AgbMapError as exc:
        _fail(exc)


# --- predict -----------------------------------------------------------------

@main.command()
@click.option("--artifact", "artifact_path", type=str, required=True)
@click.option("--cube", "cube_path", type=str, required=True)
@click.option("--out", "out_path", type=str, required=True)
@click.option("--clamp-negative/--no-clamp-negative", default=True,
              help="Clamp negative biomass to zero at export (default on).")
def predict(artifact_path, cube_path, out_path, clamp_negative):
    """Wall-to-wall prediction map from an artifact and a cube."""
    from .cube import load_cube, normalize
    from .geotiff import write_raster
    from .models import load_artifact, predict_dense
    from .raster import Raster

    try:
        errors: list[str] = []
        _require(errors, Path(artifact_path).exists(),
                 f"artifact: no such file {artifact_path!r}")
        _require(errors, Path(cube_path).exists(), f"cube: no such file {cube_path!r}")
        _check(errors)
        artifact = load_artifact(artifact_path)
        raw = load_cube(cube_path)
        cube_n = normalize(raw, artifact.norm_stats) if raw.norm_stats is None else raw
        dense = predict_dense(artifact, cube_n)
        if clamp_negative:
            data = np.maximum(dense.data, 0.0)
            dense = Raster(dense.grid, dense.channels, data, dense.valid_mask)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_raster(out, dense, metadata={"model": artifact.kind,
                                           "modality_subset": artifact.modality_subset})
        _write_snapshot(out.parent, "predict",
                        {"artifact": artifact_path, "cube": cube_path, "out": out_path,
                         "clamp_negative": clamp_negative})
        click.echo(f"wrote prediction map to {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- zones -------------------------------------------------------------------

@main.command()
@click.option("--prediction", "prediction_path", type=str, required=True)
@click.option("--zones", "zones_path", type=str, required=True)
@click.option("--legend", "legend_path", type=str, default=None,
              help="JSON mapping of integer zone codes to names.")
@click.option("--top-n", type=int, default=6)
@click.option("--out", "out_dir", type=str, required=True)
def zones(prediction_path, zones_path, legend_path, top_n, out_dir):
    """Per-climate-zone distribution summary of a prediction map."""
    from .evaluation import climate_zone_summary, format_zone_csv, zone_boxplot
    from .geotiff import read_raster

    try:
        errors: list[str] = []
        _require(errors, Path(prediction_path).exists(),
                 f"prediction: no such file {prediction_path!r}")
        _require(errors, Path(zones_path).exists(), f"zones: no such file {zones_path!r}")
        if legend_path:
            _require(errors, Path(legend_path).exists(),
                     f"legend: no such file {legend_path!r}")
        _check(errors)
        prediction = read_raster(prediction_path)
        zone_raster = read_raster(zones_path)
        legend = None
        if legend_path:
            legend = {int(k): str(v) for k, v in
                      json.loads(Path(legend_path).read_text()).items()}
        summary = climate_zone_summary(prediction, zone_raster, legend=legend, top_n=top_n)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "zones.csv").write_text(format_zone_csv(summary))
        zone_boxplot(summary, out / "zones.png")
        _write_snapshot(out, "zones",
                        {"prediction": prediction_path, "zones": zones_path,
                         "legend": legend_path, "top_n": top_n, "out": out_dir})
        click.echo(f"summarized {len(summary.rows)} zones "
                   f"({summary.excluded} px excluded) -> {out}")
    except AgbMapError as exc:
        _fail(exc)


# --- wildfire ----------------------------------------------------------------

@main.command()
@click.option("--before", "before_path", type=str, required=True)
@click.option("--after", "after_path", type=str, required=True)
@click.option("--b08", "b08_path", type=str, required=True)
@click.option("--b12", "b12_path", type=str, required=True)
@click.option("--b08-before", "b08_before_path", type=str, default=None)
@click.option("--b12-before", "b12_before_path", type=str, default=None)
@click.option("--use-dnbr", is_flag=True, default=False,
              help="Use pre/post NBR difference instead of post-fire NBR.")
@click.option("--out", "out_dir", type=str, required=True)
def wildfire(before_path, after_path, b08_path, b12_path, b08_before_path,
             b12_before_path, use_dnbr, out_dir):
    """Biomass change vs burn ratio for a fire event; writes maps + report."""
    from .geotiff import read_raster
    from .wildfire import agb_delta, dnbr, impact_report, nbr, save_impact_outputs

    try:
        errors: list[str] = []
        for label, p in (("before", before_path), ("after", after_path),
                         ("b08", b08_path), ("b12", b12_path)):
            _require(errors, Path(p).exists(), f"{label}: no such file {p!r}")
        if use_dnbr:
            _require(errors, bool(b08_before_path and b12_before_path),
                     "use_dnbr: requires --b08-before and --b12-before")
        _check(errors)
        delta = agb_delta(read_raster(after_path), read_raster(before_path))
        if use_dnbr:
            ratio = dnbr(read_raster(b08_before_path), read_raster(b12_before_path),
                         read_raster(b08_path), read_raster(b12_path))
            kind = "dnbr"
        else:
            ratio = nbr(read_raster(b08_path), read_raster(b12_path))
            kind = "post"
        report = impact_report(delta, ratio, nbr_kind=kind)
        out = Path(out_dir)
        save_impact_outputs(report, out)
        _write_snapshot(out, "wildfire",
                        {"before": before_path, "after": after_path, "b08": b08_path,
                         "b12": b12_path, "use_dnbr": use_dnbr, "out": out_dir})
        corr = f"{report.correlation:.3f}" if report.correlation_defined else "undefined"
        click.echo(f"total loss {report.total_loss_mg_c:.0f} Mg C over "
                   f"{report.n_pixels} px; delta-vs-{kind} correlation {corr}")
    except AgbMapError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
