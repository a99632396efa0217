"""Benchmark reporting: RMSE grids over models x input subsets x splits, and
climate-zone consistency summaries of a prediction map."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .cube import Datacube, SplitSpec, compute_norm_stats, normalize, split
from .errors import EmptySplit, GridMismatch
from .models import TabularModelKind, extract_pixel_table, masked_rmse, predict_dense
from .models.artifacts import ModelArtifact
from .models.unet import UNetConfig
from .raster import Raster
from .training import TrainConfig, derive_seed, train_tabular_on_cube, train_unet

MODEL_ORDER = ("linear", "gradient_boosting", "random_forest", "unet")
SUBSET_ORDER = ("SIF/S1/S2", "S1/S2", "S2-only")
SPLIT_ORDER = ("testing", "validation")

MODEL_LABELS = {
    "linear": "Linear Regressor",
    "gradient_boosting": "Gradient Boosting",
    "random_forest": "RF",
    "unet": "UNet",
}


@dataclass(frozen=True)
class EvalRow:
    model_kind: str
    modality_subset: str
    split: str
    rmse_mean: float
    rmse_std: float
    n_runs: int
    n_pixels: int

    def __post_init__(self):
        if self.rmse_mean < 0 or self.rmse_std < 0:
            raise ValueError("rmse must be >= 0")
        if self.n_runs == 1 and self.rmse_std != 0.0:
            raise ValueError("single-run rows must have zero std")


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def lookup(self, model_kind: str, modality_subset: str, split: str) -> EvalRow:
        for row in self.rows:
            if (row.model_kind, row.modality_subset, row.split) == \
                    (model_kind, modality_subset, split):
                return row
        raise KeyError((model_kind, modality_subset, split))


@dataclass
class EvalResult:
    rmse: float
    n_pixels: int
    split: str


def evaluate(artifact: ModelArtifact, cube: Datacube, split_name: str = "testing") -> EvalResult:
    """Masked RMSE of the artifact over the cube view's supervised pixels."""
    sup = cube.supervised_mask
    n = int(sup.sum())
    if n == 0:
        raise EmptySplit(f"split {split_name!r} has no supervised pixels")
    if artifact.kind == "unet":
        dense = predict_dense(artifact, cube)
        rmse = masked_rmse(dense.data[:, :, 0], cube.target.data[:, :, 0],
                           sup & dense.valid_mask)
    else:
        X, y, _ = extract_pixel_table(cube)
        pred = artifact.model.predict(X)
        rmse = masked_rmse(pred, y, np.ones(len(y), dtype=bool))
    return EvalResult(rmse=rmse, n_pixels=n, split=split_name)


DEFAULT_TABULAR_PARAMS: dict[str, dict] = {
    "linear": {},
    "random_forest": {"n_trees": 200},
    "gradient_boosting": {"n_trees": 200, "learning_rate": 0.1, "max_depth": 4},
}


@dataclass
class AblationConfig:
    """Everything the Table-1-style harness needs besides the cubes."""

    model_kinds: tuple[str, ...] = MODEL_ORDER
    subsets: tuple[str, ...] = SUBSET_ORDER
    n_runs: int = 3
    seed: int = 0
    split_seed: int = 17
    tile_size: int = 128
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        learning_rate=1e-2, batch_size=4, max_epochs=40, patience=8, crop_size=128))
    unet_base_width: int = 16
    unet_depth: int = 4
    tabular_params: dict = field(default_factory=lambda: dict(DEFAULT_TABULAR_PARAMS))
    workers: int = 1


def ablation(train_cubes: dict[str, Datacube], val_cubes: dict[str, Datacube],
             config: AblationConfig = AblationConfig(),
             progress=None, details: dict | None = None) -> EvalReport:
    """Train every (model, subset) cell over seeded runs; report mean +/- std.

    ``train_cubes`` / ``val_cubes`` map modality subset -> raw (unnormalized)
    cube; the validation cube is a geographically separate site and is scaled
    with the training cube's statistics, never its own. Tabular cells may run
    on a thread pool (``workers``); the deep model trains sequentially because
    its global RNG cannot be shared. Row order is fixed regardless of
    completion order.
    """
    cells = [(m, s) for m in config.model_kinds for s in config.subsets]
    results: dict[tuple[str, str], list[EvalRow]] = {}

    tabular = [(m, s) for m, s in cells if m != "unet"]
    if config.workers > 1 and len(tabular) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                pool.submit(_run_cell, m, train_cubes[s], val_cubes[s], config, progress,
                            details):
                (m, s) for m, s in tabular}
            for future, cell in futures.items():
                results[cell] = future.result()
    else:
        for m, s in tabular:
            results[(m, s)] = _run_cell(m, train_cubes[s], val_cubes[s], config, progress,
                                        details)
    for m, s in cells:
        if m == "unet":
            results[(m, s)] = _run_cell(m, train_cubes[s], val_cubes[s], config, progress,
                                        details)

    rows = []
    for cell in cells:
        rows.extend(results[cell])
    return EvalReport(rows)


def _run_cell(model_kind: str, raw_train: Datacube, raw_val: Datacube,
              config: AblationConfig, progress=None,
              details: dict | None = None) -> list[EvalRow]:
    unit = "tile" if model_kind == "unet" else "pixel"
    spec = SplitSpec(unit=unit, seed=config.split_seed, tile_size=config.tile_size)
    train_view, test_view = split(raw_train, spec)
    within = _train_region(train_view)
    stats = compute_norm_stats(raw_train, within=within)
    train_n = normalize(train_view, stats)
    test_n = normalize(test_view, stats)
    val_n = normalize(raw_val, stats)

    scores = {"testing": [], "validation": []}
    n_pixels = {"testing": 0, "validation": 0}
    for run in range(config.n_runs):
        run_seed = derive_seed(config.seed, _model_index(model_kind), run)
        if model_kind == "unet":
            cfg = replace(config.train, seed=run_seed)
            unet_cfg = UNetConfig(in_channels=len(train_n.channels),
                                  depth=config.unet_depth,
                                  base_width=config.unet_base_width)
            artifact = train_unet(train_n, cfg, test_n, unet_cfg)
        else:
            kind = TabularModelKind(model_kind, dict(config.tabular_params[model_kind]))
            artifact = train_tabular_on_cube(kind, train_n, seed=run_seed)
        for split_name, cube in (("testing", test_n), ("validation", val_n)):
            result = evaluate(artifact, cube, split_name)
            scores[split_name].append(result.rmse)
            n_pixels[split_name] = result.n_pixels
        if progress is not None:
            progress(model_kind, train_n.modality_subset, run)

    if details is not None:
        for split_name in SPLIT_ORDER:
            details[(model_kind, train_n.modality_subset, split_name)] = \
                list(scores[split_name])
    rows = []
    for split_name in SPLIT_ORDER:
        vals = np.array(scores[split_name])
        rows.append(EvalRow(
            model_kind=model_kind,
            modality_subset=train_n.modality_subset,
            split=split_name,
            rmse_mean=float(vals.mean()),
            rmse_std=float(vals.std()) if config.n_runs > 1 else 0.0,
            n_runs=config.n_runs,
            n_pixels=n_pixels[split_name],
        ))
    return rows


def _train_region(train_view: Datacube) -> np.ndarray | None:
    if train_view.windows is None:
        return None
    mask = np.zeros(train_view.grid.shape, dtype=bool)
    for w in train_view.windows:
        mask[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width] = True
    return mask


def _model_index(kind: str) -> int:
    return MODEL_ORDER.index(kind)


# --- report serialization ---------------------------------------------------

_CSV_FIELDS = ("model", "inputs", "split", "rmse_mean", "rmse_std", "n_runs", "n_pixels")


def format_report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for row in report.rows:
        writer.writerow([row.model_kind, row.modality_subset, row.split,
                         repr(row.rmse_mean), repr(row.rmse_std),
                         row.n_runs, row.n_pixels])
    return buf.getvalue()


def parse_report_csv(text: str) -> EvalReport:
    rows = []
    for record in csv.DictReader(io.StringIO(text)):
        rows.append(EvalRow(
            model_kind=record["model"],
            modality_subset=record["inputs"],
            split=record["split"],
            rmse_mean=float(record["rmse_mean"]),
            rmse_std=float(record["rmse_std"]),
            n_runs=int(record["n_runs"]),
            n_pixels=int(record["n_pixels"]),
        ))
    return EvalReport(rows)


def format_report_table(report: EvalReport) -> str:
    """Fixed-width table: one row per model x input subset, split columns."""
    lines = ["Evaluation RMSE (Mg C/ha)"]
    header = f"{'Model':<20}{'Inputs':<12}{'Testing':<20}{'Validation':<20}"
    lines.append(header)
    lines.append("-" * len(header))
    pairs = []
    for row in report.rows:
        key = (row.model_kind, row.modality_subset)
        if key not in pairs:
            pairs.append(key)
    for model_kind, subset in pairs:
        cells = []
        for split_name in SPLIT_ORDER:
            try:
                row = report.lookup(model_kind, subset, split_name)
                cells.append(f"{row.rmse_mean:.2f} ± {row.rmse_std:.2f}")
            except KeyError:
                cells.append("-")
        label = MODEL_LABELS.get(model_kind, model_kind)
        lines.append(f"{label:<20}{subset:<12}{cells[0]:<20}{cells[1]:<20}")
    return "\n".join(lines) + "\n"


# --- climate-zone consistency ------------------------------------------------

QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class ZoneRow:
    zone: str
    count: int
    quantiles: tuple[float, float, float, float, float]  # p5, p25, p50, p75, p95

    def __post_init__(self):
        if any(b < a for a, b in zip(self.quantiles, self.quantiles[1:])):
            raise ValueError("quantiles must be non-decreasing")


@dataclass
class ZoneSummary:
    rows: list[ZoneRow]
    excluded: int      # valid predictions outside the top-n zones or unclassified
    total_valid: int


def climate_zone_summary(prediction: Raster, zones: Raster,
                         legend: dict[int, str] | None = None,
                         top_n: int = 6) -> ZoneSummary:
    """Prediction quantiles per zone, for the top-n zones by valid-pixel area."""
    if not prediction.grid.same_geometry(zones.grid):
        raise GridMismatch("prediction and zone rasters must share one grid")
    valid = prediction.valid_mask
    classified = valid & zones.valid_mask
    codes = zones.data[:, :, 0]
    total_valid = int(valid.sum())

    zone_ids, counts = np.unique(codes[classified].astype(int), return_counts=True)
    order = np.argsort(-counts, kind="stable")
    keep = [int(zone_ids[i]) for i in order[:top_n]]

    rows = []
    kept_total = 0
    for zone_id in keep:
        sel = classified & (codes == zone_id)
        vals = prediction.data[sel, 0]
        q = tuple(float(v) for v in np.quantile(vals, QUANTILE_LEVELS))
        name = legend.get(zone_id, f"zone{zone_id}") if legend else f"zone{zone_id}"
        rows.append(ZoneRow(zone=name, count=int(sel.sum()), quantiles=q))
        kept_total += int(sel.sum())
    return ZoneSummary(rows=rows, excluded=total_valid - kept_total,
                       total_valid=total_valid)


def format_zone_csv(summary: ZoneSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["zone", "count", "p5", "p25", "p50", "p75", "p95"])
    for row in summary.rows:
        writer.writerow([row.zone, row.count] + [repr(q) for q in row.quantiles])
    writer.writerow(["__excluded__", summary.excluded, "", "", "", "", ""])
    return buf.getvalue()


def zone_boxplot(summary: ZoneSummary, path) -> None:
    """Box-style figure of prediction spread per climate zone."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(1.6 * max(len(summary.rows), 2), 4.5))
    stats = []
    for row in summary.rows:
        p5, p25, p50, p75, p95 = row.quantiles
        stats.append({"whislo": p5, "q1": p25, "med": p50, "q3": p75,
                      "whishi": p95, "label": row.zone, "fliers": []})
    ax.bxp(stats, showfliers=False)
    ax.set_ylabel("Predicted AGB (Mg C/ha)")
    ax.set_title("AGB estimates across climate zones")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
