"""Training loop for the masked UNet, plus cross-validation and random search.

The UNet trains on tiles cut from the datacube with joint flip/crop
augmentation; crops are steered to contain at least one supervised pixel so
sparse targets cannot starve a batch of gradient. Early stopping tracks the
held-out tile loss and the best-epoch weights are returned.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .cube import Datacube, SplitSpec
from .errors import DivergedLoss, NoSupervision, TooFewUnits
from .models.artifacts import ModelArtifact
from .models.losses import masked_rmse, masked_rmse_torch
from .models.tabular import TabularModelKind, fit_tabular
from .models.unet import MaskedUNet, UNetConfig
from .raster import Window, extract_window, tile_windows


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    crop_size: int = 512
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    random_crop: bool = True
    seed: int = 0
    n_runs: int = 3

    def __post_init__(self):
        # 0 is allowed: a no-op optimizer is useful for plumbing checks
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if not (0 <= self.hflip_p <= 1 and 0 <= self.vflip_p <= 1):
            raise ValueError("flip probabilities must be in [0, 1]")


def derive_seed(*parts: int) -> int:
    """Stable child seed from (seed, index, ...) tuples."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


# --- augmentation -----------------------------------------------------------

def augment(sample: tuple[np.ndarray, np.ndarray, np.ndarray],
            rng: np.random.Generator, crop_size: int,
            hflip_p: float = 0.5, vflip_p: float = 0.5,
            random_crop: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jointly crop/flip (inputs HxWxC, target HxW, mask HxW).

    The crop window keeps at least one supervised pixel whenever the tile has
    any; tiles smaller than the crop are mirror-padded first.
    """
    x, t, m = sample
    x, t, m = _pad_min_size(x, t, m, crop_size)
    h, w = t.shape
    if random_crop and (h > crop_size or w > crop_size):
        r0, c0 = _pick_crop(m, rng, crop_size)
    else:
        r0, c0 = 0, 0
    x = x[r0:r0 + crop_size, c0:c0 + crop_size, :]
    t = t[r0:r0 + crop_size, c0:c0 + crop_size]
    m = m[r0:r0 + crop_size, c0:c0 + crop_size]
    if rng.random() < hflip_p:
        x, t, m = x[:, ::-1, :], t[:, ::-1], m[:, ::-1]
    if rng.random() < vflip_p:
        x, t, m = x[::-1, :, :], t[::-1, :], m[::-1, :]
    return np.ascontiguousarray(x), np.ascontiguousarray(t), np.ascontiguousarray(m)


def _pad_min_size(x, t, m, size):
    while x.shape[0] < size or x.shape[1] < size:
        pad_y = min(x.shape[0], size - x.shape[0])
        pad_x = min(x.shape[1], size - x.shape[1])
        x = np.pad(x, [(0, pad_y), (0, pad_x), (0, 0)], mode="symmetric")
        t = np.pad(t, [(0, pad_y), (0, pad_x)], mode="symmetric")
        m = np.pad(m, [(0, pad_y), (0, pad_x)], mode="symmetric")
    return x, t, m


def _pick_crop(mask: np.ndarray, rng: np.random.Generator, size: int) -> tuple[int, int]:
    h, w = mask.shape
    max_r = h - size
    max_c = w - size
    has_any = mask.any()
    for _ in range(20):
        r0 = int(rng.integers(0, max_r + 1))
        c0 = int(rng.integers(0, max_c + 1))
        if not has_any or mask[r0:r0 + size, c0:c0 + size].any():
            return r0, c0
    # fall back to a window that covers a randomly chosen supervised pixel
    rows, cols = np.nonzero(mask)
    k = int(rng.integers(0, len(rows)))
    r0 = int(np.clip(rows[k] - size // 2, 0, max_r))
    c0 = int(np.clip(cols[k] - size // 2, 0, max_c))
    return r0, c0


# --- UNet training -----------------------------------------------------------

def _cube_tiles(cube: Datacube, tile_size: int) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Extract (inputs, target, supervised-mask) arrays per window of the cube."""
    from .raster import AGB_CHANNEL, Raster

    windows = cube.windows
    if windows is None:
        windows = tile_windows(cube.grid.height, cube.grid.width, tile_size, tile_size)
    sup_raster = Raster(cube.grid, (AGB_CHANNEL,), cube.supervised_mask.astype(float))
    tiles = []
    for win in windows:
        inp = extract_window(cube.inputs, win)
        x = np.where(inp.valid_mask[:, :, None], inp.data, 0.0)
        tview = extract_window(cube.target, win)
        target = np.nan_to_num(tview.data[:, :, 0], nan=0.0)
        sup = extract_window(sup_raster, win)
        m = (sup.data[:, :, 0] > 0.5) & inp.valid_mask & tview.valid_mask
        tiles.append((x, target, m))
    return tiles


def train_unet(train_cube: Datacube, cfg: TrainConfig,
               test_cube: Datacube | None = None,
               unet_config: UNetConfig | None = None) -> ModelArtifact:
    """Minimize masked RMSE over augmented tile batches; early-stop on test loss."""
    if train_cube.norm_stats is None:
        raise ValueError("train cube must be normalized before training")
    if unet_config is None:
        unet_config = UNetConfig(in_channels=len(train_cube.channels))
    if unet_config.in_channels != len(train_cube.channels):
        raise ValueError("unet_config.in_channels does not match the cube")
    crop = min(cfg.crop_size, _round_down(min(train_cube.grid.shape), unet_config.divisor))
    crop = max(crop, unet_config.divisor)
    if crop % unet_config.divisor:
        raise ValueError(f"crop size {crop} not divisible by {unet_config.divisor}")

    train_tiles = [t for t in _cube_tiles(train_cube, crop) if t[2].any()]
    if not train_tiles:
        raise NoSupervision("no supervised pixels on the training side")
    test_tiles = None
    if test_cube is not None:
        test_tiles = [t for t in _cube_tiles(test_cube, crop) if t[2].any()]
        if not test_tiles:
            test_tiles = None

    # fixed affine output map: the trunk learns near unit scale, predictions
    # stay in Mg C/ha
    sup_values = np.concatenate([t[1][t[2]] for t in train_tiles])
    out_offset = float(sup_values.mean())
    out_scale = float(max(sup_values.std(), 1.0))

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(derive_seed(cfg.seed, 0xA46))
    model = MaskedUNet(unet_config, output_offset=out_offset, output_scale=out_scale)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    history: dict = {"train_loss": [], "test_loss": [], "best_epoch": None}
    best_loss = math.inf
    best_state = copy.deepcopy(model.state_dict())
    since_best = 0

    for epoch in range(cfg.max_epochs):
        model.train()
        order = rng.permutation(len(train_tiles))
        sq_sum = 0.0
        n_sum = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_tiles[i] for i in order[start:start + cfg.batch_size]]
            xs, ts, ms = [], [], []
            for sample in batch:
                x, t, m = augment(sample, rng, crop, cfg.hflip_p, cfg.vflip_p,
                                  cfg.random_crop)
                xs.append(np.moveaxis(x, 2, 0))
                ts.append(t)
                ms.append(m)
            x_t = torch.from_numpy(np.stack(xs)).float()
            t_t = torch.from_numpy(np.stack(ts)).float().unsqueeze(1)
            m_t = torch.from_numpy(np.stack(ms)).unsqueeze(1)
            if not m_t.any():
                continue
            optimizer.zero_grad()
            pred = model(x_t)
            loss = masked_rmse_torch(pred, t_t, m_t)
            if not torch.isfinite(loss):
                raise DivergedLoss(
                    f"loss became non-finite at epoch {epoch} (lr={cfg.learning_rate})")
            loss.backward()
            optimizer.step()
            n = int(m_t.sum())
            sq_sum += float(loss.detach()) ** 2 * n
            n_sum += n
        train_loss = math.sqrt(sq_sum / max(n_sum, 1))
        history["train_loss"].append(train_loss)

        monitor = train_loss
        if test_tiles is not None:
            test_loss = _eval_tiles(model, test_tiles)
            history["test_loss"].append(test_loss)
            monitor = test_loss
        if not math.isfinite(monitor):
            raise DivergedLoss(f"monitored loss non-finite at epoch {epoch}")
        if monitor < best_loss - 1e-12:
            best_loss = monitor
            best_state = copy.deepcopy(model.state_dict())
            history["best_epoch"] = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    model.load_state_dict(best_state)
    model.eval()
    return ModelArtifact(
        kind="unet",
        model=model,
        norm_stats=train_cube.norm_stats,
        modality_subset=train_cube.modality_subset,
        train_seed=cfg.seed,
        config={
            "unet": {
                "in_channels": unet_config.in_channels,
                "depth": unet_config.depth,
                "base_width": unet_config.base_width,
                "norm_layer": unet_config.norm_layer,
                "activation": unet_config.activation,
                "dropout": unet_config.dropout,
            },
            "train": {
                "learning_rate": cfg.learning_rate,
                "batch_size": cfg.batch_size,
                "max_epochs": cfg.max_epochs,
                "patience": cfg.patience,
                "crop_size": crop,
                "seed": cfg.seed,
            },
        },
        training_history=history,
    )


def _round_down(value: int, divisor: int) -> int:
    return max((value // divisor) * divisor, divisor)


def _eval_tiles(model: MaskedUNet, tiles) -> float:
    model.eval()
    sq = 0.0
    n = 0
    with torch.no_grad():
        for x, t, m in tiles:
            xt = torch.from_numpy(np.moveaxis(x, 2, 0)[None]).float()
            pred = model(xt)[0, 0].numpy()
            diff = np.where(m, pred - t, 0.0)
            sq += float((diff * diff).sum())
            n += int(m.sum())
    return math.sqrt(sq / max(n, 1))


def train_tabular_on_cube(kind: TabularModelKind, cube: Datacube, seed: int = 0) -> ModelArtifact:
    """Fit a pixel-wise baseline on the cube's supervised rows."""
    from .models.inference import extract_pixel_table

    if cube.norm_stats is None:
        raise ValueError("cube must be normalized before fitting")
    X, y, _ = extract_pixel_table(cube)
    model = fit_tabular(kind, X, y, seed=seed)
    flags = {}
    if getattr(model, "singular_design", False):
        flags["singular_design"] = True
    return ModelArtifact(
        kind=kind.kind,
        model=model,
        norm_stats=cube.norm_stats,
        modality_subset=cube.modality_subset,
        train_seed=seed,
        config={"hyperparams": dict(kind.hyperparams)},
        training_history={},
        flags=flags,
    )


# --- cross validation ---------------------------------------------------------

@dataclass
class CVResult:
    scores: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))


def kfold_partition(n_units: int, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic near-equal partition of unit indices into k folds."""
    if n_units < k:
        raise TooFewUnits(f"{n_units} units for k={k}")
    order = np.random.default_rng(seed).permutation(n_units)
    return [np.sort(chunk) for chunk in np.array_split(order, k)]


def kfold_cv_tabular(kind: TabularModelKind, X: np.ndarray, y: np.ndarray,
                     k: int = 5, seed: int = 0) -> CVResult:
    """k-fold CV of a pixel-wise model over rows; score is held-out RMSE."""
    folds = kfold_partition(len(y), k, seed)
    scores = []
    for i, held in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(y)), held)
        model = fit_tabular(kind, X[train_idx], y[train_idx],
                            seed=derive_seed(seed, i))
        pred = model.predict(X[held])
        scores.append(masked_rmse(pred, y[held], np.ones(len(held), dtype=bool)))
    return CVResult(scores)


def kfold_cv_unet(cube: Datacube, cfg: TrainConfig, k: int = 5,
                  tile_size: int = 128,
                  unet_config: UNetConfig | None = None) -> CVResult:
    """k-fold CV over supervised tiles for the deep model."""
    windows = tile_windows(cube.grid.height, cube.grid.width, tile_size, tile_size)
    units = [w for w in windows if cube.supervised_mask[
        w.row0:w.row0 + w.height, w.col0:w.col0 + w.width].any()]
    folds = kfold_partition(len(units), k, cfg.seed)
    scores = []
    for i, held in enumerate(folds):
        held_set = set(held.tolist())
        train_windows = [w for j, w in enumerate(units) if j not in held_set]
        test_windows = [units[j] for j in held]
        train_view = _window_view(cube, train_windows)
        test_view = _window_view(cube, test_windows)
        run_cfg = replace(cfg, seed=derive_seed(cfg.seed, i))
        artifact = train_unet(train_view, run_cfg, test_view, unet_config)
        tiles = _cube_tiles(test_view, tile_size)
        scores.append(_eval_tiles(artifact.model, [t for t in tiles if t[2].any()]))
    return CVResult(scores)


def _window_view(cube: Datacube, windows: list[Window]) -> Datacube:
    mask = np.zeros(cube.grid.shape, dtype=bool)
    for w in windows:
        mask[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width] = True
    return replace(cube, target_mask=cube.target_mask & mask, windows=windows)


# --- randomized search ---------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    """Per-hyperparameter distributions: discrete choice lists or log-uniform ranges."""

    params: dict
    n_samples: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.params:
            raise ValueError("search space is empty")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        for name, spec in self.params.items():
            if not ({"choices", "log_uniform"} & set(spec)):
                raise ValueError(f"param {name!r} needs 'choices' or 'log_uniform'")

    def draw(self, trial: int) -> dict:
        rng = np.random.default_rng(derive_seed(self.seed, trial))
        out = {}
        for name, spec in sorted(self.params.items()):
            if "choices" in spec:
                choices = list(spec["choices"])
                out[name] = choices[int(rng.integers(0, len(choices)))]
            else:
                lo, hi = spec["log_uniform"]
                out[name] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        return out


@dataclass
class Trial:
    index: int
    hyperparams: dict
    score: float
    fold_scores: list[float]


@dataclass
class SearchResult:
    best: Trial
    trials: list[Trial]


def random_search(space: SearchSpace, objective, n: int | None = None,
                  workers: int = 1) -> SearchResult:
    """Draw seeded samples, score each, return the argmin (ties: earliest draw).

    Trials are independent jobs; with ``workers > 1`` they run on a thread
    pool, and the log stays ordered by trial index either way.
    """
    n = space.n_samples if n is None else n
    draws = [space.draw(i) for i in range(n)]
    if workers > 1 and n > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(objective, draws))
    else:
        outcomes = [objective(params) for params in draws]
    trials = []
    for i, (params, result) in enumerate(zip(draws, outcomes)):
        if isinstance(result, CVResult):
            trials.append(Trial(i, params, result.mean, list(result.scores)))
        else:
            trials.append(Trial(i, params, float(result), []))
    best = min(trials, key=lambda t: (t.score, t.index))
    return SearchResult(best, trials)
