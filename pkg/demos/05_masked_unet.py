"""
Training the masked UNet
========================

Supervision covers a few tracks of pixels, so the loss is a masked RMSE:
unlabeled pixels contribute nothing, in value or gradient. Tiles are split
90/10, crops are steered to contain supervision, and early stopping watches
the held-out tiles.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from agbmap.cube import SplitSpec, compute_norm_stats, normalize, split
from agbmap.evaluation import evaluate
from agbmap.models import UNetConfig, predict_dense
from agbmap.pipeline import scene_to_cube
from agbmap.synth import SceneParams, generate_scene
from agbmap.training import TrainConfig, train_unet

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

scene = generate_scene(SceneParams(size=192, seed=29, footprint_density=8.0))
cube, _ = scene_to_cube(scene, "SIF/S1/S2")

# tile-unit split: a tile goes wholly to one side
train, test = split(cube, SplitSpec(unit="tile", seed=3, tile_size=48))
within = np.zeros(cube.grid.shape, dtype=bool)
for w in train.windows:
    within[w.row0:w.row0 + w.height, w.col0:w.col0 + w.width] = True
stats = compute_norm_stats(cube, within=within)
train_n, test_n = normalize(train, stats), normalize(test, stats)

cfg = TrainConfig(learning_rate=3e-3, batch_size=8, max_epochs=120,
                  patience=30, crop_size=48, seed=1)
artifact = train_unet(train_n, cfg, test_n,
                      UNetConfig(in_channels=15, depth=4, base_width=8))
history = artifact.training_history
print(f"stopped after {len(history['train_loss'])} epochs, "
      f"best epoch {history['best_epoch']}")
print(f"testing RMSE: {evaluate(artifact, test_n, 'testing').rmse:.2f} Mg C/ha")

dense = predict_dense(artifact, normalize(cube, stats))
err = dense.data[:, :, 0] - scene.true_agb.data[:, :, 0]
print(f"dense-map RMSE vs truth (all pixels): {np.sqrt(np.nanmean(err ** 2)):.2f}")

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
axes[0].plot(history["train_loss"], label="train")
axes[0].plot(history["test_loss"], label="held-out tiles")
axes[0].axvline(history["best_epoch"], color="k", ls=":", label="best epoch")
axes[0].set_xlabel("epoch")
axes[0].set_ylabel("masked RMSE (Mg C/ha)")
axes[0].legend()
axes[1].imshow(scene.true_agb.data[:, :, 0], vmin=0, vmax=300)
axes[1].set_title("truth")
axes[2].imshow(dense.data[:, :, 0], vmin=0, vmax=300)
axes[2].set_title("wall-to-wall prediction")
for ax in axes[1:]:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "05_masked_unet.png", dpi=110)
print(f"figure -> {out_dir / '05_masked_unet.png'}")
