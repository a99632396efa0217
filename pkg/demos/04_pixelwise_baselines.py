"""
Pixel-wise baselines
====================

The benchmark models treat every supervised pixel as an independent row:
ordinary least squares, a random forest, and gradient-boosted trees. Each
fits in seconds and predicts a full wall-to-wall map.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from agbmap.cube import SplitSpec, normalize, split
from agbmap.evaluation import evaluate
from agbmap.models import predict_dense, TabularModelKind
from agbmap.pipeline import scene_to_cube
from agbmap.synth import SceneParams, generate_scene
from agbmap.training import train_tabular_on_cube

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

scene = generate_scene(SceneParams(size=192, seed=23, footprint_density=8.0))
cube, _ = scene_to_cube(scene, "SIF/S1/S2")
train, test = split(cube, SplitSpec(unit="pixel", seed=5))
train_n = normalize(train)
test_n = normalize(test, train_n.norm_stats)

artifacts = {}
for name, params in [("linear", {}),
                     ("random_forest", {"n_trees": 200}),
                     ("gradient_boosting", {"n_trees": 200, "max_depth": 4})]:
    artifact = train_tabular_on_cube(TabularModelKind(name, params), train_n, seed=1)
    result = evaluate(artifact, test_n, "testing")
    artifacts[name] = artifact
    print(f"{name:>18}: testing RMSE {result.rmse:6.2f} Mg C/ha over {result.n_pixels} px")

fig, axes = plt.subplots(1, 4, figsize=(16, 4))
axes[0].imshow(scene.true_agb.data[:, :, 0], vmin=0, vmax=300)
axes[0].set_title("truth")
for ax, (name, artifact) in zip(axes[1:], artifacts.items()):
    dense = predict_dense(artifact, train_n)
    ax.imshow(dense.data[:, :, 0], vmin=0, vmax=300)
    ax.set_title(name)
for ax in axes:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "04_baselines.png", dpi=110)
print(f"figure -> {out_dir / '04_baselines.png'}")
