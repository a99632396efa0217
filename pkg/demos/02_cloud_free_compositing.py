"""
Near-cloud-free compositing
===========================

Optical scenes arrive with cloud decks. The scene-classification layer says
which pixels to trust; the per-pixel median over trusted observations gives
a near-cloud-free composite. The photosynthesis proxy instead gets a plain
summertime average restricted to a date window.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from agbmap.compositing import SUMMER_WINDOW_2021, cloud_mask, median_composite, temporal_mean
from agbmap.raster import ChannelId
from agbmap.synth import SceneParams, generate_scene

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

scene = generate_scene(SceneParams(size=192, seed=11, cloud_fraction=0.35))
B08 = ChannelId("S2", "B08")

# each timestamp has its own cloud deck...
usable_any = np.zeros(scene.grid.shape, dtype=bool)
for scl in scene.s2.scl:
    usable_any |= cloud_mask(scl)
print(f"pixels usable in at least one scene: {usable_any.mean():.4f}")

# ...and the median over usable observations removes them
composite = median_composite(scene.s2)
print(f"composite fully valid: {bool(composite.valid_mask.all())}")

# the photosynthesis series includes shoulder-season scenes that the
# summertime window drops before averaging
gpp = temporal_mean(scene.sif, SUMMER_WINDOW_2021)

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
axes[0].imshow(scene.s2.scenes[0].band(B08))
axes[0].set_title("single scene (cloudy)")
axes[1].imshow(composite.band(B08))
axes[1].set_title("median composite")
axes[2].imshow(gpp.data[:, :, 0])
axes[2].set_title("summertime-mean GPP (coarse grid)")
for ax in axes:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "02_composite.png", dpi=110)
print(f"figure -> {out_dir / '02_composite.png'}")
