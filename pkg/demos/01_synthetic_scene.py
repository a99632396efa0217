"""
A synthetic landscape with known biomass
========================================

Every capability in this package can be exercised without real satellite
archives: `agbmap.synth` builds a landscape whose aboveground biomass (AGB)
is known exactly, then derives radar, optical, and photosynthesis channels
from it with controllable noise and cloud cover.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from agbmap.raster import ChannelId
from agbmap.synth import SceneParams, generate_scene

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# A 192x192 scene of 30 m pixels. The seed fixes everything: the biomass
# field, the channel noise, the cloud decks, even the footprint tracks.
params = SceneParams(size=192, seed=7, cloud_fraction=0.3)
scene = generate_scene(params)

truth = scene.true_agb.data[:, :, 0]
b08 = scene.s2.scenes[0].band(ChannelId("S2", "B08"))   # near-infrared role
b04 = scene.s2.scenes[0].band(ChannelId("S2", "B04"))   # red role
scl = scene.s2.scl[0].data[:, :, 0]                     # scene classification

fig, axes = plt.subplots(2, 2, figsize=(9, 8))
for ax, img, title in [
    (axes[0, 0], truth, "true AGB (Mg C/ha)"),
    (axes[0, 1], b08, "B08 with clouds (t=0)"),
    (axes[1, 0], b04, "B04 with clouds (t=0)"),
    (axes[1, 1], scl, "SCL codes (9 = cloud)"),
]:
    im = ax.imshow(img)
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig(out_dir / "01_scene.png", dpi=110)
print(f"radar grid: {scene.s1.scenes[0].grid.shape} at "
      f"{scene.s1.scenes[0].grid.pixel_size_x:.0f} m")
print(f"photosynthesis grid: {scene.sif.scenes[0].grid.shape} at "
      f"{scene.sif.scenes[0].grid.pixel_size_x:.0f} m")
print(f"figure -> {out_dir / '01_scene.png'}")
