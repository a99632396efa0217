"""
Climate-zone consistency check
==============================

A quick sanity check on any prediction map: summarize its distribution per
climate zone and confirm the spread looks physically plausible (arid zones
low, humid temperate zones high).
"""

from pathlib import Path

import numpy as np

from agbmap.evaluation import climate_zone_summary, format_zone_csv, zone_boxplot
from agbmap.raster import Raster, ZONE_CHANNEL
from agbmap.synth import SceneParams, generate_scene

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

scene = generate_scene(SceneParams(size=192, seed=37))
truth = scene.true_agb

# a toy zone map keyed off the biomass level itself: dry zones where biomass
# is low, humid zones where it is high (enough to exercise the summary)
agb = truth.data[:, :, 0]
codes = np.digitize(agb, np.quantile(agb, [0.18, 0.38, 0.58, 0.78, 0.92])) + 1.0
zones = Raster(truth.grid, (ZONE_CHANNEL,), codes)
legend = {1: "BWh", 2: "BSk", 3: "Csb", 4: "Cfa", 5: "Dfa", 6: "Dfb"}

summary = climate_zone_summary(truth, zones, legend=legend, top_n=6)
print(format_zone_csv(summary))
zone_boxplot(summary, out_dir / "07_zones.png")
print(f"figure -> {out_dir / '07_zones.png'}")
