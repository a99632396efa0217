"""Dense biomass mapping from sparse footprints: compositing, datacubes,
masked UNet + pixel-wise baselines, evaluation, and wildfire impact tools."""

__version__ = "0.1.0"
