from .artifacts import ModelArtifact, load_artifact, save_artifact
from .inference import extract_pixel_table, predict_dense
from .losses import masked_rmse, masked_rmse_torch
from .tabular import (
    GradientBoostingModel,
    LinearRegressionModel,
    RandomForestModel,
    TabularModelKind,
    fit_tabular,
)
from .unet import MaskedUNet, UNetConfig, unet_forward

MODEL_KINDS = ("linear", "gradient_boosting", "random_forest", "unet")

__all__ = [
    "GradientBoostingModel",
    "LinearRegressionModel",
    "MaskedUNet",
    "MODEL_KINDS",
    "ModelArtifact",
    "RandomForestModel",
    "TabularModelKind",
    "UNetConfig",
    "extract_pixel_table",
    "fit_tabular",
    "load_artifact",
    "masked_rmse",
    "masked_rmse_torch",
    "predict_dense",
    "save_artifact",
    "unet_forward",
]
