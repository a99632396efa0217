"""Trained-model artifacts: one file holding a JSON header plus a weight blob.

Layout: 8-byte magic, big-endian uint64 header length, UTF-8 JSON header,
then the opaque blob (torch state dict for the UNet, pickle for the tabular
ensembles). The header records everything needed to rebuild and to check
compatibility at prediction time: kind, architecture/hyperparams, channel
normalization statistics, modality subset, seeds, and the loss history.
"""

from __future__ import annotations

import io
import json
import pickle
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch

from .tabular import GradientBoostingModel, LinearRegressionModel, RandomForestModel
from .unet import MaskedUNet, UNetConfig

_MAGIC = b"AGBMODEL"


@dataclass
class ModelArtifact:
    kind: str                       # unet | linear | random_forest | gradient_boosting
    model: Any
    norm_stats: list[tuple[float, float]]
    modality_subset: str
    train_seed: int
    config: dict = field(default_factory=dict)
    training_history: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def predict_rows(self, X) -> "Any":
        if self.kind == "unet":
            raise ValueError("row-wise prediction is only for tabular artifacts")
        return self.model.predict(X)


def save_artifact(path: str | Path, artifact: ModelArtifact) -> None:
    header = {
        "kind": artifact.kind,
        "norm_stats": [[m, s] for m, s in artifact.norm_stats],
        "modality_subset": artifact.modality_subset,
        "train_seed": artifact.train_seed,
        "config": artifact.config,
        "training_history": artifact.training_history,
        "flags": artifact.flags,
        "format_version": 1,
    }
    if artifact.kind == "unet":
        buf = io.BytesIO()
        torch.save(artifact.model.state_dict(), buf)
        blob = buf.getvalue()
    else:
        blob = pickle.dumps(artifact.model)
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(">Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_artifact(path: str | Path) -> ModelArtifact:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a model artifact file")
        (header_len,) = struct.unpack(">Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode())
        blob = fh.read()
    if header["kind"] == "unet":
        cfg = UNetConfig(**header["config"]["unet"])
        model = MaskedUNet(cfg)
        model.load_state_dict(torch.load(io.BytesIO(blob), weights_only=True))
        model.eval()
    else:
        model = pickle.loads(blob)
        expected = {"linear": LinearRegressionModel,
                    "random_forest": RandomForestModel,
                    "gradient_boosting": GradientBoostingModel}[header["kind"]]
        if not isinstance(model, expected):
            raise ValueError(f"blob does not match declared kind {header['kind']}")
    return ModelArtifact(
        kind=header["kind"],
        model=model,
        norm_stats=[(float(m), float(s)) for m, s in header["norm_stats"]],
        modality_subset=header["modality_subset"],
        train_seed=header["train_seed"],
        config=header["config"],
        training_history=header["training_history"],
        flags=header["flags"],
    )
