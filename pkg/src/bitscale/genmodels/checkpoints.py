"""
JSON checkpoints for the toy models.

A checkpoint is one JSON object:

  {"kind": "ar" | "denoiser",
   "config": {...},
   "codebook": [[...], ...],          (ar only)
   "tensors": {name: {"shape": [...], "data": [flat values]}}}

Floats are written with `repr` precision, so loading restores the model
bit for bit.
"""

import json
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import torch
from torch import nn

from ..errors import InvalidSpec
from .ar import ArConfig, ToyARModel
from .codebook import Codebook
from .diffusion import DenoiserConfig, ToyDenoiser


logger = logging.getLogger(__name__)


# =============================================================================


def _tensors(model: nn.Module) -> Dict[str, dict]:
  out = {}
  for (name, t) in model.state_dict().items():
    a = t.detach().cpu().numpy()
    out[name] = {"shape": list(a.shape), "data": a.ravel().tolist()}
  return out


def save_checkpoint(model: nn.Module, path: str | Path) -> Path:
  if isinstance(model, ToyARModel):
    doc = {"kind": "ar", "config": model.config.record(),
           "codebook": model.codebook.centroids.tolist()}
  elif isinstance(model, ToyDenoiser):
    doc = {"kind": "denoiser", "config": model.config.record()}
  else:
    raise InvalidSpec(f"cannot checkpoint {type(model).__name__}")
  doc["tensors"] = _tensors(model)
  path = Path(path)
  path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
  logger.info("wrote checkpoint %s", path)
  return path


def load_checkpoint(path: str | Path) -> ToyARModel | ToyDenoiser:
  doc = json.loads(Path(path).read_text(encoding="utf-8"))
  kind = doc.get("kind")
  if kind == "ar":
    model = ToyARModel(ArConfig(**doc["config"]),
                       Codebook(np.array(doc["codebook"]))).double()
  elif kind == "denoiser":
    model = ToyDenoiser(DenoiserConfig(**doc["config"])).double()
  else:
    raise InvalidSpec(f"unknown checkpoint kind {kind!r}")
  state = {
    name: torch.tensor(np.array(v["data"], dtype=np.float64)
                       .reshape(v["shape"]))
    for (name, v) in doc["tensors"].items()}
  model.load_state_dict(state)
  model.eval()
  return model
