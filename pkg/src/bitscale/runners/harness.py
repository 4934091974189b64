"""
Runners that observe a pipeline while it generates.
"""

from typing import Dict, List, NamedTuple, Tuple

import numpy as np
import torch

from ..effects import PipelineHooks, FeatureHooks
from .algebra import Runner


# =============================================================================


class ReconstructionTracer(Runner):
  """
  Keep a copy of every reconstruction, in step order.
  """

  signature = FeatureHooks

  def __init__(self):
    self.steps: List[int] = []
    self.values: List[np.ndarray] = []

  def reconstruction(self, step: int, value: np.ndarray) -> np.ndarray:
    self.steps.append(step)
    self.values.append(np.array(value, dtype=np.float64))
    return value

  def trajectory(self) -> np.ndarray:
    """
    Reconstructions stacked along a leading step axis.
    """
    return np.stack(self.values)


class ActivationStats(NamedTuple):
  minimum: float
  maximum: float
  mean: float
  variance: float


class ActivationRecorder(Runner):
  """
  Summary statistics of every announced activation, keyed by layer name and
  the step announced last by `begin_step`.
  """

  signature = PipelineHooks

  def __init__(self):
    self.current = -1
    self.stats: Dict[Tuple[str, int], ActivationStats] = {}

  def begin_step(self, step: int) -> None:
    self.current = step

  def activation(self, layer: str, value: torch.Tensor) -> None:
    a = value.detach().cpu().numpy().astype(np.float64)
    self.stats[(layer, self.current)] = ActivationStats(
      float(a.min()), float(a.max()), float(a.mean()), float(a.var()))

  @property
  def layers(self) -> List[str]:
    return sorted({layer for (layer, _) in self.stats})
