"""
Uniform entry points for the tolerance harness: both toy generators as
objects with a step count and a seeded `run`.
"""

from dataclasses import dataclass, field

import numpy as np

from .ar import ArGeneration, ToyARModel, ar_generate
from .diffusion import (
  DiffusionSample, DiffusionSchedule, Denoiser, diffusion_sample)


# =============================================================================


@dataclass(eq=False)
class DiscretePipeline:
  """
  Conditional token generation. Greedy decoding (`top_k = 1`) by default, so
  the output depends on the injected noise alone.
  """
  model: ToyARModel
  condition: int = 0
  top_k: int = 1

  @property
  def step_count(self) -> int:
    return self.model.config.length

  def run(self, seed: int) -> ArGeneration:
    return ar_generate(self.model, self.condition, self.top_k, seed)


@dataclass(eq=False)
class ContinuousPipeline:
  denoiser: Denoiser
  schedule: DiffusionSchedule = field(
    default_factory=lambda: DiffusionSchedule(50))
  num_points: int = 16
  dim: int = 2

  @property
  def step_count(self) -> int:
    return self.schedule.steps

  def run(self, seed: int) -> DiffusionSample:
    return diffusion_sample(self.denoiser, self.schedule, seed,
                            self.num_points, self.dim)


def final_output(result: ArGeneration | DiffusionSample) -> np.ndarray:
  if isinstance(result, ArGeneration):
    return result.tokens
  return result.x0
