"""
Effect syntax for the two-phase generation step shared by both toy pipelines.

Every generation step is split into feature extraction (the network output:
a hidden code for the autoregressive model, predicted noise for the denoiser)
and representation-space reconstruction (codebook lookup, or the diffusion
update). Pipelines announce both phases through the operations below; each
has an identity or no-op default, so a pipeline runs unchanged when no
handler is installed. The tolerance harness installs runners that perturb
features or record what passes through.
"""

import numpy as np
import torch
from effectful.ops.syntax import defop

from .algebra import EffectSignature


# =============================================================================


class PipelineHooks(EffectSignature):
  """
  Effect syntax for observing and perturbing a multi-step generator.
  """
  # pylint: disable=no-self-argument


class StepHooks(PipelineHooks):
  # pylint: disable=no-self-argument

  @defop
  def begin_step(step: int) -> None:
    """
    Announce that generation step `step` (0-based, in sampling order) starts.
    """
    return None


class FeatureHooks(PipelineHooks):
  # pylint: disable=no-self-argument

  @defop
  def feature(step: int, value: np.ndarray) -> np.ndarray:
    """
    Output of the feature-extraction phase of `step`. Handlers may return a
    perturbed copy, which the pipeline then reconstructs from.
    """
    return value

  @defop
  def reconstruction(step: int, value: np.ndarray) -> np.ndarray:
    """
    Representation produced by the reconstruction phase of `step`.
    """
    return value


class ObservationHooks(PipelineHooks):
  # pylint: disable=no-self-argument

  @defop
  def activation(layer: str, value: torch.Tensor) -> None:
    """
    Output of a named linear layer for the position computed in the current
    step.
    """
    return None
