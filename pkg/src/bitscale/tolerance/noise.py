"""
SNR-controlled Gaussian perturbation of pipeline features.

The signal power is the mean square of the feature being perturbed, so

  snr_db = 10 log10(P_signal / P_noise)

holds per injection. `snr_db = inf` means no noise.
"""

import math
from dataclasses import dataclass
from typing import FrozenSet

import numpy as np

from ..effects import ValueSyntax, FeatureHooks
from ..errors import InvalidSpec, ZeroSignal
from ..numerics import RngStream, gaussian
from ..runners import Runner


# =============================================================================


@dataclass(frozen=True, slots=True)
class NoiseSpec(ValueSyntax):
  snr_db: float
  injection_steps: FrozenSet[int]
  seed: int = 0

  def __post_init__(self):
    if math.isnan(self.snr_db):
      raise InvalidSpec("snr_db must not be NaN")
    object.__setattr__(self, "injection_steps",
                       frozenset(int(s) for s in self.injection_steps))

  def check(self, step_count: int) -> "NoiseSpec":
    if any(not 0 <= s < step_count for s in self.injection_steps):
      raise InvalidSpec(f"injection steps outside [0, {step_count})")
    return self


def inject_noise(
  feature: np.ndarray, snr_db: float, stream: RngStream
) -> np.ndarray:
  f = np.asarray(feature, dtype=np.float64)
  if math.isinf(snr_db) and snr_db > 0:
    return np.array(f)
  p_signal = float(np.mean(f * f))
  if p_signal == 0:
    raise ZeroSignal("cannot set an SNR against an all-zero feature")
  p_noise = p_signal / 10 ** (snr_db / 10)
  return f + math.sqrt(p_noise) * gaussian(stream, f.size).reshape(f.shape)


class NoiseInjector(Runner):
  """
  Perturb the feature of every step in `spec.injection_steps`. Each step
  draws from its own child of the seed's stream, so a step's noise
  direction does not depend on which other steps are perturbed or on the
  SNR.
  """

  signature = FeatureHooks

  def __init__(self, spec: NoiseSpec, label: int = 0):
    self.spec = spec
    self.stream = RngStream(spec.seed).derive(0x401, label)

  def feature(self, step: int, value: np.ndarray) -> np.ndarray:
    if step not in self.spec.injection_steps:
      return value
    return inject_noise(value, self.spec.snr_db, self.stream.derive(step))
