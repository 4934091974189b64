"""
Channel-wise equivalent transformation of an affine layer.

Weights are laid out `(out_features, in_features)` and the layer computes
`y = x @ w.T + bias`. Dividing each input channel by `s` after removing
`delta`, and folding both into the weights and bias, leaves `y` unchanged:

  x' = (x - delta) / s
  w' = w * s
  b' = bias + w @ delta
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..effects import ValueSyntax
from ..errors import InvalidSpec, NonPositiveScale


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class EquivTransform(ValueSyntax):
  scale: np.ndarray
  shift: np.ndarray

  def __post_init__(self):
    if self.scale.ndim != 1 or self.scale.shape != self.shift.shape:
      raise InvalidSpec("scale and shift must be vectors of equal length")
    if not np.all(self.scale > 0):
      raise NonPositiveScale("channel scales must be positive")

  @classmethod
  def identity(cls, channels: int) -> "EquivTransform":
    return cls(np.ones(channels), np.zeros(channels))

  def __len__(self) -> int:
    return self.scale.size


def equivalent_transform(
  x: ArrayLike, w: ArrayLike, bias: ArrayLike, t: EquivTransform
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  x = np.atleast_2d(np.asarray(x, dtype=np.float64))
  w = np.atleast_2d(np.asarray(w, dtype=np.float64))
  bias = np.asarray(bias, dtype=np.float64)
  if x.shape[1] != w.shape[1] or w.shape[1] != len(t):
    raise InvalidSpec(
      f"channel mismatch: x {x.shape}, w {w.shape}, transform {len(t)}")
  if bias.shape != (w.shape[0],):
    raise InvalidSpec(f"bias must have {w.shape[0]} entries")
  return ((x - t.shift) / t.scale,
          w * t.scale[None, :],
          bias + w @ t.shift)
