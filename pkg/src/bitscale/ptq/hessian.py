"""
Layer-wise Hessian of the squared reconstruction error and the proxy loss it
induces on weight perturbations.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from ..effects import ValueSyntax
from ..errors import EmptyCalibration, InvalidSpec, LengthMismatch


logger = logging.getLogger(__name__)


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class HessianEstimate(ValueSyntax):
  """
  Attributes
  ----------

  h: np.ndarray
    `2 X^T X / n` over `n` calibration rows, shape `(cols, cols)`.

  damping: float
    Added to the diagonal before any factorization; `h` itself is stored
    undamped.
  """
  h: np.ndarray
  damping: float
  sample_count: int

  def __post_init__(self):
    if self.h.ndim != 2 or self.h.shape[0] != self.h.shape[1]:
      raise InvalidSpec("Hessian must be square")
    if self.damping < 0:
      raise InvalidSpec("damping must be non-negative")
    if not np.allclose(self.h, self.h.T, rtol=0, atol=1e-10):
      raise InvalidSpec("Hessian must be symmetric")

  @property
  def dim(self) -> int:
    return self.h.shape[0]

  @property
  def damped(self) -> np.ndarray:
    return self.h + self.damping * np.eye(self.dim)

  @classmethod
  def identity(cls, dim: int) -> "HessianEstimate":
    return cls(np.eye(dim), 0.0, 0)

  def redamped(self, factor: float) -> "HessianEstimate":
    """
    Same estimate with the damping multiplied by `factor`.
    """
    base = self.damping if self.damping > 0 else 1e-8
    return HessianEstimate(self.h, base * factor, self.sample_count)


def estimate_hessian(
  calib_x: ArrayLike, lambda_rel: float = 0.01
) -> HessianEstimate:
  x = np.asarray(calib_x, dtype=np.float64)
  if x.ndim != 2 or x.shape[0] == 0:
    raise EmptyCalibration("calibration data needs at least one row")
  if lambda_rel < 0:
    raise InvalidSpec("lambda_rel must be non-negative")
  n = x.shape[0]
  h = 2.0 * (x.T @ x) / n
  h = (h + h.T) / 2
  mean_diag = float(np.mean(np.diag(h)))
  damping = lambda_rel * (mean_diag if mean_diag > 0 else 1.0)
  logger.debug("hessian over %d rows, damping %.3g", n, damping)
  return HessianEstimate(h, damping, n)


def proxy_loss(w: ArrayLike, w_hat: ArrayLike, h: HessianEstimate) -> float:
  """
  `tr(D (h + damping I) D^T)` with `D = w - w_hat`.
  """
  delta = np.atleast_2d(np.asarray(w, dtype=np.float64)) \
    - np.atleast_2d(np.asarray(w_hat, dtype=np.float64))
  if delta.shape[1] != h.dim:
    raise LengthMismatch(
      f"weights have {delta.shape[1]} columns, Hessian is {h.dim}x{h.dim}")
  return float(max(0.0, np.einsum("ij,jk,ik->", delta, h.damped, delta)))
