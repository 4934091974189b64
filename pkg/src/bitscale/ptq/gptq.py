"""
Round-to-nearest baseline and Hessian-compensated column-by-column
quantization.

Columns are quantized in order on a grid fixed up front by
`calibrate_uniform` on the original weights. After each column the rounding
error, scaled by the upper Cholesky factor `U` of `(h + damping I)^-1`, is
subtracted from every column not yet quantized. Inside a block the update is
applied immediately; updates to columns beyond the block are deferred until
the block completes and then applied column by column in the same order, so
the result does not depend on the block size.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..effects import ValueSyntax
from ..errors import InvalidSpec, LengthMismatch
from ..numerics import cholesky, spd_inverse
from ..quant import QuantSpec, calibrate_uniform, fake_quant, fake_quant_values
from .hessian import HessianEstimate, proxy_loss


logger = logging.getLogger(__name__)


# =============================================================================


@dataclass(frozen=True, slots=True)
class GptqConfig(ValueSyntax):
  spec: QuantSpec = field(default_factory=lambda: QuantSpec.integer(4))
  block_size: int = 128
  act_order: bool = False

  def __post_init__(self):
    if self.block_size < 1:
      raise InvalidSpec("block_size must be at least 1")


def rtn(w: ArrayLike, spec: QuantSpec) -> np.ndarray:
  w = np.atleast_2d(np.asarray(w, dtype=np.float64))
  return fake_quant(w, calibrate_uniform(w, spec), spec)


def inverse_cholesky(h: HessianEstimate) -> np.ndarray:
  """
  Upper-triangular `U` with `U^T U = (h + damping I)^-1`.
  """
  return cholesky(spd_inverse(h.damped)).T


# =============================================================================


def gptq(
  w: ArrayLike, h: HessianEstimate, cfg: GptqConfig
) -> Tuple[np.ndarray, float]:
  w0 = np.atleast_2d(np.asarray(w, dtype=np.float64))
  rows, cols = w0.shape
  if cols != h.dim:
    raise LengthMismatch(f"weights have {cols} columns, Hessian is {h.dim}")
  spec = cfg.spec
  params = calibrate_uniform(w0, spec)
  scale, zero = (np.array(a) for a in params.expand(w0.shape))

  perm = np.arange(cols)
  if cfg.act_order:
    perm = np.argsort(-np.diag(h.h), kind="stable")
  inv = np.argsort(perm)
  hp = HessianEstimate(h.h[np.ix_(perm, perm)], h.damping, h.sample_count)
  u = inverse_cholesky(hp)

  work = w0[:, perm].copy()
  scale, zero = scale[:, perm], zero[:, perm]
  q = np.zeros_like(work)
  for b0 in range(0, cols, cfg.block_size):
    b1 = min(b0 + cfg.block_size, cols)
    err = np.zeros((rows, b1 - b0))
    for i in range(b0, b1):
      col = work[:, i]
      q[:, i], _ = fake_quant_values(col, scale[:, i], zero[:, i], spec.qmax)
      e = (col - q[:, i]) / u[i, i]
      err[:, i - b0] = e
      work[:, i + 1:b1] -= np.outer(e, u[i, i + 1:b1])
    for i in range(b0, b1):
      if b1 < cols:
        work[:, b1:] -= np.outer(err[:, i - b0], u[i, b1:])

  w_hat = q[:, inv]
  loss = proxy_loss(w0, w_hat, h)
  logger.debug("gptq %dx%d: proxy loss %.6g", rows, cols, loss)
  return w_hat, loss
