"""
Uniform affine integer quantization with learnable-weight-clipping bounds.

  q = clip(rint(x / s) + z, 0, 2**b - 1)
  s = (gamma * u - beta * l) / (2**b - 1)
  z = clip(rint(-beta * l / s), 0, 2**b - 1)

with `l = min(min(x), 0)` and `u = max(max(x), 0)`: the calibrated range
always contains zero, so a group on one side of zero still spans the grid
instead of saturating at one end. Rounding is half-to-even everywhere
(`numpy.rint`).
"""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..errors import DegenerateRange, InvalidSpec
from .spec import QuantParams, QuantSpec


logger = logging.getLogger(__name__)


# =============================================================================


def calibrate_uniform(
  x: ArrayLike, spec: QuantSpec, gamma: float = 1.0, beta: float = 1.0
) -> QuantParams:
  """
  Min/max calibration per granularity group, with bounds scaled by the
  clipping factors `gamma` (upper) and `beta` (lower).

  A constant group falls back to `s = 1` with the zero point computed from
  its value, so integer-valued constant groups round-trip exactly.
  """
  if not (0 < gamma <= 1 and 0 < beta <= 1):
    raise InvalidSpec("clipping factors must lie in (0, 1]")
  x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
  g = spec.grouped(x2)
  lo, hi = g.min(axis=-1), g.max(axis=-1)
  constant = ~(hi > lo)
  lo = np.where(constant, lo, np.minimum(lo, 0.0))
  hi = np.maximum(hi, 0.0)
  span = gamma * hi - beta * lo
  degenerate = constant | ~(span > 0)
  if np.any(degenerate):
    logger.debug("%s", DegenerateRange(
      f"{int(degenerate.sum())} calibration group(s) with empty range; "
      "falling back to unit scale"))
  scale = np.where(degenerate, 1.0, span / spec.qmax)
  zero = np.clip(np.rint(-beta * lo / scale), 0, spec.qmax).astype(np.int64)
  return QuantParams(
    spec.bits, scale, zero, float(gamma), float(beta),
    spec.group_size if spec.granularity == "group" else None)


# =============================================================================


def quantize_values(
  x: np.ndarray, scale: np.ndarray, zero: np.ndarray, qmax: int
) -> Tuple[np.ndarray, np.ndarray]:
  """
  Integer codes for `x` under broadcastable `scale` and `zero`, and the mask
  of entries whose unclipped code already lay inside the grid.
  """
  raw = np.rint(x / scale) + zero
  return np.clip(raw, 0, qmax), (raw >= 0) & (raw <= qmax)


def fake_quant_values(
  x: np.ndarray, scale: np.ndarray, zero: np.ndarray, qmax: int
) -> Tuple[np.ndarray, np.ndarray]:
  q, mask = quantize_values(x, scale, zero, qmax)
  return (q - zero) * scale, mask


def quantize(x: ArrayLike, p: QuantParams, spec: QuantSpec) -> np.ndarray:
  if p.bits != spec.bits:
    raise InvalidSpec("parameters were calibrated for a different bit-width")
  x = np.asarray(x, dtype=np.float64)
  x2 = np.atleast_2d(x)
  scale, zero = p.expand(x2.shape)
  q, _ = quantize_values(x2, scale, zero, spec.qmax)
  return q.astype(np.int64).reshape(x.shape)


def dequantize(q: ArrayLike, p: QuantParams) -> np.ndarray:
  q = np.asarray(q)
  q2 = np.atleast_2d(q)
  scale, zero = p.expand(q2.shape)
  return ((q2 - zero) * scale).reshape(q.shape)


def fake_quant(x: ArrayLike, p: QuantParams, spec: QuantSpec) -> np.ndarray:
  return dequantize(quantize(x, p, spec), p)
