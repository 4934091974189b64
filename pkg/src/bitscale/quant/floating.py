"""
Sign / exponent / mantissa grids.

A grid with `e` exponent and `m` mantissa bits (bias `2**(e-1) - 1`) holds
every code except the all-ones pattern, which is reserved; subnormals are
included. E4M3 therefore tops out at 448, as in the OCP 8-bit format.
"""

from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike

from ..errors import InvalidSpec, NonPositiveScale
from .spec import FloatScheme


# =============================================================================


@lru_cache(maxsize=None)
def fp_grid(e_bits: int, m_bits: int) -> np.ndarray:
  """
  Sorted non-negative representable magnitudes. Read-only.
  """
  if e_bits < 2 or m_bits < 1:
    raise InvalidSpec(
      f"float grid needs e >= 2 and m >= 1, got e{e_bits}m{m_bits}")
  bias = (1 << (e_bits - 1)) - 1
  exp, man = np.meshgrid(
    np.arange(1 << e_bits), np.arange(1 << m_bits), indexing="ij")
  exp, man = exp.ravel(), man.ravel()
  frac = man / float(1 << m_bits)
  vals = np.where(
    exp == 0,
    frac * 2.0 ** (1 - bias),
    (1 + frac) * 2.0 ** (exp - bias))
  # codes are ordered by (exponent, mantissa), which is value order
  vals = vals[:-1]
  vals.setflags(write=False)
  return vals


def fp_max(e_bits: int, m_bits: int) -> float:
  return float(fp_grid(e_bits, m_bits)[-1])


def fp_quantize(
  x: ArrayLike, scheme: FloatScheme, scale: float | ArrayLike = 1.0
) -> np.ndarray:
  """
  Round `x / scale` to the nearest grid value and multiply back.

  Ties go to the even grid index, which is round-half-to-even on the
  mantissa. Magnitudes beyond the largest value saturate.
  """
  scale = np.asarray(scale, dtype=np.float64)
  if np.any(scale <= 0):
    raise NonPositiveScale("fp_quantize needs a positive scale")
  grid = fp_grid(scheme.e_bits, scheme.m_bits)
  x = np.asarray(x, dtype=np.float64)
  y = np.minimum(np.abs(x) / scale, grid[-1])
  i = np.clip(np.searchsorted(grid, y, side="left"), 1, grid.size - 1)
  lo, hi = grid[i - 1], grid[i]
  d_lo, d_hi = y - lo, hi - y
  up = (d_hi < d_lo) | ((d_hi == d_lo) & (i % 2 == 0))
  return np.copysign(np.where(up, hi, lo), x) * scale


def fp_scale(x: ArrayLike, scheme: FloatScheme) -> float:
  """
  Per-tensor scale mapping `max|x|` onto the largest grid value.
  """
  amax = float(np.max(np.abs(x), initial=0.0))
  if amax == 0:
    return 1.0
  return amax / fp_max(scheme.e_bits, scheme.m_bits)
