"""
Saturating power laws `y = a * x**(-b) + c` for quality-versus-bits curves.

The offset `c` is searched on a grid over `[0, min(y))`; for fixed `c`,
`log(y - c)` is linear in `log x`, so `(log a, b)` come from least squares.
The best grid point is then polished by a bounded scalar search over `c`.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..effects import ValueSyntax
from ..errors import InsufficientPoints, InvalidSpec, NoValidFit
from ..numerics import linear_lstsq, refine_scalar


logger = logging.getLogger(__name__)

GRID_STEPS = 200
MIN_POINTS = 4


# =============================================================================


@dataclass(frozen=True, slots=True)
class PowerLawFit(ValueSyntax):
  a: float
  b: float
  c: float
  rmse: float

  def __post_init__(self):
    if not (self.a > 0 and self.b > 0):
      raise InvalidSpec("a power-law fit must decrease in x (a, b > 0)")
    if not self.rmse >= 0:
      raise InvalidSpec("rmse must be non-negative")

  def predict(self, x) -> np.ndarray | float:
    y = self.a * np.power(np.asarray(x, dtype=np.float64), -self.b) + self.c
    return float(y) if np.ndim(y) == 0 else y


def _fit_at(c: float, lx: np.ndarray, y: np.ndarray):
  """
  `(a, b, mse)` of the log-linear fit at offset `c`, or `None` when the fit
  is not decreasing.
  """
  if not np.all(y - c > 0):
    return None
  a_mat = np.stack([np.ones_like(lx), -lx], axis=1)
  (log_a, b), _ = linear_lstsq(a_mat, np.log(y - c))
  if not b > 0:
    return None
  a = math.exp(log_a)
  mse = float(np.mean((a * np.exp(-b * lx) + c - y) ** 2))
  return a, float(b), mse


def fit_power_law(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
  pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
  if pts.shape[0] < MIN_POINTS:
    raise InsufficientPoints(
      f"need at least {MIN_POINTS} points, got {pts.shape[0]}")
  x, y = pts[:, 0], pts[:, 1]
  if np.any(x <= 0) or not np.all(np.isfinite(pts)):
    raise InvalidSpec("power-law x values must be positive and finite")
  if np.unique(x).size != x.size:
    raise InvalidSpec("power-law x values must be distinct")
  lx = np.log(x)
  y_min = float(y.min())
  if y_min <= 0:
    raise NoValidFit("no offset c in [0, min(y)) exists")

  step = y_min / GRID_STEPS
  best = None
  for k in range(GRID_STEPS):
    c = y_min * k / GRID_STEPS
    fit = _fit_at(c, lx, y)
    if fit is not None and (best is None or fit[2] < best[3]):
      best = (*fit[:2], c, fit[2])
  if best is None:
    raise NoValidFit("no grid offset gives a decreasing curve")

  def objective(c: float) -> float:
    fit = _fit_at(c, lx, y)
    return math.inf if fit is None else fit[2]

  lo = max(0.0, best[2] - step)
  hi = min(best[2] + step, y_min * (1 - 1e-12))
  c_ref, mse_ref = refine_scalar(objective, lo, hi)
  if mse_ref < best[3]:
    a, b, mse = _fit_at(c_ref, lx, y)
    best = (a, b, c_ref, mse)
  a, b, c, mse = best
  logger.debug("power law a=%.6g b=%.6g c=%.6g", a, b, c)
  return PowerLawFit(a, b, c, math.sqrt(mse))
