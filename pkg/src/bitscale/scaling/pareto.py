"""
Dominance comparisons between model families on a bit axis.
"""

import logging
from itertools import groupby
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import EmptyInput, InsufficientPoints
from .bits import ExperimentRecord, bit_axis
from .powerlaw import MIN_POINTS, fit_power_law


logger = logging.getLogger(__name__)

A_DOMINATES = "a_dominates"
B_DOMINATES = "b_dominates"
MIXED = "mixed"

OVERLAP_SAMPLES = 64


# =============================================================================


def pareto_frontier(
  records: Sequence[ExperimentRecord], x_axis: str = "MT"
) -> List[ExperimentRecord]:
  """
  Records that no other record dominates (no larger bit count and no worse
  quality, with one of the two strictly better), sorted by bit count.
  Exact duplicates do not dominate each other.
  """
  if not records:
    raise EmptyInput("pareto_frontier needs at least one record")
  axis = bit_axis(x_axis)
  xs = [axis(r) for r in records]
  order = sorted(range(len(records)),
                 key=lambda i: (xs[i], records[i].quality, i))
  best = float("inf")
  front = []
  for (_, group) in groupby(order, key=lambda i: xs[i]):
    group = list(group)
    q = records[group[0]].quality
    if q < best:
      front.extend(records[i] for i in group if records[i].quality == q)
      best = q
  return front


def family_points(
  family: Sequence[ExperimentRecord], x_axis: str = "MT"
) -> List[Tuple[int, float]]:
  """
  `(bits, quality)` per distinct bit count, keeping the best quality where
  several records share one, sorted by bit count.
  """
  axis = bit_axis(x_axis)
  best: Dict[int, float] = {}
  for r in family:
    x = axis(r)
    best[x] = min(best.get(x, r.quality), r.quality)
  return sorted(best.items())


def scaling_shift(
  family_a: Sequence[ExperimentRecord], family_b: Sequence[ExperimentRecord],
  x_axis: str = "MT"
) -> str:
  """
  `a_dominates` when family A's fitted curve lies strictly below B's at
  every sampled point of their common bit range, `b_dominates` for the
  converse, and `mixed` otherwise, including when the ranges do not
  overlap.

  Each family needs as many distinct bit counts as a power-law fit does.
  """
  pa, pb = family_points(family_a, x_axis), family_points(family_b, x_axis)
  if min(len(pa), len(pb)) < MIN_POINTS:
    raise InsufficientPoints(
      f"each family needs {MIN_POINTS} distinct {x_axis} values")
  lo, hi = max(pa[0][0], pb[0][0]), min(pa[-1][0], pb[-1][0])
  if lo >= hi:
    return MIXED
  fit_a, fit_b = fit_power_law(pa), fit_power_law(pb)
  grid = np.geomspace(lo, hi, OVERLAP_SAMPLES)
  ya, yb = fit_a.predict(grid), fit_b.predict(grid)
  if np.all(ya < yb):
    verdict = A_DOMINATES
  elif np.all(yb < ya):
    verdict = B_DOMINATES
  else:
    verdict = MIXED
  logger.debug("scaling shift on %s: %s", x_axis, verdict)
  return verdict
