"""
Per-layer, per-step activation statistics of a generating pipeline.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..effects import ValueSyntax
from ..reporting import new_figure, save_svg, write_csv
from ..runners import ActivationRecorder, ActivationStats, handle


logger = logging.getLogger(__name__)


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class ActivationTable(ValueSyntax):
  """
  Attributes
  ----------

  stats: Dict[Tuple[str, int], ActivationStats]
    Keyed by `(layer, step)`; steps are in sampling order.
  """
  stats: Dict[Tuple[str, int], ActivationStats]

  @property
  def layers(self) -> List[str]:
    return sorted({layer for (layer, _) in self.stats})

  @property
  def steps(self) -> List[int]:
    return sorted({step for (_, step) in self.stats})

  def series(self, layer: str, field: str = "variance") -> np.ndarray:
    return np.array([getattr(self.stats[(layer, s)], field)
                     for s in self.steps if (layer, s) in self.stats])

  def rows(self):
    for layer in self.layers:
      for step in self.steps:
        if (layer, step) in self.stats:
          yield (layer, step, *self.stats[(layer, step)])

  def write_csv(self, path):
    return write_csv(
      path, ("layer", "step", *ActivationStats._fields), self.rows())


def record_activation_stats(pipeline, seed: int) -> ActivationTable:
  recorder = ActivationRecorder()
  with handle(recorder):
    pipeline.run(seed)
  logger.debug("recorded %d activation cells", len(recorder.stats))
  return ActivationTable(dict(recorder.stats))


def variance_dispersion(table: ActivationTable) -> float:
  """
  How much activation variance fluctuates across steps: the squared
  coefficient of variation of each layer's per-step variance, averaged over
  layers.
  """
  values = []
  for layer in table.layers:
    v = table.series(layer)
    m = float(v.mean())
    values.append(0.0 if m == 0 else float(v.std() / m) ** 2)
  return float(np.mean(values)) if values else 0.0


def plot_activation_ranges(table: ActivationTable, path):
  fig = new_figure()
  ax = fig.axes[0]
  steps = np.array(table.steps)
  for layer in table.layers:
    lo, hi = table.series(layer, "minimum"), table.series(layer, "maximum")
    ax.fill_between(steps[:lo.size], lo, hi, alpha=0.25, label=layer)
  ax.set_xlabel("step")
  ax.set_ylabel("activation range")
  ax.legend()
  return save_svg(fig, path)
