"""
Bit accounting for quantized model families.

Total model bits `MT = w_bits * n_params` measure weight memory; total
compute bits `CT = w_bits * a_bits * n_params` measure the cost of the
matrix products. Both are exact Python integers.
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict

from ..effects import ValueSyntax
from ..errors import InvalidSpec


# =============================================================================


@dataclass(frozen=True, slots=True)
class ExperimentRecord(ValueSyntax):
  """
  One trained or quantized model and its quality. Quality is lower-is-better
  (FID-like); maximized metrics are negated before they get here.
  """
  label: str
  n_params: int
  w_bits: int
  a_bits: int
  quality: float

  def __post_init__(self):
    for f in ("n_params", "w_bits", "a_bits"):
      v = getattr(self, f)
      if isinstance(v, bool) or not isinstance(v, int):
        raise InvalidSpec(f"{f} must be an integer, got {v!r}")
    if self.n_params < 1:
      raise InvalidSpec("n_params must be positive")
    if self.w_bits < 2 or self.a_bits < 2:
      raise InvalidSpec("bit widths must be at least 2")
    if not math.isfinite(self.quality):
      raise InvalidSpec("quality must be finite")

  @property
  def precision(self) -> str:
    return f"W{self.w_bits}A{self.a_bits}"

  @classmethod
  def from_json(cls, d: Dict[str, Any]) -> "ExperimentRecord":
    try:
      return cls(str(d["label"]), d["n_params"], d["w_bits"], d["a_bits"],
                 float(d["quality"]))
    except KeyError as exc:
      raise InvalidSpec(f"record lacks field {exc}") from exc


def model_bits(r: ExperimentRecord) -> int:
  return r.w_bits * r.n_params


def compute_bits(r: ExperimentRecord) -> int:
  return r.w_bits * r.a_bits * r.n_params


BIT_AXES: Dict[str, Callable[[ExperimentRecord], int]] = {
  "MT": model_bits,
  "CT": compute_bits,
}


def bit_axis(name: str) -> Callable[[ExperimentRecord], int]:
  try:
    return BIT_AXES[name]
  except KeyError as exc:
    raise InvalidSpec(f"unknown bit axis {name!r}") from exc
