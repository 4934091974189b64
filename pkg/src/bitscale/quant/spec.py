"""
Value syntax for quantizer configuration and calibrated parameters.
"""

import json
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from ..effects import ValueSyntax
from ..errors import InvalidSpec


GRANULARITIES = ("tensor", "row", "group")


# =============================================================================


@dataclass(frozen=True, slots=True)
class IntegerScheme:
  """
  Uniform affine integer grid `{0, ..., 2**bits - 1}`.
  """

  @property
  def name(self) -> str:
    return "integer"


@dataclass(frozen=True, slots=True)
class FloatScheme:
  """
  Sign / exponent / mantissa grid with `e_bits` exponent and `m_bits`
  mantissa bits, subnormals included.
  """
  e_bits: int
  m_bits: int

  @property
  def name(self) -> str:
    return f"float(e{self.e_bits}m{self.m_bits})"


@dataclass(frozen=True, slots=True)
class QuantSpec(ValueSyntax):
  """
  What to quantize to, and at which granularity calibration groups are
  formed: one group for the whole tensor, one per row, or contiguous groups
  of `group_size` entries along each row.
  """
  bits: int
  scheme: IntegerScheme | FloatScheme = IntegerScheme()
  granularity: str = "row"
  group_size: int | None = None

  def __post_init__(self):
    if not 2 <= self.bits <= 16:
      raise InvalidSpec(f"bits must lie in [2, 16], got {self.bits}")
    if isinstance(self.scheme, FloatScheme):
      e, m = self.scheme.e_bits, self.scheme.m_bits
      if e < 2 or m < 1 or 1 + e + m != self.bits:
        raise InvalidSpec(
          f"float scheme e{e}m{m} does not fill {self.bits} bits")
    elif not isinstance(self.scheme, IntegerScheme):
      raise InvalidSpec(f"unknown scheme {self.scheme!r}")
    if self.granularity not in GRANULARITIES:
      raise InvalidSpec(f"unknown granularity {self.granularity!r}")
    if (self.granularity == "group") != (self.group_size is not None):
      raise InvalidSpec("group_size is required exactly for group granularity")
    if self.group_size is not None and self.group_size < 1:
      raise InvalidSpec("group_size must be positive")

  @classmethod
  def integer(
    cls, bits: int, granularity: str = "row", group_size: int | None = None
  ) -> "QuantSpec":
    return cls(bits, IntegerScheme(), granularity, group_size)

  @classmethod
  def floating(
    cls, e_bits: int, m_bits: int, granularity: str = "row",
    group_size: int | None = None
  ) -> "QuantSpec":
    return cls(1 + e_bits + m_bits, FloatScheme(e_bits, m_bits),
               granularity, group_size)

  @property
  def qmax(self) -> int:
    return (1 << self.bits) - 1

  def grouped(self, x: np.ndarray) -> np.ndarray:
    """
    View a matrix as `(rows, groups, group_len)` according to granularity.
    """
    assert x.ndim == 2
    if self.granularity == "tensor":
      return x.reshape(1, 1, -1)
    if self.granularity == "row":
      return x.reshape(x.shape[0], 1, x.shape[1])
    if x.shape[1] % self.group_size:
      raise InvalidSpec(
        f"group size {self.group_size} does not divide {x.shape[1]} columns")
    return x.reshape(x.shape[0], -1, self.group_size)

  def record(self) -> Dict[str, Any]:
    return {"bits": self.bits, "scheme": self.scheme.name,
            "granularity": self.granularity, "group_size": self.group_size}


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class QuantParams(ValueSyntax):
  """
  Calibrated parameters of a uniform quantizer, one entry per calibration
  group.

  Attributes
  ----------

  scale, zero_point: np.ndarray
    Shaped `(rows or 1, groups or 1)`; see `expand()` for the broadcast to a
    full tensor.

  gamma, beta: float
    Clipping factors applied to the upper and lower calibration bounds.
  """
  bits: int
  scale: np.ndarray
  zero_point: np.ndarray
  gamma: float = 1.0
  beta: float = 1.0
  group_size: int | None = None

  def __post_init__(self):
    if self.scale.shape != self.zero_point.shape or self.scale.ndim != 2:
      raise InvalidSpec("scale and zero_point must be matching 2-D arrays")
    if not np.all(self.scale > 0):
      raise InvalidSpec("scale must be positive")
    qmax = (1 << self.bits) - 1
    if np.any(self.zero_point < 0) or np.any(self.zero_point > qmax):
      raise InvalidSpec(f"zero_point outside [0, {qmax}]")
    for c in (self.gamma, self.beta):
      if not 0 < c <= 1:
        raise InvalidSpec("clipping factors must lie in (0, 1]")

  @property
  def qmax(self) -> int:
    return (1 << self.bits) - 1

  def expand(self, shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Broadcast scale and zero point to a full `shape` tensor.
    """
    s, z = self.scale, self.zero_point
    if self.group_size is not None:
      s = np.repeat(s, self.group_size, axis=1)
      z = np.repeat(z, self.group_size, axis=1)
    return np.broadcast_to(s, shape), np.broadcast_to(z, shape)

  def to_json(self) -> str:
    return json.dumps({
      "bits": self.bits, "scheme": "integer",
      "s": self.scale.tolist(), "z": self.zero_point.tolist(),
      "gamma": self.gamma, "beta": self.beta,
      "group_size": self.group_size}, sort_keys=True)

  @classmethod
  def from_json(cls, text: str) -> "QuantParams":
    d = json.loads(text)
    if d.get("scheme", "integer") != "integer":
      raise InvalidSpec("QuantParams only describe integer grids")
    return cls(int(d["bits"]),
               np.array(d["s"], dtype=np.float64),
               np.array(d["z"], dtype=np.int64),
               float(d["gamma"]), float(d["beta"]), d.get("group_size"))
