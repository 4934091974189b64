
import math

import pytest

from bitscale.errors import InvalidSpec
from bitscale.scaling import (
  ExperimentRecord, bit_axis, compute_bits, model_bits)


@pytest.mark.parametrize(
  "n_params, w_bits, a_bits, mt, ct",
  [(7_000_000_000, 8, 8, 56_000_000_000, 448_000_000_000),
   (1, 3, 16, 3, 48),
   (2_000_000_000, 4, 16, 8_000_000_000, 128_000_000_000)],
  ids=["W8A8", "tiny", "W4A16"])
def test_bit_counts(n_params, w_bits, a_bits, mt, ct):
  r = ExperimentRecord("m", n_params, w_bits, a_bits, 1.0)
  assert model_bits(r) == mt
  assert compute_bits(r) == ct
  assert bit_axis("MT")(r) == mt and bit_axis("CT")(r) == ct
  assert isinstance(model_bits(r), int)


class TestRecord:

  @staticmethod
  def test_precision_and_json():
    r = ExperimentRecord.from_json(
      {"label": "x", "n_params": 10, "w_bits": 4, "a_bits": 8,
       "quality": 2})
    assert r.precision == "W4A8"
    assert r.quality == 2.0
    assert ExperimentRecord.from_json(r.record()) == r

  @staticmethod
  @pytest.mark.parametrize(
    "fields",
    [("x", 0, 4, 8, 1.0), ("x", 10, 1, 8, 1.0), ("x", 10, 4, 8, math.inf),
     ("x", 10, True, 8, 1.0), ("x", 10.0, 4, 8, 1.0)],
    ids=["params", "bits", "quality", "bool", "float"])
  def test_invalid(fields):
    with pytest.raises(InvalidSpec):
      ExperimentRecord(*fields)

  @staticmethod
  def test_missing_field():
    with pytest.raises(InvalidSpec):
      ExperimentRecord.from_json({"label": "x", "n_params": 10})

  @staticmethod
  def test_unknown_axis():
    with pytest.raises(InvalidSpec):
      bit_axis("FLOPs")
