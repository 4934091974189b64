
import numpy as np
import pytest

from bitscale.errors import InvalidSpec
from bitscale.numerics import gaussian
from bitscale.oracles import uniform_roundtrip_violations
from bitscale.quant import (
  FloatScheme, QuantParams, QuantSpec, calibrate_uniform, dequantize,
  fake_quant, quantize, simulate)


# =============================================================================


class TestCalibrate:

  @staticmethod
  @pytest.mark.parametrize(
    "x, bits, scale, zero",
    [([[-1.0, 0.0, 3.0]], 2, 4 / 3, 1),
     ([[2.0, 2.0, 2.0]], 3, 1.0, 0),
     ([[2.0, 2.0, 2.0]], 8, 1.0, 0),
     ([[0.0, 255.0]], 8, 1.0, 0),
     ([[5.0, 6.0, 7.0]], 2, 7 / 3, 0),
     ([[-7.0, -6.0, -5.0]], 2, 7 / 3, 3)],
    ids=["worked", "constant-3", "constant-8", "endpoints", "positive",
         "negative"])
  def test_examples(x, bits, scale, zero):
    p = calibrate_uniform(x, QuantSpec.integer(bits, "tensor"))
    assert p.scale.shape == (1, 1)
    assert p.scale[0, 0] == pytest.approx(scale, rel=1e-15)
    assert p.zero_point[0, 0] == zero

  @staticmethod
  def test_granularity_shapes(streams):
    x = gaussian(streams(2), 32).reshape(2, 16)
    shapes = {"tensor": (1, 1), "row": (2, 1), "group": (2, 4)}
    for (g, shape) in shapes.items():
      spec = QuantSpec.integer(4, g, 4 if g == "group" else None)
      p = calibrate_uniform(x, spec)
      assert p.scale.shape == shape
      assert p.expand(x.shape)[0].shape == x.shape

  @staticmethod
  def test_clipping_narrows_scale():
    x = [[-1.0, 0.0, 3.0]]
    spec = QuantSpec.integer(2, "tensor")
    p = calibrate_uniform(x, spec, gamma=0.5, beta=1.0)
    assert p.scale[0, 0] == pytest.approx((1.5 + 1.0) / 3)

  @staticmethod
  @pytest.mark.parametrize("gamma, beta", [(0.0, 1.0), (1.0, 1.5)])
  def test_invalid_clipping(gamma, beta):
    with pytest.raises(InvalidSpec):
      calibrate_uniform([[1.0, 2.0]], QuantSpec.integer(4), gamma, beta)

  @staticmethod
  def test_group_size_must_divide():
    with pytest.raises(InvalidSpec):
      calibrate_uniform(np.zeros((2, 6)), QuantSpec.integer(4, "group", 4))


# =============================================================================


class TestQuantize:

  spec = QuantSpec.integer(2, "tensor")

  @classmethod
  def test_worked_example(cls):
    x = np.array([[-1.0, 0.0, 3.0]])
    p = calibrate_uniform(x, cls.spec)
    q = quantize(x, p, cls.spec)
    assert q.tolist() == [[0, 1, 3]]
    np.testing.assert_allclose(dequantize(q, p), [[-4 / 3, 0.0, 8 / 3]],
                               rtol=1e-15)

  @staticmethod
  def test_saturation():
    spec = QuantSpec.integer(4, "tensor")
    p = calibrate_uniform([[1e6]], spec)
    assert quantize([[1e6]], p, spec).tolist() == [[15]]

  @staticmethod
  def test_round_half_even():
    spec = QuantSpec.integer(4, "tensor")
    p = calibrate_uniform([[0.4]], spec)
    assert fake_quant([[0.4]], p, spec).tolist() == [[0.0]]
    p = QuantParams(4, np.ones((1, 1)), np.zeros((1, 1), dtype=np.int64))
    assert quantize([[0.5, 1.5, 2.5]], p, spec).tolist() == [[0, 2, 2]]

  @staticmethod
  def test_grid_aligned_is_exact():
    spec = QuantSpec.integer(2, "row")
    x = np.array([[0.0, 1.0, 2.0, 3.0], [-0.5, 0.0, 0.5, 1.0]])
    assert np.array_equal(fake_quant(x, calibrate_uniform(x, spec), spec), x)

  @staticmethod
  def test_idempotent(streams):
    spec = QuantSpec.integer(3, "group", 4)
    x = gaussian(streams(3), 64).reshape(4, 16)
    p = calibrate_uniform(x, spec)
    once = fake_quant(x, p, spec)
    assert np.array_equal(fake_quant(once, p, spec), once)

  @staticmethod
  @pytest.mark.parametrize("bits", [2, 3, 4, 8])
  def test_error_bound(streams, bits):
    x = gaussian(streams(4, bits), 256).reshape(16, 16)
    assert uniform_roundtrip_violations(x, QuantSpec.integer(bits)) == 0

  @staticmethod
  @pytest.mark.parametrize("shift", [5.0, -5.0, 100.0],
                           ids=["positive", "negative", "far"])
  @pytest.mark.parametrize("bits", [2, 4, 8])
  def test_one_sided_groups_never_clip(streams, bits, shift):
    x = gaussian(streams(7, bits), 256).reshape(16, 16) * 0.5 + shift
    assert np.all(np.sign(x) == np.sign(shift))
    assert uniform_roundtrip_violations(x, QuantSpec.integer(bits)) == 0

  @staticmethod
  @pytest.mark.parametrize(
    "x, bits",
    [([[5.0, 6.0, 7.0]], 2), ([[1.0, 1.5, 2.0]], 8),
     ([[-3.0, -2.5, -0.5]], 4)],
    ids=["2-bit", "8-bit", "negative"])
  def test_one_sided_round_trip(x, bits):
    spec = QuantSpec.integer(bits)
    x = np.array(x)
    p = calibrate_uniform(x, spec)
    err = np.abs(fake_quant(x, p, spec) - x)
    assert np.all(err <= p.scale / 2 * (1 + 1e-12))
    assert len(np.unique(quantize(x, p, spec))) > 1

  @staticmethod
  @pytest.mark.parametrize("bits", [2, 3, 4, 8])
  def test_monotone(streams, bits):
    spec = QuantSpec.integer(bits, "tensor")
    x = np.sort(gaussian(streams(8, bits), 512) * 3).reshape(1, -1)
    p = calibrate_uniform(x[:, ::7], spec)
    assert np.all(np.diff(quantize(x, p, spec)) >= 0)
    assert np.all(np.diff(fake_quant(x, p, spec)) >= 0)

  @staticmethod
  def test_bit_mismatch():
    p = calibrate_uniform([[0.0, 1.0]], QuantSpec.integer(4))
    with pytest.raises(InvalidSpec):
      quantize([[0.0, 1.0]], p, QuantSpec.integer(3))


# =============================================================================


class TestParams:

  @staticmethod
  def test_json(streams):
    x = gaussian(streams(5), 24).reshape(3, 8)
    p = calibrate_uniform(x, QuantSpec.integer(4, "group", 4), 0.9, 0.8)
    back = QuantParams.from_json(p.to_json())
    assert np.array_equal(back.scale, p.scale)
    assert np.array_equal(back.zero_point, p.zero_point)
    assert (back.gamma, back.beta, back.group_size) == (0.9, 0.8, 4)

  @staticmethod
  @pytest.mark.parametrize(
    "scale, zero",
    [(np.zeros((1, 1)), np.zeros((1, 1))),
     (np.ones((1, 1)), np.full((1, 1), 16)),
     (np.ones((1, 2)), np.zeros((1, 1)))],
    ids=["scale", "zero", "shape"])
  def test_invalid(scale, zero):
    with pytest.raises(InvalidSpec):
      QuantParams(4, scale, zero)

  @staticmethod
  @pytest.mark.parametrize(
    "make",
    [lambda: QuantSpec.integer(1), lambda: QuantSpec.integer(17),
     lambda: QuantSpec.integer(4, "group"),
     lambda: QuantSpec.integer(4, "row", 8),
     lambda: QuantSpec.integer(4, "column"),
     lambda: QuantSpec(8, FloatScheme(4, 4))],
    ids=["bits-low", "bits-high", "group-missing", "group-extra",
         "granularity", "float-width"])
  def test_invalid_spec(make):
    with pytest.raises(InvalidSpec):
      make()


def test_simulate_integer_matches_fake_quant(streams):
  spec = QuantSpec.integer(3)
  x = gaussian(streams(6), 40).reshape(5, 8)
  x = x - x.mean(axis=1, keepdims=True)
  xq, mask = simulate(x, spec)
  assert np.array_equal(xq, fake_quant(x, calibrate_uniform(x, spec), spec))
  assert mask.all()
