
import math

import numpy as np
import pytest

from bitscale.effects import feature
from bitscale.errors import InvalidSpec, ZeroSignal
from bitscale.numerics import RngStream
from bitscale.runners import handle
from bitscale.tolerance import NoiseInjector, NoiseSpec, inject_noise


class TestInjectNoise:

  @staticmethod
  def test_infinite_snr_is_identity():
    f = np.array([1.0, -2.0, 0.5])
    out = inject_noise(f, math.inf, RngStream(0))
    assert np.array_equal(out, f)
    assert out is not f

  @staticmethod
  def test_noise_power():
    f = np.full(20000, 2.0)
    n = inject_noise(f, 0.0, RngStream(1)) - f
    assert np.mean(n * n) == pytest.approx(4.0, rel=0.05)

  @staticmethod
  def test_ten_decibels_is_root_ten():
    f = np.array([[0.3, -1.0], [2.0, 0.1]])
    a = inject_noise(f, 0.0, RngStream(2)) - f
    b = inject_noise(f, 10.0, RngStream(2)) - f
    np.testing.assert_allclose(a, math.sqrt(10) * b, rtol=1e-12)

  @staticmethod
  def test_zero_signal():
    with pytest.raises(ZeroSignal):
      inject_noise(np.zeros(3), 10.0, RngStream(0))


# =============================================================================


class TestNoiseSpec:

  @staticmethod
  def test_steps_are_frozen():
    spec = NoiseSpec(5.0, [1, 3, 3])
    assert spec.injection_steps == frozenset({1, 3})
    assert spec.check(4) is spec

  @staticmethod
  def test_invalid():
    with pytest.raises(InvalidSpec):
      NoiseSpec(math.nan, {0})
    with pytest.raises(InvalidSpec):
      NoiseSpec(5.0, {4}).check(4)


class TestInjector:

  @staticmethod
  def test_only_listed_steps():
    value = np.array([1.0, 2.0, 3.0])
    with handle(NoiseInjector(NoiseSpec(0.0, {1}))):
      assert np.array_equal(feature(0, value), value)
      assert not np.array_equal(feature(1, value), value)
      assert np.array_equal(feature(2, value), value)

  @staticmethod
  def test_step_noise_independent_of_other_steps():
    value = np.array([1.0, 2.0, 3.0])
    with handle(NoiseInjector(NoiseSpec(3.0, {2}, seed=4))):
      alone = feature(2, value)
    with handle(NoiseInjector(NoiseSpec(3.0, {0, 1, 2}, seed=4))):
      feature(0, value)
      together = feature(2, value)
    assert np.array_equal(alone, together)

  @staticmethod
  def test_seed_changes_direction():
    value = np.array([1.0, 2.0, 3.0])
    with handle(NoiseInjector(NoiseSpec(3.0, {0}, seed=0))):
      a = feature(0, value)
    with handle(NoiseInjector(NoiseSpec(3.0, {0}, seed=1))):
      b = feature(0, value)
    assert not np.array_equal(a, b)
