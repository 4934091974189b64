
import numpy as np
import pytest

from bitscale.errors import InvalidSpec
from bitscale.genmodels import (
  make_markov_dataset, make_mixture_dataset, mixture_source, split)


class TestMarkov:

  @staticmethod
  def test_deterministic():
    a = make_markov_dataset(20, 7, 6, 3, seed=11)
    b = make_markov_dataset(20, 7, 6, 3, seed=11)
    assert np.array_equal(a.tokens, b.tokens)
    assert np.array_equal(a.conditions, b.conditions)

  @staticmethod
  def test_ranges():
    d = make_markov_dataset(50, 5, 4, 2, seed=0)
    assert d.tokens.shape == (50, 5)
    assert len(d) == 50 and d.length == 5
    assert d.tokens.min() >= 0 and d.tokens.max() < 4
    assert set(d.conditions.tolist()) <= {0, 1}
    np.testing.assert_allclose(d.source.transitions.sum(axis=-1), 1.0)

  @staticmethod
  def test_invalid():
    with pytest.raises(InvalidSpec):
      make_markov_dataset(0, 5, 4, 2, seed=0)
    with pytest.raises(InvalidSpec):
      make_markov_dataset(5, 5, 1, 2, seed=0)


def test_mixture():
  x = make_mixture_dataset(400, seed=4)
  assert x.shape == (400, 2)
  assert np.array_equal(x, make_mixture_dataset(400, seed=4))
  radius = np.linalg.norm(mixture_source().means, axis=1)
  np.testing.assert_allclose(radius, 1.5)


class TestSplit:

  @staticmethod
  def test_sizes():
    d = make_markov_dataset(10, 3, 4, 2, seed=1)
    train, held = split(d)
    assert (len(train), len(held)) == (8, 2)
    assert np.array_equal(held.tokens, d.tokens[8:])

  @staticmethod
  def test_points():
    x = np.arange(20.0).reshape(10, 2)
    train, held = split(x, 0.3)
    assert train.shape == (7, 2) and held.shape == (3, 2)

  @staticmethod
  @pytest.mark.parametrize("fraction", [0.0, 1.0, 0.01])
  def test_degenerate(fraction):
    with pytest.raises(InvalidSpec):
      split(np.zeros((10, 2)), fraction)
