
import numpy as np
import pytest

from bitscale.errors import EmptyInput, InsufficientPoints
from bitscale.oracles import pareto_pairwise, random_records
from bitscale.scaling import (
  A_DOMINATES, B_DOMINATES, MIXED, ExperimentRecord, family_points,
  pareto_frontier, scaling_shift)


def _family(label, offset=0.0, sizes=(1, 4, 16, 64), w_bits=4):
  return [ExperimentRecord(label, 1000 * n, w_bits, 16,
                           2.0 * n ** -0.5 + 1.0 + offset)
          for n in sizes]


class TestFrontier:

  @staticmethod
  def test_single():
    r = ExperimentRecord("a", 10, 4, 16, 3.0)
    assert pareto_frontier([r]) == [r]

  @staticmethod
  def test_equal_bits():
    worse = ExperimentRecord("a", 10, 4, 16, 3.0)
    better = ExperimentRecord("b", 10, 4, 16, 2.0)
    assert pareto_frontier([worse, better]) == [better]

  @staticmethod
  def test_duplicates_survive():
    r = ExperimentRecord("a", 10, 4, 16, 3.0)
    assert pareto_frontier([r, r]) == [r, r]

  @staticmethod
  def test_axis_changes_frontier():
    small = ExperimentRecord("a", 100, 4, 16, 3.0)
    big = ExperimentRecord("b", 100, 8, 4, 2.0)
    assert pareto_frontier([small, big], "MT") == [small, big]
    assert pareto_frontier([small, big], "CT") == [big]

  @staticmethod
  @pytest.mark.parametrize("axis", ["MT", "CT"])
  def test_against_pairwise(streams, axis):
    for k in range(5):
      recs = random_records(streams(100, k), 50)
      front = pareto_frontier(recs, axis)
      assert front == pareto_pairwise(recs, axis)
      quality = [r.quality for r in front]
      assert np.all(np.diff(quality) <= 0)

  @staticmethod
  def test_empty():
    with pytest.raises(EmptyInput):
      pareto_frontier([])


# =============================================================================


class TestScalingShift:

  @staticmethod
  def test_identical_is_mixed():
    assert scaling_shift(_family("a"), _family("b")) == MIXED

  @staticmethod
  def test_offset_family():
    lower, upper = _family("a"), _family("b", offset=1.0)
    assert scaling_shift(lower, upper) == A_DOMINATES
    assert scaling_shift(upper, lower) == B_DOMINATES

  @staticmethod
  def test_disjoint_ranges():
    a = _family("a", sizes=(1, 2, 3, 4))
    b = _family("b", sizes=(100, 200, 300, 400))
    assert scaling_shift(a, b) == MIXED

  @staticmethod
  @pytest.mark.parametrize("n", [1, 2, 3], ids=["one", "two", "three"])
  def test_too_few(n):
    with pytest.raises(InsufficientPoints):
      scaling_shift(_family("a")[:n], _family("b"))
    with pytest.raises(InsufficientPoints):
      scaling_shift(_family("a"), _family("b", sizes=(1, 4, 16, 64)[:n]))

  @staticmethod
  def test_repeated_bit_counts_collapse():
    a = _family("a")
    worse = ExperimentRecord("a", 4000, 4, 16, 9.0)
    assert family_points(a + [worse]) == family_points(a)
    upper = _family("b", offset=1.0)
    assert scaling_shift(a + [worse], upper) == A_DOMINATES

  @staticmethod
  def test_shared_bit_counts_are_not_distinct():
    a = _family("a", sizes=(1, 4, 16))
    same_bits = ExperimentRecord("a", 2000, 2, 16, 2.0)
    with pytest.raises(InsufficientPoints):
      scaling_shift(a + [same_bits], _family("b"))
