
from operator import attrgetter

import numpy as np
import pytest
import torch

# pylint: disable=no-name-in-module
from bitscale.effects import (
  FeatureHooks, PipelineHooks, begin_step, feature, reconstruction,
  activation)
from bitscale.runners import (
  Runner, ReconstructionTracer, ActivationRecorder, handle)


class Scale(Runner):

  signature = FeatureHooks

  def __init__(self, factor: float):
    self.factor = factor

  def feature(self, step: int, value: np.ndarray) -> np.ndarray:
    return self.factor * value


# =============================================================================


@pytest.mark.parametrize(
  "runner, signature",
  [(ReconstructionTracer(), FeatureHooks),
   (ActivationRecorder(), PipelineHooks)],
  ids=["tracer", "recorder"])
def test_runner_ops(runner, signature):
  """
  A runner interprets a subset of its signature, by bound methods.
  """
  ops_sig = set(signature.as_dict().keys())
  ops_run = set(map(attrgetter("__name__"), runner.as_dict().keys()))
  assert ops_run <= ops_sig
  assert all(getattr(f, "__self__", None) is runner
             for f in runner.as_dict().values())


def test_handle_precedence():
  x = np.ones(3)
  with handle(Scale(2.0), Scale(3.0)):
    assert np.array_equal(feature(0, x), 3 * x)
  with handle(Scale(3.0), Scale(2.0)):
    assert np.array_equal(feature(0, x), 2 * x)
  assert np.array_equal(feature(0, x), x)


def test_handle_disjoint_runners():
  tracer = ReconstructionTracer()
  with handle(Scale(-1.0), tracer):
    assert np.array_equal(feature(0, np.ones(2)), -np.ones(2))
    reconstruction(0, np.zeros(2))
    reconstruction(1, np.ones(2))
  assert tracer.steps == [0, 1]
  assert tracer.trajectory().shape == (2, 2)


# =============================================================================


class TestReconstructionTracer:

  @staticmethod
  def test_copies():
    tracer = ReconstructionTracer()
    v = np.zeros(2)
    with handle(tracer):
      out = reconstruction(4, v)
    v[0] = 1.0
    assert out is v
    assert np.array_equal(tracer.values[0], np.zeros(2))
    assert tracer.steps == [4]


class TestActivationRecorder:

  @staticmethod
  def test_keyed_by_step():
    rec = ActivationRecorder()
    with handle(rec):
      for step in range(3):
        begin_step(step)
        activation("fc", torch.full((2, 2), float(step)))
        activation("out", torch.tensor([[0.0, 2.0]]))
    assert rec.layers == ["fc", "out"]
    assert sorted(rec.stats) == [(layer, s) for layer in ("fc", "out")
                                 for s in range(3)]
    st = rec.stats[("fc", 2)]
    assert (st.minimum, st.maximum, st.mean, st.variance) == (2, 2, 2, 0)
    st = rec.stats[("out", 0)]
    assert (st.minimum, st.maximum, st.mean, st.variance) == (0, 2, 1, 1)
