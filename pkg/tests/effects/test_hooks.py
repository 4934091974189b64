
import numpy as np
import pytest
import torch

# pylint: disable=no-name-in-module
from bitscale.effects import (
  PipelineHooks, StepHooks, FeatureHooks, ObservationHooks, ValueSyntax,
  begin_step, feature, reconstruction, activation)
from bitscale.quant import QuantSpec
from bitscale.runners import Runner, handle


class TestPipelineHooks:

  signature = PipelineHooks
  num_ops = 4

  @classmethod
  def test_signature(cls, sig_syntax):
    sig_syntax(cls.signature, cls.num_ops)


class TestStepHooks(TestPipelineHooks):

  signature = StepHooks
  num_ops = 1


class TestFeatureHooks(TestPipelineHooks):

  signature = FeatureHooks
  num_ops = 2


class TestObservationHooks(TestPipelineHooks):

  signature = ObservationHooks
  num_ops = 1


# =============================================================================


class Negate(Runner):

  signature = FeatureHooks

  def feature(self, step: int, value: np.ndarray) -> np.ndarray:
    return -value

  def reconstruction(self, step: int, value: np.ndarray) -> np.ndarray:
    return value + step


class CountSteps(Runner):

  signature = PipelineHooks

  def __init__(self):
    self.steps = []
    self.layers = []

  def begin_step(self, step: int) -> None:
    self.steps.append(step)

  def activation(self, layer: str, value: torch.Tensor) -> None:
    self.layers.append(layer)


@pytest.mark.parametrize(
  "op, default, handled",
  [(feature, lambda s, v: v, lambda s, v: -v),
   (reconstruction, lambda s, v: v, lambda s, v: v + s)],
  ids=["feature", "reconstruction"])
def test_feature_hooks(hook_semantics, op, default, handled):
  args = [(0, np.array([1.0, -2.0])), (3, np.zeros((2, 2)))]
  hook_semantics(
    op, Negate(), eq=np.array_equal, args=args,
    default=[default(*a) for a in args],
    handled=[handled(*a) for a in args])


def test_observation_hooks(hook_semantics):
  runner = CountSteps()
  hook_semantics(
    begin_step, runner, eq=lambda a, b: a is b,
    args=[(0,), (1,)], default=[None, None], handled=[None, None])
  assert runner.steps == [0, 1]
  assert activation("fc1", torch.zeros(2)) is None
  with handle(runner):
    activation("fc1", torch.zeros(2))
  assert runner.layers == ["fc1"]


# =============================================================================


def test_value_syntax_record():
  spec = QuantSpec.integer(4, "group", 8)
  assert isinstance(spec, ValueSyntax)
  assert spec.record() == {"bits": 4, "scheme": "integer",
                           "granularity": "group", "group_size": 8}
  assert str(spec).startswith("QuantSpec:")
