"""
Abstract types for runners of effect signatures.
"""

from contextlib import AbstractContextManager
from functools import reduce
from typing import Callable, Dict

from effectful.ops.syntax import Operation
from effectful.ops.semantics import coproduct, handler

from ..effects import EffectSignature


# =============================================================================


RunnerDict = Dict[Operation, Callable]


class Runner:
  """
  A runner (affine handler) for an `EffectSignature`.

  More precisely, this class is a mixin for a namespace of co-operations
  (interpretations of atomic effects), each represented as a method named
  after the operation it interprets. Unlike a pure interpreter, a runner
  instance may carry state (a noise stream, a trace buffer), so the
  co-operations are bound methods of that instance. Operations of the
  signature that the runner does not define are left to outer handlers.
  """

  signature = EffectSignature

  def as_dict(self, inheritance: bool = True) -> RunnerDict:
    """
    View this runner as a mapping from `Operation` instances to functions.

    Arguments:
    ----------
    inheritance: bool
      This argument is forwarded to `EffectSignature.as_dict()`.
    """
    assert issubclass(self.signature, EffectSignature)
    assert self.signature is not EffectSignature
    coops = {}
    for (symb, op) in self.signature.as_dict(inheritance).items():
      coop = getattr(self, symb, None)
      if callable(coop):
        coops[op] = coop
    return coops


def handle(*runners: Runner) -> AbstractContextManager:
  """
  Install several runners at once; later runners take precedence where
  their operations overlap.
  """
  intp = reduce(coproduct, (r.as_dict() for r in runners), {})
  return handler(intp)
