"""
Error types raised across the package.

Every error derives from `BitscaleError`, so callers (notably the CLI) can
separate domain failures from programming errors.
"""


class BitscaleError(Exception):
  pass


class InvalidSpec(BitscaleError, ValueError):
  """
  A value-syntax invariant of a dataclass was violated at construction.
  """


# numerics ====================================================================


class NotPositiveDefinite(BitscaleError, ValueError):
  """
  A Cholesky pivot was non-positive. Callers that own a Hessian are expected
  to add damping and retry; nothing regularizes silently.
  """


class LengthMismatch(BitscaleError, ValueError):
  pass


class DegenerateInput(BitscaleError, ValueError):
  pass


# quantization ================================================================


class DegenerateRange(BitscaleError):
  """
  Raised internally (and logged) when a calibration group has an empty
  quantization range; calibration recovers by falling back to unit scale.
  """


class NonPositiveScale(BitscaleError, ValueError):
  pass


class EmptyCalibration(BitscaleError, ValueError):
  pass


class EmptyCluster(BitscaleError):
  """
  Informational: a k-means cluster lost all members and was re-seeded.
  """


# models and harness ==========================================================


class DivergedTraining(BitscaleError, ArithmeticError):
  pass


class ZeroSignal(BitscaleError, ValueError):
  pass


class IndexOutOfRange(BitscaleError, IndexError):
  pass


# scaling and experiments =====================================================


class InsufficientPoints(BitscaleError, ValueError):
  pass


class NoValidFit(BitscaleError, ValueError):
  pass


class InvalidConfig(BitscaleError, ValueError):
  """
  An experiment config failed validation. The message names the offending
  field as a dotted path.
  """

  def __init__(self, field: str, message: str):
    super().__init__(f"{field}: {message}")
    self.field = field


class EmptyInput(BitscaleError, ValueError):
  pass
