"""
Scheme-dispatched simulated quantization, used wherever a tensor must be
replaced by its quantized counterpart without tracking integer codes.
"""

from functools import partial
from typing import Tuple

import numpy as np
from multipledispatch import dispatch
from numpy.typing import ArrayLike

from .floating import fp_max, fp_quantize
from .spec import FloatScheme, IntegerScheme, QuantSpec
from .uniform import calibrate_uniform, fake_quant_values


_namespace = {}
dispatch = partial(dispatch, namespace=_namespace)


# =============================================================================


def simulate(x: ArrayLike, spec: QuantSpec) -> Tuple[np.ndarray, np.ndarray]:
  """
  Fake-quantize `x` with parameters calibrated on `x` itself.

  Returns the quantized tensor (same shape as `x`) and a boolean mask of the
  entries that were representable without saturation.
  """
  x = np.asarray(x, dtype=np.float64)
  x2 = np.atleast_2d(x)
  xq, mask = _simulate(spec.scheme, x2, spec)
  return xq.reshape(x.shape), mask.reshape(x.shape)


@dispatch(IntegerScheme, np.ndarray, QuantSpec)
def _simulate(_, x, spec):
  p = calibrate_uniform(x, spec)
  scale, zero = p.expand(x.shape)
  return fake_quant_values(x, scale, zero, spec.qmax)


@dispatch(FloatScheme, np.ndarray, QuantSpec)
def _simulate(scheme, x, spec):  # noqa: F811
  g = spec.grouped(x)
  amax = np.abs(g).max(axis=-1, keepdims=True)
  top = fp_max(scheme.e_bits, scheme.m_bits)
  scale = np.where(amax > 0, amax / top, 1.0)
  xq = fp_quantize(g, scheme, scale)
  mask = np.abs(g) <= amax
  return xq.reshape(x.shape), mask.reshape(x.shape)
