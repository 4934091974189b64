"""
Brute-force reference implementations.

Each oracle computes the same quantity as a fast routine in the rest of the
package, by enumeration or by the textbook formula, on instances small
enough to afford it. The test suite and `bitscale selftest` share them.
"""

import logging
from itertools import product
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .genmodels.codebook import Codebook
from .numerics import RngStream, gaussian, uniform
from .ptq.gptq import GptqConfig, gptq, rtn
from .ptq.gptvq import gptvq_assign
from .ptq.hessian import HessianEstimate, estimate_hessian, proxy_loss
from .quant import (
  FloatScheme, QuantSpec, calibrate_uniform, fake_quant, fp_grid,
  fp_quantize)
from .scaling.bits import ExperimentRecord, bit_axis
from .scaling.pareto import pareto_frontier


logger = logging.getLogger(__name__)


# quantizers ==================================================================


def fp_nearest(x: ArrayLike, e_bits: int, m_bits: int) -> np.ndarray:
  """
  Nearest grid value by scanning the whole grid; ties to the even index.
  """
  grid = fp_grid(e_bits, m_bits)
  x = np.asarray(x, dtype=np.float64)
  out = np.empty_like(x)
  for (k, v) in np.ndenumerate(x):
    a = min(abs(v), grid[-1])
    d = np.abs(grid - a)
    cands = np.flatnonzero(d == d.min())
    even = [i for i in cands if i % 2 == 0]
    out[k] = np.copysign(grid[even[0] if even else cands[0]], v)
  return out


def uniform_roundtrip_violations(
  x: ArrayLike, spec: QuantSpec
) -> int:
  """
  Entries of `x` whose code fell outside the grid before clipping, or that
  land farther than `s / 2` from their fake-quantized value, under min/max
  calibration on `x` itself.
  """
  x = np.atleast_2d(np.asarray(x, dtype=np.float64))
  p = calibrate_uniform(x, spec)
  scale, zero = p.expand(x.shape)
  raw = np.rint(x / scale) + zero
  clipped = (raw < 0) | (raw > spec.qmax)
  err = np.abs(x - fake_quant(x, p, spec))
  bound = scale / 2 * (1 + 1e-12)
  return int(np.count_nonzero(clipped | (err > bound)))


# post-training quantization ==================================================


def gptq_reference(
  w: ArrayLike, h: HessianEstimate, spec: QuantSpec
) -> np.ndarray:
  """
  Column-by-column compensation with the explicit inverse Hessian, shrunk
  by one row and column after every step.
  """
  w0 = np.atleast_2d(np.asarray(w, dtype=np.float64))
  p = calibrate_uniform(w0, spec)
  scale, zero = p.expand(w0.shape)
  work = w0.copy()
  q = np.zeros_like(work)
  hinv = np.linalg.inv(h.damped)
  for i in range(w0.shape[1]):
    raw = np.clip(np.rint(work[:, i] / scale[:, i]) + zero[:, i],
                  0, spec.qmax)
    q[:, i] = (raw - zero[:, i]) * scale[:, i]
    err = (work[:, i] - q[:, i]) / hinv[i, i]
    work[:, i + 1:] -= np.outer(err, hinv[i, i + 1:])
    hinv = hinv - np.outer(hinv[:, i], hinv[i, :]) / hinv[i, i]
  return q


def exhaustive_grid_optimum(
  w: ArrayLike, h: HessianEstimate, spec: QuantSpec
) -> Tuple[np.ndarray, float]:
  """
  Minimum proxy loss over every assignment of grid values to entries, on
  the grid `calibrate_uniform` fixes for `w`.
  """
  w0 = np.atleast_2d(np.asarray(w, dtype=np.float64))
  p = calibrate_uniform(w0, spec)
  scale, zero = p.expand(w0.shape)
  codes = range(spec.qmax + 1)
  best, best_loss = None, np.inf
  for combo in product(codes, repeat=w0.size):
    q = (np.reshape(combo, w0.shape) - zero) * scale
    loss = proxy_loss(w0, q, h)
    if loss < best_loss:
      best, best_loss = q, loss
  return best, float(best_loss)


def vq_assign_scan(
  x: ArrayLike, codebook: Codebook, h_sub: ArrayLike
) -> int:
  x = np.asarray(x, dtype=np.float64)
  h_sub = np.asarray(h_sub, dtype=np.float64)
  best, best_cost = 0, np.inf
  for (m, c) in enumerate(codebook.centroids):
    d = x - c
    cost = float(d @ h_sub @ d)
    if cost < best_cost:
      best, best_cost = m, cost
  return best


# scaling =====================================================================


def pareto_pairwise(
  records: Sequence[ExperimentRecord], x_axis: str = "MT"
) -> List[ExperimentRecord]:
  axis = bit_axis(x_axis)

  def dominates(a, b):
    xa, xb = axis(a), axis(b)
    return (xa <= xb and a.quality <= b.quality
            and (xa < xb or a.quality < b.quality))

  keep = [i for (i, r) in enumerate(records)
          if not any(dominates(o, r) for o in records)]
  keep.sort(key=lambda i: (axis(records[i]), records[i].quality, i))
  return [records[i] for i in keep]


def random_records(stream: RngStream, n: int) -> List[ExperimentRecord]:
  rng = stream.generator()
  sizes = rng.integers(1, 40, n) * 50_000_000
  w_bits = rng.choice([3, 4, 8, 16], n)
  a_bits = rng.choice([8, 16], n)
  quality = np.round(rng.uniform(1.0, 10.0, n), 1)
  return [ExperimentRecord(f"f{i % 4}", int(s), int(w), int(a), float(q))
          for (i, (s, w, a, q)) in enumerate(
            zip(sizes, w_bits, a_bits, quality))]


# =============================================================================


def _check_roundtrip(stream: RngStream) -> bool:
  return all(
    uniform_roundtrip_violations(
      gaussian(stream.derive(b), 256).reshape(16, 16),
      QuantSpec.integer(b)) == 0
    for b in (2, 3, 4, 8))


def _check_fp_grid(stream: RngStream) -> bool:
  for (k, (e, m)) in enumerate([(2, 1), (3, 2), (4, 3), (5, 2)]):
    top = fp_grid(e, m)[-1]
    x = (uniform(stream.derive(k), 512) * 2 - 1) * top * 1.1
    if not np.array_equal(fp_quantize(x, FloatScheme(e, m)),
                          fp_nearest(x, e, m)):
      return False
  return True


def _check_gptq(stream: RngStream) -> bool:
  spec = QuantSpec.integer(2)
  for (k, cols) in enumerate((2, 3)):
    s = stream.derive(k)
    w = gaussian(s.derive(0), cols).reshape(1, cols)
    h = estimate_hessian(gaussian(s.derive(1), 16 * cols).reshape(16, cols))
    w_hat, loss = gptq(w, h, GptqConfig(spec))
    _, best = exhaustive_grid_optimum(w, h, spec)
    ref = gptq_reference(w, h, spec)
    rtn_loss = proxy_loss(w, rtn(w, spec), h)
    if not (best <= min(loss, rtn_loss) * (1 + 1e-9) + 1e-12
            and np.allclose(w_hat, ref, atol=1e-8)):
      return False
  return True


def _check_vq_assign(stream: RngStream) -> bool:
  rng = stream.generator()
  cb = Codebook(rng.standard_normal((8, 2)))
  for _ in range(200):
    a = rng.standard_normal((2, 2))
    h_sub = a @ a.T + 0.1 * np.eye(2)
    x = rng.standard_normal(2) * 2
    if gptvq_assign(x, cb, h_sub) != vq_assign_scan(x, cb, h_sub):
      return False
  return True


def _check_pareto(stream: RngStream) -> bool:
  for k in range(10):
    recs = random_records(stream.derive(k), 50)
    for axis in ("MT", "CT"):
      if pareto_frontier(recs, axis) != pareto_pairwise(recs, axis):
        return False
  return True


SELFTEST_CHECKS: Dict[str, Callable[[RngStream], bool]] = {
  "uniform_roundtrip": _check_roundtrip,
  "fp_grid_nearest": _check_fp_grid,
  "gptq_vs_exhaustive": _check_gptq,
  "gptvq_assignment": _check_vq_assign,
  "pareto_dominance": _check_pareto,
}


def run_selftest(seed: int = 0) -> Dict[str, bool]:
  root = RngStream(seed)
  results = {}
  for (k, (name, check)) in enumerate(SELFTEST_CHECKS.items()):
    results[name] = bool(check(root.derive(k)))
    logger.info("selftest %s: %s", name,
                "ok" if results[name] else "FAILED")
  return results
