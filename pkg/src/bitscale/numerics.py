"""
Deterministic numerical primitives shared by every other module.

Dense matrices are plain `numpy` arrays of `float64`; the helpers here only
pin down the conventions (finite entries, row-major 2-D shape) and wrap the
`scipy` routines whose failure modes the rest of the package relies on.

All randomness in the package flows through `RngStream`: a counter-based
Philox-4x64 generator keyed by `(seed, stream_id)`. The key layout is

  key = seed + 2**64 * stream_id        (128 bit)
  counter = counter                      (256 bit block counter)

which makes every stream reproducible on any platform and lets parallel
workers draw from disjoint streams without coordinating.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, optimize, stats

from .errors import (
  NotPositiveDefinite, LengthMismatch, DegenerateInput, InvalidSpec)


logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]

_U64 = (1 << 64) - 1


# =============================================================================


def as_matrix(data: ArrayLike) -> Matrix:
  """
  Copy `data` into a read-only, finite, two-dimensional `float64` array.
  Vectors become a single row.
  """
  m = np.array(data, dtype=np.float64, copy=True)
  if m.ndim == 1:
    m = m.reshape(1, -1)
  if m.ndim != 2:
    raise InvalidSpec(f"expected a matrix, got shape {m.shape}")
  if not np.all(np.isfinite(m)):
    raise InvalidSpec("matrix entries must be finite")
  m.setflags(write=False)
  return m


# =============================================================================


@dataclass(frozen=True, slots=True)
class RngStream:
  """
  Seeded, splittable pseudo-random stream.

  Attributes
  ----------

  seed, stream_id: int
    Together form the 128-bit Philox key. Distinct `stream_id`s under the
    same seed give statistically independent sequences.

  counter: int
    Starting block counter. Two streams that differ only in `counter` are
    offsets into the same sequence.
  """
  seed: int
  stream_id: int = 0
  counter: int = 0

  def __post_init__(self):
    for f in (self.seed, self.stream_id, self.counter):
      if not isinstance(f, (int, np.integer)) or f < 0:
        raise InvalidSpec("RngStream fields must be non-negative integers")

  def generator(self) -> np.random.Generator:
    key = (int(self.seed) & _U64) | ((int(self.stream_id) & _U64) << 64)
    return np.random.Generator(
      np.random.Philox(key=key, counter=int(self.counter)))

  def derive(self, *labels: int) -> "RngStream":
    """
    Child stream identified by a path of non-negative integer labels.
    """
    entropy = [int(self.seed) & _U64, int(self.stream_id) & _U64]
    entropy.extend(int(lbl) for lbl in labels)
    sid = np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0]
    return RngStream(self.seed, int(sid))

  def advanced(self, blocks: int) -> "RngStream":
    return RngStream(self.seed, self.stream_id, self.counter + blocks)


def gaussian(stream: RngStream, n: int) -> NDArray[np.float64]:
  return stream.generator().standard_normal(n)


def uniform(stream: RngStream, n: int) -> NDArray[np.float64]:
  return stream.generator().random(n)


# =============================================================================


def cholesky(a: ArrayLike) -> Matrix:
  """
  Lower-triangular `L` with `L @ L.T == a`.

  Raises `NotPositiveDefinite` when a pivot is non-positive; the caller owns
  the decision to damp.
  """
  a = np.asarray(a, dtype=np.float64)
  if a.ndim != 2 or a.shape[0] != a.shape[1]:
    raise InvalidSpec(f"cholesky needs a square matrix, got {a.shape}")
  tol = 1e-10 * max(1.0, float(np.max(np.abs(a), initial=0.0)))
  if np.max(np.abs(a - a.T), initial=0.0) > tol:
    raise InvalidSpec("cholesky needs a symmetric matrix")
  try:
    return linalg.cholesky(a, lower=True, check_finite=True)
  except linalg.LinAlgError as exc:
    raise NotPositiveDefinite(str(exc)) from exc


def spd_inverse(a: ArrayLike) -> Matrix:
  """
  Inverse of a symmetric positive definite matrix through its Cholesky
  factor.
  """
  low = cholesky(a)
  eye = np.eye(low.shape[0])
  inv = linalg.cho_solve((low, True), eye)
  return (inv + inv.T) / 2


# =============================================================================


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
  """
  Spearman rank correlation with average ranks for ties.
  """
  x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
  if x.shape != y.shape or x.ndim != 1:
    raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
  if x.size < 3:
    raise DegenerateInput("spearman_rho needs at least 3 points")
  if np.ptp(x) == 0 or np.ptp(y) == 0:
    raise DegenerateInput("spearman_rho of a constant sequence")
  rx, ry = stats.rankdata(x), stats.rankdata(y)
  rho = np.corrcoef(rx, ry)[0, 1]
  return float(np.clip(rho, -1.0, 1.0))


# =============================================================================


def linear_lstsq(a: ArrayLike, y: ArrayLike) -> Tuple[NDArray, float]:
  """
  Least-squares solution of `a @ beta = y` and the residual RMS.
  """
  a, y = np.asarray(a, dtype=np.float64), np.asarray(y, dtype=np.float64)
  beta, *_ = np.linalg.lstsq(a, y, rcond=None)
  resid = y - a @ beta
  return beta, float(np.sqrt(np.mean(resid ** 2)))


def refine_scalar(
  f: Callable[[float], float], lo: float, hi: float, xatol: float = 1e-10
) -> Tuple[float, float]:
  """
  Bounded scalar minimization (golden-section / parabolic, Brent) on
  `[lo, hi]`. Returns `(argmin, min)`.
  """
  if hi <= lo:
    return lo, f(lo)
  res = optimize.minimize_scalar(
    f, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
  return float(res.x), float(res.fun)
