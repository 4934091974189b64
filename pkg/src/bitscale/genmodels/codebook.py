"""
Finite codebooks: the toy tokenizer's vocabulary and the centroid tables of
vector quantization.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist, pdist

from ..effects import ValueSyntax
from ..errors import IndexOutOfRange, InvalidSpec
from ..numerics import RngStream, gaussian


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class Codebook(ValueSyntax):
  """
  `K` pairwise distinct centroids of dimension `d`. Tokens are 0-based row
  indices into `centroids`.
  """
  centroids: np.ndarray

  def __post_init__(self):
    c = np.array(self.centroids, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
      raise InvalidSpec(f"centroids must be a (K, d) matrix, got {c.shape}")
    if not np.all(np.isfinite(c)):
      raise InvalidSpec("centroids must be finite")
    if c.shape[0] > 1 and np.min(pdist(c)) == 0:
      raise InvalidSpec("centroids must be pairwise distinct")
    c.setflags(write=False)
    object.__setattr__(self, "centroids", c)

  @property
  def size(self) -> int:
    return self.centroids.shape[0]

  @property
  def dim(self) -> int:
    return self.centroids.shape[1]

  def neighbor_gaps(self) -> np.ndarray:
    """
    Distance from each centroid to its nearest other centroid.
    """
    if self.size == 1:
      return np.full(1, np.inf)
    d = cdist(self.centroids, self.centroids)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)

  def min_gap(self) -> float:
    return float(self.neighbor_gaps().min())


def build_codebook(size: int, dim: int, seed: int) -> Codebook:
  """
  Seeded Gaussian candidates, thinned to `size` centroids by farthest-point
  selection starting from the first candidate.
  """
  if size < 2 or dim < 1:
    raise InvalidSpec("codebook needs at least two centroids of dim >= 1")
  pool = gaussian(RngStream(seed).derive(0xC0DE), 4 * size * dim)
  pool = pool.reshape(4 * size, dim)
  chosen = [0]
  dist = np.linalg.norm(pool - pool[0], axis=1)
  for _ in range(size - 1):
    nxt = int(np.argmax(dist))
    chosen.append(nxt)
    dist = np.minimum(dist, np.linalg.norm(pool - pool[nxt], axis=1))
  return Codebook(pool[chosen].copy())


# =============================================================================


def vq_encode(v: ArrayLike, cb: Codebook) -> int | np.ndarray:
  """
  Nearest centroid in Euclidean distance, lowest index on ties. A single
  vector gives an `int`; a `(n, d)` batch gives an index array.
  """
  v = np.asarray(v, dtype=np.float64)
  single = v.ndim == 1
  diff = np.atleast_2d(v)[:, None, :] - cb.centroids[None, :, :]
  idx = np.argmin(np.sum(diff * diff, axis=-1), axis=-1)
  return int(idx[0]) if single else idx


def vq_decode(token: int | ArrayLike, cb: Codebook) -> np.ndarray:
  t = np.asarray(token)
  if not np.issubdtype(t.dtype, np.integer):
    raise IndexOutOfRange(f"tokens must be integers, got {t.dtype}")
  if np.any(t < 0) or np.any(t >= cb.size):
    raise IndexOutOfRange(f"token outside [0, {cb.size})")
  return np.array(cb.centroids[t])
