"""
Vector quantization of weight matrices with Hessian-aware assignment.

Each row of a weight matrix is cut into `dim`-wide slices along the columns.
Rows are split into `codebooks_per_group` contiguous bands, each with its own
codebook. Column blocks of width `dim` are quantized left to right: every
slice in the block takes the centroid minimizing

  (x - c)^T H_b (x - c)

where `H_b` is the Hessian of the remaining problem restricted to the block,
and the rounding error is propagated to later columns through the upper
Cholesky factor of the inverse Hessian, as in `gptq`.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from ..effects import ValueSyntax
from ..errors import EmptyCluster, InvalidSpec, LengthMismatch
from ..genmodels.codebook import Codebook
from ..numerics import spd_inverse
from .gptq import inverse_cholesky
from .hessian import HessianEstimate, proxy_loss


logger = logging.getLogger(__name__)


# =============================================================================


@dataclass(frozen=True, slots=True)
class VqConfig(ValueSyntax):
  """
  Attributes
  ----------

  dim: int
    Centroid dimension `d`; must divide the column count.

  size: int
    Maximum number of centroids per codebook `M`.

  codebooks_per_group: int
    Number of contiguous row bands, one codebook each.

  em_iters: int
    Lloyd iterations of the Hessian-weighted k-means initialization.
  """
  dim: int = 2
  size: int = 16
  codebooks_per_group: int = 1
  em_iters: int = 10

  def __post_init__(self):
    if min(self.dim, self.size, self.codebooks_per_group) < 1:
      raise InvalidSpec("dim, size and codebooks_per_group must be >= 1")
    if self.em_iters < 0:
      raise InvalidSpec("em_iters must be non-negative")


class VqStep(NamedTuple):
  block: int
  band: int
  slices: np.ndarray
  h_sub: np.ndarray
  indices: np.ndarray


class VqResult(NamedTuple):
  weights: np.ndarray
  codebooks: List[Codebook]
  proxy_loss: float
  trace: List[VqStep]


# =============================================================================


def _weighted_costs(
  points: np.ndarray, centroids: np.ndarray, hessians: np.ndarray
) -> np.ndarray:
  """
  `(n, M)` matrix of `(x_n - c_m)^T H_n (x_n - c_m)`; `hessians` is either a
  single `(d, d)` matrix or one per point.
  """
  diff = points[:, None, :] - centroids[None, :, :]
  if hessians.ndim == 2:
    return np.einsum("nmd,de,nme->nm", diff, hessians, diff)
  return np.einsum("nmd,nde,nme->nm", diff, hessians, diff)


def gptvq_assign(x: ArrayLike, codebook: Codebook, h_sub: ArrayLike) -> int:
  x = np.asarray(x, dtype=np.float64).reshape(1, -1)
  h_sub = np.asarray(h_sub, dtype=np.float64)
  if x.shape[1] != codebook.dim or h_sub.shape != (codebook.dim,) * 2:
    raise LengthMismatch("query, codebook and h_sub dimensions differ")
  return int(np.argmin(_weighted_costs(x, codebook.centroids, h_sub)[0]))


def _assign(points, centroids, hessians) -> Tuple[np.ndarray, np.ndarray]:
  costs = _weighted_costs(points, centroids, hessians)
  idx = np.argmin(costs, axis=1)
  return idx, costs[np.arange(points.shape[0]), idx]


def _farthest_points(points: np.ndarray, count: int) -> np.ndarray:
  chosen = [0]
  dist = np.linalg.norm(points - points[0], axis=1)
  for _ in range(count - 1):
    nxt = int(np.argmax(dist))
    chosen.append(nxt)
    dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
  return points[chosen].copy()


def _distinct(centroids: np.ndarray) -> np.ndarray:
  _, first = np.unique(centroids, axis=0, return_index=True)
  return centroids[np.sort(first)]


def hessian_kmeans(
  points: ArrayLike, hessians: ArrayLike, size: int, iters: int,
  init: ArrayLike | None = None
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
  """
  Lloyd iterations under per-point quadratic forms.

  The E-step assigns each point to its cheapest centroid (lowest index on
  ties); the M-step moves each centroid to `(sum H_i)^-1 sum H_i x_i` over
  its members. A centroid left without members is re-seeded at the point of
  largest current cost. When the distinct points fit in `size`, they are the
  codebook and no iterations run.

  Returns `(centroids, assignment, history)`, where `history` holds the
  objective after each E-step and never increases.
  """
  x = np.asarray(points, dtype=np.float64)
  hs = np.asarray(hessians, dtype=np.float64)
  if hs.ndim == 2:
    hs = np.broadcast_to(hs, (x.shape[0],) + hs.shape)
  unique = np.unique(x, axis=0)
  if init is not None:
    c = np.array(init, dtype=np.float64)
  elif unique.shape[0] <= size:
    idx, cost = _assign(x, unique, hs)
    return unique, idx, [float(cost.sum())]
  else:
    c = _farthest_points(unique, size)

  idx, cost = _assign(x, c, hs)
  history = [float(cost.sum())]
  for it in range(iters):
    reseed = np.array(cost)
    for k in range(c.shape[0]):
      members = idx == k
      if not np.any(members):
        j = int(np.argmax(reseed))
        logger.debug("%s", EmptyCluster(
          f"iteration {it}: centroid {k} empty, re-seeded at point {j}"))
        c[k] = x[j]
        reseed[j] = -np.inf
        continue
      a = hs[members].sum(axis=0)
      b = np.einsum("nde,ne->d", hs[members], x[members])
      c[k] = np.linalg.solve(a, b)
    idx, cost = _assign(x, c, hs)
    history.append(float(cost.sum()))

  c = _distinct(c)
  idx, cost = _assign(x, c, hs)
  return c, idx, history


# =============================================================================


def _block_hessians(u: np.ndarray, dim: int) -> List[np.ndarray]:
  out = []
  for b0 in range(0, u.shape[0], dim):
    u_bb = u[b0:b0 + dim, b0:b0 + dim]
    out.append(spd_inverse(u_bb.T @ u_bb))
  return out


def gptvq(
  w: ArrayLike, h: HessianEstimate, cfg: VqConfig,
  codebooks: Sequence[Codebook] | None = None
) -> VqResult:
  """
  Arguments:
  ----------
  codebooks: Sequence[Codebook] | None
    Fixed codebooks, one per row band. When omitted they are fitted with
    `hessian_kmeans` on the original weight slices.
  """
  w0 = np.atleast_2d(np.asarray(w, dtype=np.float64))
  rows, cols = w0.shape
  d = cfg.dim
  if cols != h.dim:
    raise LengthMismatch(f"weights have {cols} columns, Hessian is {h.dim}")
  if cols % d:
    raise InvalidSpec(f"centroid dim {d} does not divide {cols} columns")
  if cfg.codebooks_per_group > rows:
    raise InvalidSpec("more codebooks than weight rows")

  u = inverse_cholesky(h)
  h_subs = _block_hessians(u, d)
  bands = np.array_split(np.arange(rows), cfg.codebooks_per_group)
  nblocks = cols // d

  if codebooks is None:
    codebooks = []
    for band in bands:
      slices = w0[band].reshape(len(band), nblocks, d)
      pts = slices.transpose(1, 0, 2).reshape(-1, d)
      hs = np.repeat(np.stack(h_subs), len(band), axis=0)
      c, _, hist = hessian_kmeans(pts, hs, cfg.size, cfg.em_iters)
      logger.debug("band of %d rows: k-means objective %s",
                   len(band), hist[-1])
      codebooks.append(Codebook(c))
  codebooks = list(codebooks)
  if len(codebooks) != len(bands) or any(cb.dim != d for cb in codebooks):
    raise InvalidSpec("need one codebook of the centroid dim per row band")

  work = w0.copy()
  q = np.zeros_like(work)
  trace = []
  for blk in range(nblocks):
    sl = slice(blk * d, (blk + 1) * d)
    for (k, band) in enumerate(bands):
      pts = work[band, sl].copy()
      idx, _ = _assign(pts, codebooks[k].centroids, h_subs[blk])
      q[band, sl] = codebooks[k].centroids[idx]
      trace.append(VqStep(blk, k, pts, h_subs[blk], idx))
    if sl.stop < cols:
      g = linalg.solve_triangular(
        u[sl, sl], (work[:, sl] - q[:, sl]).T, trans=1).T
      work[:, sl.stop:] -= g @ u[sl, sl.stop:]

  loss = proxy_loss(w0, q, h)
  logger.debug("gptvq %dx%d d=%d: proxy loss %.6g", rows, cols, d, loss)
  return VqResult(q, codebooks, loss, trace)
