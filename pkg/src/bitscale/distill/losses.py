"""
Distribution-matching objectives between a teacher distribution `t` and a
student distribution `p = softmax(z)`, with closed-form gradients in the
student logits `z`.

Inside logarithms probabilities are floored at `EPS`; terms whose weight is
exactly zero vanish (`0 log 0 = 0`).

The hybrid `topkld` objective splits each position's vocabulary into the
teacher's `K` most probable tokens (lowest index first on ties) and the
rest, and sums reverse-KL terms over the former and forward-KL terms over
the latter:

  sum_{i in top}  p_i log(p_i / t_i)  +  sum_{i not in top} t_i log(t_i / p_i)

The partial sums are not divergences on their own, so the total may be
negative. `K = 0` gives forward KL and `K = V` reverse KL.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize, special

from ..effects import ValueSyntax
from ..errors import InvalidSpec, LengthMismatch


logger = logging.getLogger(__name__)

EPS = 1e-12

LOSS_KINDS = ("forward_kld", "reverse_kld", "topkld", "mse", "js")


# =============================================================================


def _floor(p: np.ndarray) -> np.ndarray:
  return np.maximum(p, EPS)


def _probs(p: ArrayLike) -> np.ndarray:
  p = np.asarray(p, dtype=np.float64)
  if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1) > 1e-9):
    raise InvalidSpec("expected probability vectors")
  return p


def forward_kld(p_t: ArrayLike, p_s: ArrayLike) -> float:
  """
  `KL(p_t || p_s)`.
  """
  t, s = _probs(p_t), _probs(p_s)
  if t.shape != s.shape:
    raise LengthMismatch(f"{t.shape} vs {s.shape}")
  return float(np.sum(
    special.xlogy(t, _floor(t)) - special.xlogy(t, _floor(s))))


def reverse_kld(p_t: ArrayLike, p_s: ArrayLike) -> float:
  """
  `KL(p_s || p_t)`.
  """
  return forward_kld(p_s, p_t)


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class DistillBatch(ValueSyntax):
  """
  Attributes
  ----------

  teacher_probs, student_logits: np.ndarray
    `(T, V)` arrays; one row per sequence position.

  top_k: int
    Size of the reverse-KL set of `topkld`, in `[0, V]`.
  """
  teacher_probs: np.ndarray
  student_logits: np.ndarray
  top_k: int = 0

  def __post_init__(self):
    t = np.atleast_2d(np.asarray(self.teacher_probs, dtype=np.float64))
    z = np.atleast_2d(np.asarray(self.student_logits, dtype=np.float64))
    if t.shape != z.shape or t.ndim != 2:
      raise LengthMismatch(f"teacher {t.shape} vs student {z.shape}")
    _probs(t)
    if not 0 <= self.top_k <= t.shape[1]:
      raise InvalidSpec(f"top_k must lie in [0, {t.shape[1]}]")
    object.__setattr__(self, "teacher_probs", t)
    object.__setattr__(self, "student_logits", z)

  @property
  def student_probs(self) -> np.ndarray:
    return special.softmax(self.student_logits, axis=-1)

  def top_mask(self) -> np.ndarray:
    """
    Boolean `(T, V)` mask of each position's teacher top-`K`.
    """
    t = self.teacher_probs
    order = np.argsort(-t, axis=-1, kind="stable")[:, :self.top_k]
    mask = np.zeros(t.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=-1)
    return mask

  def with_logits(self, z: np.ndarray) -> "DistillBatch":
    return DistillBatch(self.teacher_probs, z, self.top_k)


# =============================================================================


def _topkld_terms(t, p, mask) -> Tuple[float, np.ndarray]:
  tf, pf = _floor(t), _floor(p)
  rev = special.xlogy(p, pf) - special.xlogy(p, tf)
  fwd = special.xlogy(t, tf) - special.xlogy(t, pf)
  loss = float(np.sum(np.where(mask, rev, fwd)))
  live = p > EPS
  g_rev = np.log(pf) - np.log(tf) + live
  g_fwd = -np.where(live, t / pf, 0.0)
  return loss, np.where(mask, g_rev, g_fwd)


def _mse_terms(t, p, _) -> Tuple[float, np.ndarray]:
  d = p - t
  return float(np.sum(d * d)), 2.0 * d


def _js_terms(t, p, _) -> Tuple[float, np.ndarray]:
  m = (t + p) / 2
  mf = _floor(m)
  loss = 0.5 * np.sum(special.xlogy(t, _floor(t)) - special.xlogy(t, mf)) \
    + 0.5 * np.sum(special.xlogy(p, _floor(p)) - special.xlogy(p, mf))
  g = 0.5 * (np.log(_floor(p)) - np.log(mf))
  return float(loss), np.where(p > EPS, g, 0.0)


_TERMS: Dict[str, Callable] = {
  "topkld": _topkld_terms,
  "mse": _mse_terms,
  "js": _js_terms,
}


def _mask_for(kind: str, batch: DistillBatch) -> np.ndarray:
  if kind == "forward_kld":
    return np.zeros(batch.teacher_probs.shape, dtype=bool)
  if kind == "reverse_kld":
    return np.ones(batch.teacher_probs.shape, dtype=bool)
  return batch.top_mask()


def loss_and_grad(kind: str, batch: DistillBatch) -> Tuple[float, np.ndarray]:
  """
  Total objective over positions and its gradient w.r.t. the student
  logits, chained through the softmax:

    dL/dz_j = p_j (g_j - sum_i g_i p_i),   g = dL/dp
  """
  if kind not in LOSS_KINDS:
    raise InvalidSpec(f"unknown loss kind {kind!r}")
  terms = _TERMS.get(kind, _topkld_terms)
  p = batch.student_probs
  loss, g = terms(batch.teacher_probs, p, _mask_for(kind, batch))
  grad = p * (g - np.sum(g * p, axis=-1, keepdims=True))
  return loss, grad


def topkld(batch: DistillBatch) -> float:
  return loss_and_grad("topkld", batch)[0]


def topkld_grad(batch: DistillBatch) -> np.ndarray:
  return loss_and_grad("topkld", batch)[1]


def distill_loss(kind: str, batch: DistillBatch) -> float:
  return loss_and_grad(kind, batch)[0]


def distill_grad(kind: str, batch: DistillBatch) -> np.ndarray:
  return loss_and_grad(kind, batch)[1]


# =============================================================================


class GaussianFit(NamedTuple):
  mean: float
  std: float
  loss: float


def bimodal_target(
  bins: int = 121, span: float = 6.0, modes: float = 2.0, width: float = 0.5
) -> Tuple[np.ndarray, np.ndarray]:
  """
  Bin centers and the discretized equal mixture of two Gaussians at
  `+-modes`.
  """
  x = np.linspace(-span, span, bins)
  dens = np.exp(-(x - modes) ** 2 / (2 * width ** 2)) \
    + np.exp(-(x + modes) ** 2 / (2 * width ** 2))
  return x, dens / dens.sum()


def fit_gaussian_to_mixture(
  kind: str, top_k: int = 0, bins: int = 121, init_mean: float = 0.5,
  init_std: float = 1.0
) -> GaussianFit:
  """
  Fit one discretized Gaussian to a two-mode target by minimizing the
  selected objective over `(mean, log std)`.

  Forward KL spreads the fit over both modes, reverse KL locks onto the mode
  nearest `init_mean`; `topkld` with a small `K` falls in between.
  """
  x, t = bimodal_target(bins)

  def objective(theta):
    mu, log_sd = theta
    z = -(x - mu) ** 2 / (2 * np.exp(2 * log_sd))
    loss, gz = loss_and_grad(kind, DistillBatch(t, z, top_k))
    gz = gz[0]
    d_mu = np.sum(gz * (x - mu)) / np.exp(2 * log_sd)
    d_sd = np.sum(gz * (x - mu) ** 2) / np.exp(2 * log_sd)
    return loss, np.array([d_mu, d_sd])

  res = optimize.minimize(
    objective, np.array([init_mean, np.log(init_std)]), jac=True,
    method="L-BFGS-B", bounds=[(-6.0, 6.0), (np.log(0.05), np.log(6.0))])
  logger.debug("%s fit: %s", kind, res.message)
  return GaussianFit(float(res.x[0]), float(np.exp(res.x[1])), float(res.fun))
