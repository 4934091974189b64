"""
Noise-tolerance experiments on the toy pipelines.

Single-step sweep: perturb one step's feature at decreasing SNR and compare
the final output with the clean run of the same seed. Multi-step protocol:
perturb the first steps at one SNR and follow how far each step's
reconstruction drifts from the clean trajectory.

Within a seed every SNR level reuses the same noise draw, so levels differ
in intensity only.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Sequence, Tuple

import numpy as np
from multipledispatch import dispatch

from ..effects import ValueSyntax
from ..errors import DegenerateInput, InvalidSpec
from ..genmodels.ar import ArGeneration
from ..genmodels.diffusion import DiffusionSample
from ..genmodels.pipelines import DiscretePipeline
from ..numerics import spearman_rho
from ..reporting import new_figure, save_svg, write_csv
from ..runners import ReconstructionTracer, handle
from .noise import NoiseInjector, NoiseSpec


logger = logging.getLogger(__name__)

_namespace = {}
dispatch = partial(dispatch, namespace=_namespace)

LEVEL_RTOL = 1e-6


# =============================================================================


@dispatch(ArGeneration, ArGeneration)
def output_loss(clean, noisy) -> float:
  """
  Token Hamming distance.
  """
  return float(np.count_nonzero(clean.tokens != noisy.tokens))


@dispatch(DiffusionSample, DiffusionSample)
def output_loss(clean, noisy) -> float:  # noqa: F811
  """
  Euclidean distance between the final samples.
  """
  return float(np.linalg.norm(clean.x0 - noisy.x0))


def distinct_levels(values: Sequence[float], rtol: float = LEVEL_RTOL) -> int:
  """
  Number of plateaus among `values`: sorted neighbours closer than `rtol`
  (relative) share a level.
  """
  v = np.sort(np.asarray(values, dtype=np.float64))
  if v.size == 0:
    return 0
  gaps = np.diff(v) > rtol * np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
  return 1 + int(np.count_nonzero(gaps))


def rho_or_zero(x: Sequence[float], y: Sequence[float]) -> float:
  """
  Spearman correlation, reported as 0 when either side is constant.
  """
  try:
    return spearman_rho(x, y)
  except DegenerateInput:
    return 0.0


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class ToleranceCurve(ValueSyntax):
  """
  Attributes
  ----------

  loss: np.ndarray
    Mean final-output loss per SNR level, min-max normalized across levels
    (all zeros when every level has the same loss).

  raw_loss, loss_std: np.ndarray
    Unnormalized mean, and the per-seed spread on the normalized scale.

  spearman_rho: float
    Rank correlation between noise intensity (`-snr_db`) and `loss`.
  """
  snr_db: np.ndarray
  loss: np.ndarray
  raw_loss: np.ndarray
  loss_std: np.ndarray
  n_seeds: int
  step_index: int
  spearman_rho: float
  distinct_loss_levels: int

  def __post_init__(self):
    n = self.snr_db.shape
    if not self.loss.shape == self.raw_loss.shape == self.loss_std.shape == n:
      raise InvalidSpec("curve arrays must have equal lengths")

  def write_csv(self, path):
    return write_csv(
      path, ("snr_db", "loss_mean", "loss_std", "n_seeds"),
      ((float(s), float(m), float(d), self.n_seeds)
       for (s, m, d) in zip(self.snr_db, self.loss, self.loss_std)))


def single_step_sweep(
  pipeline, step_index: int, snr_list: Sequence[float], n_seeds: int,
  first_seed: int = 0
) -> ToleranceCurve:
  snr = np.asarray(snr_list, dtype=np.float64)
  if snr.size < 3 or not np.all(np.diff(snr) < 0):
    raise InvalidSpec("snr_list needs >= 3 strictly decreasing levels")
  if not 0 <= step_index < pipeline.step_count:
    raise InvalidSpec(f"step_index outside [0, {pipeline.step_count})")
  if n_seeds < 1:
    raise InvalidSpec("n_seeds must be positive")

  raw = np.zeros((snr.size, n_seeds))
  for j in range(n_seeds):
    seed = first_seed + j
    clean = pipeline.run(seed)
    for (i, level) in enumerate(snr):
      spec = NoiseSpec(float(level), {step_index}, seed)
      with handle(NoiseInjector(spec)):
        raw[i, j] = output_loss(clean, pipeline.run(seed))

  mean = raw.mean(axis=1)
  lo, hi = mean.min(), mean.max()
  span = hi - lo
  norm = (raw - lo) / span if span > 0 else np.zeros_like(raw)
  loss = norm.mean(axis=1)
  curve = ToleranceCurve(
    snr, loss, mean, norm.std(axis=1), n_seeds, step_index,
    rho_or_zero(-snr, loss), distinct_levels(mean))
  logger.info("sweep at step %d: rho %.3f, %d levels", step_index,
              curve.spearman_rho, curve.distinct_loss_levels)
  return curve


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class StepTrajectory(ValueSyntax):
  """
  Attributes
  ----------

  per_seed: np.ndarray
    `(n_seeds, steps)` distance between noisy and clean reconstructions.

  injected: int
    Number of leading steps that received noise.
  """
  per_seed: np.ndarray
  injected: int
  snr_db: float

  @property
  def n_seeds(self) -> int:
    return self.per_seed.shape[0]

  @property
  def error_mean(self) -> np.ndarray:
    return self.per_seed.mean(axis=0)

  @property
  def error_std(self) -> np.ndarray:
    return self.per_seed.std(axis=0)

  def write_csv(self, path):
    return write_csv(
      path, ("step", "loss_mean", "loss_std", "n_seeds"),
      ((k, float(m), float(s), self.n_seeds)
       for (k, (m, s)) in enumerate(zip(self.error_mean, self.error_std))))


def injected_step_count(fraction: float, steps: int) -> int:
  return int(math.ceil(fraction * steps - 1e-9))


def traced_run(pipeline, seed: int, *runners) -> np.ndarray:
  tracer = ReconstructionTracer()
  with handle(tracer, *runners):
    pipeline.run(seed)
  return tracer.trajectory()


def multi_step_protocol(
  pipeline, snr_db: float, fraction: float = 0.1, n_seeds: int = 20,
  first_seed: int = 0
) -> StepTrajectory:
  if not 0 < fraction <= 1:
    raise InvalidSpec("fraction must lie in (0, 1]")
  steps = pipeline.step_count
  k = injected_step_count(fraction, steps)
  errors = np.zeros((n_seeds, steps))
  if k > 0:
    for j in range(n_seeds):
      seed = first_seed + j
      clean = traced_run(pipeline, seed)
      spec = NoiseSpec(snr_db, range(k), seed)
      noisy = traced_run(pipeline, seed, NoiseInjector(spec))
      diff = (noisy - clean).reshape(steps, -1)
      errors[j] = np.linalg.norm(diff, axis=1)
  return StepTrajectory(errors, k, float(snr_db))


def post_injection_rho(traj: StepTrajectory) -> float:
  """
  Rank correlation of step index and mean error after the injection window;
  positive when errors keep growing once the noise stops.
  """
  tail = traj.error_mean[traj.injected:]
  if tail.size < 3:
    return 0.0
  return rho_or_zero(np.arange(tail.size), tail)


def final_vs_peak(traj: StepTrajectory) -> np.ndarray:
  """
  Per seed, whether the final error is at most the peak error inside the
  injection window.
  """
  if traj.injected == 0:
    return np.ones(traj.n_seeds, dtype=bool)
  peak = traj.per_seed[:, :traj.injected].max(axis=1)
  return traj.per_seed[:, -1] <= peak


# =============================================================================


def absorption_threshold_db(
  pipeline: DiscretePipeline, seed: int, step_index: int,
  safety: float = 10.0
) -> float:
  """
  SNR above which a perturbation of step `step_index` cannot change the
  greedily decoded token.

  The clean feature `z` lies at distance `m` from the nearest boundary of
  its Voronoi cell. Noise of per-entry power `P` has RMS norm
  `sqrt(d P)`; requiring `safety * sqrt(d P) <= m` gives the bound.
  """
  if pipeline.top_k != 1:
    raise InvalidSpec("absorption is defined for greedy decoding")
  z = pipeline.run(seed).features[step_index]
  c = pipeline.model.codebook.centroids
  d2 = np.sum((c - z) ** 2, axis=1)
  j = int(np.argmin(d2))
  others = np.arange(c.shape[0]) != j
  gap = np.linalg.norm(c[others] - c[j], axis=1)
  margin = float(np.min((d2[others] - d2[j]) / (2 * gap)))
  p_signal = float(np.mean(z * z))
  if margin <= 0:
    return math.inf
  return 10 * math.log10(p_signal * safety ** 2 * z.size / margin ** 2)


# =============================================================================


def plot_sweeps(curves: Sequence[Tuple[str, ToleranceCurve]], path):
  fig = new_figure()
  ax = fig.axes[0]
  for (label, c) in curves:
    finite = np.isfinite(c.snr_db)
    ax.plot(c.snr_db[finite], c.loss[finite], "o-", ms=3,
            label=f"{label} (rho={c.spearman_rho:.2f})")
  ax.invert_xaxis()
  ax.set_xlabel("SNR [dB]")
  ax.set_ylabel("normalized final-output loss")
  ax.legend()
  return save_svg(fig, path)


def plot_trajectories(trajs: Sequence[Tuple[str, StepTrajectory]], path):
  fig = new_figure()
  ax = fig.axes[0]
  for (label, t) in trajs:
    steps = np.arange(t.error_mean.size)
    ax.plot(steps, t.error_mean, ".-", ms=3, label=label)
    ax.axvspan(-0.5, t.injected - 0.5, alpha=0.1)
  ax.set_xlabel("step")
  ax.set_ylabel("reconstruction error")
  ax.legend()
  return save_svg(fig, path)
