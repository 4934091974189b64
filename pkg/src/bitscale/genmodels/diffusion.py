"""
Iterative denoising over points in the plane.

Noise levels follow the DDPM linear schedule rescaled to `T` steps. With
`a_t` the cumulative signal level and `b_t = sqrt(1 - a_t**2)` the
cumulative noise level (`a_0 = 1`, `b_0 = 0`), a noisy point is
`x_t = a_t x_0 + b_t eps`. One reverse step from `s` to `s - 1` is

  x0_hat  = (x_s - b_s eps_hat) / a_s
  x_{s-1} = a_{s-1} x0_hat + sqrt(b_{s-1}**2 - sigma_s**2) eps_hat
            + sigma_s z

with `sigma_s = b_{s-1} beta_s / b_s` in `ddpm` mode and `0` in `ddim` mode.
"""

import logging
import math
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np
import torch
from scipy.spatial.distance import cdist
from torch import nn
from torch.nn import functional as F

from ..effects import ValueSyntax, begin_step, feature, reconstruction
from ..errors import DivergedTraining, InvalidSpec
from ..numerics import RngStream, gaussian
from .observe import observing


logger = logging.getLogger(__name__)

DENOISER_LAYERS = ("fc1", "fc2", "out")

_INIT, _BATCHES, _START, _STEP = 21, 22, 23, 24


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class DiffusionSchedule(ValueSyntax):
  """
  Attributes
  ----------

  steps: int
    Number of reverse steps `T`.

  mode: str
    `"ddpm"` (stochastic) or `"ddim"` (deterministic).

  alpha, beta, abar, bbar, sigma: np.ndarray
    Per-step levels indexed `0..T`; index 0 is the clean end.
  """
  steps: int
  mode: str = "ddim"
  alpha: np.ndarray = field(init=False)
  beta: np.ndarray = field(init=False)
  abar: np.ndarray = field(init=False)
  bbar: np.ndarray = field(init=False)
  sigma: np.ndarray = field(init=False)

  def __post_init__(self):
    if self.steps < 1:
      raise InvalidSpec("schedule needs at least one step")
    if self.mode not in ("ddpm", "ddim"):
      raise InvalidSpec(f"unknown sampling mode {self.mode!r}")
    t = self.steps
    ddpm = np.linspace(1e-4 * 1000 / t, 0.02 * 1000 / t, t)
    ddpm = np.minimum(ddpm, 0.999)
    alpha = np.concatenate([[1.0], np.sqrt(1 - ddpm)])
    beta = np.concatenate([[0.0], np.sqrt(ddpm)])
    abar = np.cumprod(alpha)
    bbar = np.sqrt(1 - abar ** 2)
    sigma = np.zeros(t + 1)
    if self.mode == "ddpm":
      sigma[1:] = bbar[:-1] * beta[1:] / bbar[1:]
    for (name, v) in zip(("alpha", "beta", "abar", "bbar", "sigma"),
                         (alpha, beta, abar, bbar, sigma)):
      v.setflags(write=False)
      object.__setattr__(self, name, v)

  def noised(self, x0: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    return self.abar[t] * x0 + self.bbar[t] * eps


class Denoiser(Protocol):

  def predict(self, x: np.ndarray, t: int) -> np.ndarray:
    """
    Predicted noise for points `x` (shape `(n, d)`) at noise level `t`.
    """


# =============================================================================


@dataclass(frozen=True, slots=True)
class DenoiserConfig(ValueSyntax):
  dim: int = 2
  width: int = 64
  time_dim: int = 16
  steps: int = 50

  def __post_init__(self):
    if min(self.dim, self.width, self.time_dim, self.steps) < 1:
      raise InvalidSpec("denoiser dimensions must be positive")


class ToyDenoiser(nn.Module):
  """
  Two hidden layers over the point and a sinusoidal embedding of `t / T`.
  The output layer starts near zero, so the untrained model predicts
  roughly no noise.
  """

  def __init__(self, cfg: DenoiserConfig):
    super().__init__()
    self.config = cfg
    self.fc1 = nn.Linear(cfg.dim + cfg.time_dim, cfg.width)
    self.fc2 = nn.Linear(cfg.width, cfg.width)
    self.out = nn.Linear(cfg.width, cfg.dim)
    with torch.no_grad():
      self.out.weight.mul_(1e-3)
      self.out.bias.zero_()
    half = cfg.time_dim // 2
    self.register_buffer("freqs", torch.exp(
      -math.log(1000.0) * torch.arange(half, dtype=torch.float64) / half))

  def embed_time(self, t: torch.Tensor) -> torch.Tensor:
    arg = (t.to(torch.float64)[:, None] / self.config.steps) \
      * self.freqs * 1000.0
    emb = torch.cat([arg.sin(), arg.cos()], dim=-1)
    if emb.shape[1] < self.config.time_dim:
      emb = F.pad(emb, (0, self.config.time_dim - emb.shape[1]))
    return emb

  def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    h = torch.cat([x, self.embed_time(t)], dim=-1)
    h = F.silu(self.fc1(h))
    h = F.silu(self.fc2(h))
    return self.out(h)

  def predict(self, x: np.ndarray, t: int) -> np.ndarray:
    x = torch.as_tensor(np.atleast_2d(x), dtype=torch.float64)
    with torch.no_grad():
      eps = self.forward(x, torch.full((x.shape[0],), t))
    return eps.numpy()


def new_denoiser(cfg: DenoiserConfig, seed: int) -> ToyDenoiser:
  with torch.random.fork_rng(devices=[]):
    stream = RngStream(seed).derive(_INIT).generator()
    torch.manual_seed(int(stream.integers(0, 2 ** 62)))
    model = ToyDenoiser(cfg).double()
  return model


@dataclass(frozen=True, slots=True, eq=False)
class GaussianOracle:
  """
  Exact noise predictor for data distributed as `N(mean, std**2 I)`.
  """
  mean: np.ndarray
  std: float
  schedule: DiffusionSchedule

  def predict(self, x: np.ndarray, t: int) -> np.ndarray:
    a, b = self.schedule.abar[t], self.schedule.bbar[t]
    return b * (np.atleast_2d(x) - a * self.mean) / (a * a * self.std ** 2
                                                      + b * b)


# =============================================================================


def _batch_eps(model, sched, x0, rows_rng, noise_rng):
  t = rows_rng.integers(1, sched.steps + 1, x0.shape[0])
  eps = noise_rng.standard_normal(x0.shape)
  xt = sched.abar[t][:, None] * x0 + sched.bbar[t][:, None] * eps
  pred = model(torch.as_tensor(xt), torch.as_tensor(t))
  return F.mse_loss(pred, torch.as_tensor(eps))


def denoiser_mse(
  model: ToyDenoiser, data: np.ndarray, sched: DiffusionSchedule, seed: int
) -> float:
  """
  Noise-prediction MSE on `data` at uniformly drawn steps; 1 for a model
  that predicts zero.
  """
  root = RngStream(seed).derive(_BATCHES, 1)
  with torch.no_grad():
    return float(_batch_eps(model, sched, np.asarray(data),
                            root.derive(0).generator(),
                            root.derive(1).generator()))


def train_toy_denoiser(
  data: np.ndarray, cfg: DenoiserConfig, seed: int, steps: int = 1000,
  learning_rate: float = 2e-3, batch_size: int = 128
) -> ToyDenoiser:
  sched = DiffusionSchedule(cfg.steps)
  data = np.asarray(data, dtype=np.float64)
  model = new_denoiser(cfg, seed)
  opt = torch.optim.Adam(model.parameters(), lr=learning_rate)
  root = RngStream(seed).derive(_BATCHES, 0)
  rows_rng = root.derive(0).generator()
  noise_rng = root.derive(1).generator()
  model.train()
  for step in range(steps):
    rows = rows_rng.integers(0, data.shape[0], min(batch_size, len(data)))
    loss = _batch_eps(model, sched, data[rows], rows_rng, noise_rng)
    if not torch.isfinite(loss):
      raise DivergedTraining(f"denoiser loss {loss.item()} at step {step}")
    opt.zero_grad()
    loss.backward()
    opt.step()
    if step % 200 == 0:
      logger.debug("denoiser step %d: loss %.4f", step, loss.item())
  model.eval()
  return model


# =============================================================================


def _reverse_step(x, s, denoiser, sched, stream):
  if not 1 <= s <= sched.steps:
    raise InvalidSpec(f"step {s} outside [1, {sched.steps}]")
  step = sched.steps - s
  begin_step(step)
  eps = np.asarray(denoiser.predict(x, s), dtype=np.float64).reshape(x.shape)
  eps = np.asarray(feature(step, eps), dtype=np.float64)
  x0_hat = (x - sched.bbar[s] * eps) / sched.abar[s]
  sig = sched.sigma[s]
  dir_coef = math.sqrt(max(sched.bbar[s - 1] ** 2 - sig ** 2, 0.0))
  x_prev = sched.abar[s - 1] * x0_hat + dir_coef * eps
  if sig > 0:
    x_prev = x_prev + sig * gaussian(stream, x.size).reshape(x.shape)
  reconstruction(step, x_prev)
  return x_prev, eps


def diffusion_step(
  x_next: np.ndarray, t_next: int, denoiser: Denoiser,
  sched: DiffusionSchedule, stream: RngStream
) -> np.ndarray:
  """
  One reverse step from level `t_next` to `t_next - 1`. Announced to the
  pipeline hooks as step `T - t_next`, with the predicted noise as the
  feature and the new point as the reconstruction.
  """
  x = np.asarray(x_next, dtype=np.float64)
  return _reverse_step(x, t_next, denoiser, sched, stream)[0]


class DiffusionSample(NamedTuple):
  x0: np.ndarray
  trajectory: np.ndarray
  features: np.ndarray


def diffusion_sample(
  denoiser: Denoiser, sched: DiffusionSchedule, seed: int,
  num_points: int = 1, dim: int = 2, x_start: np.ndarray | None = None
) -> DiffusionSample:
  """
  Run all `T` reverse steps from Gaussian noise (or `x_start`). The
  trajectory holds the points after each step, the features the noise
  predictions that produced them.
  """
  root = RngStream(seed)
  if x_start is None:
    x = gaussian(root.derive(_START), num_points * dim)
    x = x.reshape(num_points, dim)
  else:
    x = np.atleast_2d(np.asarray(x_start, dtype=np.float64))
  traj, feats = [], []
  observed = isinstance(denoiser, ToyDenoiser)
  with observing(denoiser, DENOISER_LAYERS) if observed else nullcontext():
    for s in range(sched.steps, 0, -1):
      x, eps = _reverse_step(x, s, denoiser, sched, root.derive(_STEP, s))
      traj.append(x)
      feats.append(eps)
  return DiffusionSample(x, np.stack(traj), np.stack(feats))


# =============================================================================


def mixture_mmd(
  samples: np.ndarray, reference: np.ndarray, bandwidth: float = 0.5
) -> float:
  """
  Squared maximum mean discrepancy under a Gaussian kernel (biased
  estimator); 0 when both sets coincide.
  """
  x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
  y = np.atleast_2d(np.asarray(reference, dtype=np.float64))

  def k(a, b):
    return np.exp(-cdist(a, b, "sqeuclidean") / (2 * bandwidth ** 2))

  return float(max(0.0, k(x, x).mean() + k(y, y).mean()
                   - 2 * k(x, y).mean()))
