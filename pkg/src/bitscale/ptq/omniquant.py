"""
Block-wise reconstruction search over weight clipping and a channel-wise
equivalent transformation.

The block computes `f(x @ w.T + bias)` for an elementwise `f`. For clipping
factors `gamma, beta` and a transform `(s, delta)`, the quantized block is
evaluated as

  x', w', b' = equivalent_transform(x, w, bias, (s, delta))
  f(Q_a(x') @ Q_w(w'; gamma, beta).T + b')

and scored by the mean squared difference to the full-precision output on
the calibration rows. The search is derivative-free coordinate descent:
`gamma` and `beta` by grid plus bounded Brent refinement on `[lo, 1]`, `s` as
`rho ** kappa` for the activation/weight range ratio `rho` and `kappa` on a
grid in `[0, 1]`, `delta` as the channel means. A step is kept only if it
strictly lowers the error, so the result never loses to the starting point
`gamma = beta = 1, s = 1, delta = 0`.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from ..effects import ValueSyntax
from ..errors import EmptyCalibration, InvalidSpec, LengthMismatch
from ..numerics import refine_scalar
from ..quant import (
  QuantSpec, EquivTransform, calibrate_uniform, equivalent_transform,
  fake_quant, simulate)


logger = logging.getLogger(__name__)


ACTIVATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
  "identity": lambda y: y,
  "relu": lambda y: np.maximum(y, 0.0),
  "gelu": lambda y: 0.5 * y * (1.0 + special.erf(y / np.sqrt(2.0))),
  "tanh": np.tanh,
}


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class AffineBlock(ValueSyntax):
  bias: np.ndarray
  activation: str = "identity"

  def __post_init__(self):
    if self.activation not in ACTIVATIONS:
      raise InvalidSpec(f"unknown activation {self.activation!r}")
    if np.asarray(self.bias).ndim != 1:
      raise InvalidSpec("bias must be a vector")

  def __call__(self, x: np.ndarray, w: np.ndarray,
               bias: np.ndarray | None = None) -> np.ndarray:
    b = self.bias if bias is None else bias
    return ACTIVATIONS[self.activation](x @ w.T + b)


@dataclass(frozen=True, slots=True)
class OmniConfig(ValueSyntax):
  clip_lo: float = 0.5
  clip_points: int = 11
  kappa_points: int = 11
  rounds: int = 3
  refine: bool = True

  def __post_init__(self):
    if not 0 < self.clip_lo < 1:
      raise InvalidSpec("clip_lo must lie in (0, 1)")
    if self.clip_points < 2 or self.kappa_points < 2 or self.rounds < 1:
      raise InvalidSpec("grids need >= 2 points and at least one round")


@dataclass(frozen=True, slots=True, eq=False)
class OmniResult(ValueSyntax):
  gamma: float
  beta: float
  scale: np.ndarray
  shift: np.ndarray
  error: float
  baseline_error: float
  history: List[float] = field(default_factory=list)


# =============================================================================


class _Objective:
  """
  Reconstruction error of a block as a function of the search coordinates.
  """

  def __init__(self, block, w, x, spec, act_spec):
    self.block, self.w, self.x = block, w, x
    self.spec, self.act_spec = spec, act_spec
    self.reference = block(x, w)

  def __call__(self, gamma, beta, scale, shift) -> float:
    t = EquivTransform(scale, shift)
    xt, wt, bt = equivalent_transform(self.x, self.w, self.block.bias, t)
    wq = fake_quant(wt, calibrate_uniform(wt, self.spec, gamma, beta),
                    self.spec)
    if self.act_spec is not None:
      xt, _ = simulate(xt, self.act_spec)
    out = self.block(xt, wq, bt)
    return float(np.mean((out - self.reference) ** 2))


def _range_ratio(x: np.ndarray, w: np.ndarray) -> np.ndarray:
  rx = np.ptp(x, axis=0)
  rw = np.ptp(w, axis=0)
  ok = (rx > 0) & (rw > 0)
  return np.where(ok, rx / np.where(ok, rw, 1.0), 1.0)


def omniquant_block(
  block: AffineBlock, w: ArrayLike, calib_x: ArrayLike, spec: QuantSpec,
  act_spec: QuantSpec | None = None, cfg: OmniConfig = OmniConfig()
) -> OmniResult:
  w = np.atleast_2d(np.asarray(w, dtype=np.float64))
  x = np.atleast_2d(np.asarray(calib_x, dtype=np.float64))
  if x.size == 0:
    raise EmptyCalibration("omniquant_block needs calibration rows")
  if x.shape[1] != w.shape[1] or block.bias.shape != (w.shape[0],):
    raise LengthMismatch("block, weights and calibration shapes disagree")

  f = _Objective(block, w, x, spec, act_spec)
  cin = w.shape[1]
  cur = {"gamma": 1.0, "beta": 1.0,
         "scale": np.ones(cin), "shift": np.zeros(cin)}
  best = baseline = f(**cur)
  history = [best]

  def accept(cand: dict, err: float, what: str) -> None:
    nonlocal best
    if err < best:
      logger.debug("omniquant %s: %.6g -> %.6g", what, best, err)
      cur.update(cand)
      best = err
      history.append(err)

  grid = np.linspace(cfg.clip_lo, 1.0, cfg.clip_points)
  step = grid[1] - grid[0]
  rho = _range_ratio(x, w)
  for _ in range(cfg.rounds):
    start = best
    for name in ("gamma", "beta"):
      errs = [f(**{**cur, name: float(g)}) for g in grid]
      k = int(np.argmin(errs))
      accept({name: float(grid[k])}, errs[k], name)
      if cfg.refine:
        lo = max(cfg.clip_lo, cur[name] - step)
        hi = min(1.0, cur[name] + step)
        g, e = refine_scalar(lambda v, n=name: f(**{**cur, n: v}), lo, hi)
        accept({name: g}, e, f"{name} refine")

    for kappa in np.linspace(0.0, 1.0, cfg.kappa_points):
      cand = {"scale": rho ** kappa}
      accept(cand, f(**{**cur, **cand}), f"scale kappa={kappa:.2f}")

    cand = {"shift": x.mean(axis=0)}
    if not np.array_equal(cand["shift"], cur["shift"]):
      accept(cand, f(**{**cur, **cand}), "shift")
    if not best < start:
      break

  return OmniResult(cur["gamma"], cur["beta"], cur["scale"], cur["shift"],
                    best, baseline, history)
