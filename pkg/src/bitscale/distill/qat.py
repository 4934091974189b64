"""
Quantization-aware fine-tuning of the toy autoregressive model against its
full-precision self.

The student is a copy of the teacher whose linear-layer weights are replaced
by their fake-quantized values through a parametrization, and optionally
whose linear-layer inputs are fake-quantized by forward pre-hooks. Gradients
pass the quantizers unchanged except where the input saturated the grid.
Distillation objectives run as an autograd function whose backward is the
closed-form gradient of `bitscale.distill.losses`.
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Tuple

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils import parametrize

from ..effects import ValueSyntax
from ..errors import DivergedTraining, EmptyInput, InvalidSpec
from ..genmodels.ar import LINEAR_LAYERS, ToyARModel, sequence_logits
from ..genmodels.data import ArDataset
from ..numerics import RngStream
from ..quant import QuantSpec, simulate
from ..reporting import write_csv
from .losses import LOSS_KINDS, DistillBatch, loss_and_grad


logger = logging.getLogger(__name__)

CROSS_ENTROPY = "cross_entropy_only"

_BATCHES = 31


# =============================================================================


@dataclass(frozen=True, slots=True)
class QatConfig(ValueSyntax):
  """
  Attributes
  ----------

  loss_kind: str
    One of the distillation objectives (`forward_kld`, `reverse_kld`,
    `topkld`, `mse`, `js`) or `cross_entropy_only`, which fits the data
    tokens and ignores the teacher.

  top_k: int
    Size of the reverse-KL set for `topkld`.

  act_spec: QuantSpec | None
    Activation quantizer, or `None` for full-precision activations.
  """
  loss_kind: str = "topkld"
  top_k: int = 4
  weight_spec: QuantSpec = field(default_factory=lambda: QuantSpec.integer(3))
  act_spec: QuantSpec | None = None
  steps: int = 100
  learning_rate: float = 0.05
  batch_size: int = 32
  eval_every: int = 10
  seed: int = 0

  def __post_init__(self):
    if self.loss_kind not in LOSS_KINDS + (CROSS_ENTROPY,):
      raise InvalidSpec(f"unknown loss kind {self.loss_kind!r}")
    if not self.learning_rate > 0:
      raise InvalidSpec("learning_rate must be positive")
    if self.steps < 0 or self.batch_size < 1 or self.eval_every < 1:
      raise InvalidSpec("steps >= 0, batch_size >= 1, eval_every >= 1")
    if self.top_k < 0:
      raise InvalidSpec("top_k must be non-negative")


# =============================================================================


class FakeQuantSTE(torch.autograd.Function):
  """
  Simulated quantization forward; identity backward masked to the entries
  that did not saturate.
  """
  # pylint: disable=arguments-differ,abstract-method

  @staticmethod
  def forward(ctx, x: torch.Tensor, spec: QuantSpec) -> torch.Tensor:
    a = x.detach().cpu().numpy()
    flat = a.reshape(-1, a.shape[-1])
    xq, mask = simulate(flat, spec)
    ctx.save_for_backward(torch.as_tensor(mask.reshape(a.shape)))
    return torch.as_tensor(xq.reshape(a.shape), dtype=x.dtype)

  @staticmethod
  def backward(ctx, grad_out):
    (mask,) = ctx.saved_tensors
    return grad_out * mask.to(grad_out.dtype), None


class WeightFakeQuant(nn.Module):

  def __init__(self, spec: QuantSpec):
    super().__init__()
    self.spec = spec

  def forward(self, w: torch.Tensor) -> torch.Tensor:
    return FakeQuantSTE.apply(w, self.spec)


class DistillLoss(torch.autograd.Function):
  """
  Mean per-position distillation objective of student logits against fixed
  teacher probabilities; backward is the analytic gradient.
  """
  # pylint: disable=arguments-differ,abstract-method

  @staticmethod
  def forward(ctx, logits, teacher_probs, kind: str, top_k: int):
    v = logits.shape[-1]
    z = logits.detach().cpu().numpy().reshape(-1, v)
    t = teacher_probs.detach().cpu().numpy().reshape(-1, v)
    batch = DistillBatch(t, z, min(top_k, v))
    loss, grad = loss_and_grad(kind, batch)
    n = z.shape[0]
    ctx.save_for_backward(torch.as_tensor(grad.reshape(logits.shape) / n))
    return torch.tensor(loss / n, dtype=logits.dtype)

  @staticmethod
  def backward(ctx, grad_out):
    (grad,) = ctx.saved_tensors
    return grad_out * grad, None, None, None


def quantized_student(
  teacher: ToyARModel, weight_spec: QuantSpec,
  act_spec: QuantSpec | None = None
) -> ToyARModel:
  """
  Deep copy of `teacher` with fake-quantized linear layers.
  """
  student = copy.deepcopy(teacher)
  modules = dict(student.named_modules())
  for name in LINEAR_LAYERS:
    parametrize.register_parametrization(
      modules[name], "weight", WeightFakeQuant(weight_spec))
    if act_spec is not None:
      modules[name].register_forward_pre_hook(
        lambda _m, args, spec=act_spec:
          (FakeQuantSTE.apply(args[0], spec),) + tuple(args[1:]))
  return student


# =============================================================================


class CurvePoint(NamedTuple):
  step: int
  loss: float
  eval_forward_kld: float | None
  eval_token_accuracy: float | None


class TrainingCurve(List[CurvePoint]):

  def final_eval(self) -> CurvePoint:
    for p in reversed(self):
      if p.eval_forward_kld is not None:
        return p
    raise EmptyInput("curve has no evaluation points")

  def write_csv(self, path: str | Path) -> Path:
    return write_csv(path, CurvePoint._fields, self)


def teacher_probs(teacher: ToyARModel, data: ArDataset) -> torch.Tensor:
  with torch.no_grad():
    return sequence_logits(teacher, data).softmax(dim=-1)


def evaluate_student(
  student: ToyARModel, teacher: ToyARModel, data: ArDataset
) -> Tuple[float, float]:
  """
  Mean per-position `KL(teacher || student)` and next-token accuracy
  against the data.
  """
  with torch.no_grad():
    t = teacher_probs(teacher, data)
    logits = sequence_logits(student, data)
    v = logits.shape[-1]
    batch = DistillBatch(t.numpy().reshape(-1, v),
                         logits.numpy().reshape(-1, v), 0)
    kld = loss_and_grad("forward_kld", batch)[0] / t.shape[0] / t.shape[1]
    pred = logits.argmax(dim=-1).numpy()
  return float(kld), float(np.mean(pred == data.tokens))


def qat_distill(
  teacher: ToyARModel, cfg: QatConfig, data: ArDataset,
  heldout: ArDataset | None = None
) -> Tuple[ToyARModel, TrainingCurve]:
  if len(data) == 0:
    raise EmptyInput("qat_distill needs training sequences")
  heldout = data if heldout is None else heldout
  student = quantized_student(teacher, cfg.weight_spec, cfg.act_spec)
  student.train()
  opt = torch.optim.SGD(student.parameters(), lr=cfg.learning_rate)
  rng = RngStream(cfg.seed).derive(_BATCHES).generator()
  curve = TrainingCurve()

  for step in range(cfg.steps + 1):
    rows = rng.integers(0, len(data), min(cfg.batch_size, len(data)))
    batch = data.subset(rows)
    logits = sequence_logits(student, batch)
    if cfg.loss_kind == CROSS_ENTROPY:
      loss = F.cross_entropy(logits.reshape(-1, logits.shape[-1]),
                             torch.as_tensor(batch.tokens).reshape(-1))
    else:
      loss = DistillLoss.apply(logits, teacher_probs(teacher, batch),
                               cfg.loss_kind, cfg.top_k)
    if not torch.isfinite(loss):
      raise DivergedTraining(f"qat loss {loss.item()} at step {step}")
    ev = (None, None)
    if step % cfg.eval_every == 0 or step == cfg.steps:
      ev = evaluate_student(student, teacher, heldout)
    curve.append(CurvePoint(step, float(loss.item()), *ev))
    if step == cfg.steps:
      break
    opt.zero_grad()
    loss.backward()
    opt.step()
    logger.debug("qat step %d: %s %.5f", step, cfg.loss_kind, loss.item())

  student.eval()
  return student, curve
