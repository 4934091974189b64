"""
A one-block causal transformer over codebook tokens.

Feature extraction maps the condition and the token prefix to a code-space
vector `z` of the codebook's dimension; reconstruction maps `z` back to a
token. Token logits are `-kappa * |z - c_k|^2` over the centroids `c_k`, so
the most likely token is always `vq_encode(z)`.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
from scipy import special
from torch import nn
from torch.nn import functional as F

from ..effects import ValueSyntax, begin_step, feature, reconstruction
from ..errors import DivergedTraining, InvalidSpec
from ..numerics import RngStream, uniform
from .codebook import Codebook, build_codebook, vq_encode
from .data import ArDataset
from .observe import observing


logger = logging.getLogger(__name__)

LINEAR_LAYERS = ("block.qkv", "block.proj", "block.fc1", "block.fc2",
                 "to_code")

_INIT, _BATCHES, _SAMPLING = 11, 12, 13


# =============================================================================


@dataclass(frozen=True, slots=True)
class ArConfig(ValueSyntax):
  num_tokens: int = 32
  code_dim: int = 8
  width: int = 32
  length: int = 16
  num_conditions: int = 10
  top_k: int = 4
  codebook_seed: int = 0

  def __post_init__(self):
    if self.num_tokens < 2 or self.code_dim < 1 or self.width < 1:
      raise InvalidSpec("num_tokens >= 2, code_dim >= 1, width >= 1")
    if self.length < 1 or self.num_conditions < 1:
      raise InvalidSpec("length and num_conditions must be positive")
    if not 1 <= self.top_k <= self.num_tokens:
      raise InvalidSpec("top_k must lie in [1, num_tokens]")


def torch_seed(stream: RngStream) -> int:
  return int(stream.generator().integers(0, 2 ** 62))


# =============================================================================


class CausalBlock(nn.Module):

  def __init__(self, width: int):
    super().__init__()
    self.ln1 = nn.LayerNorm(width)
    self.qkv = nn.Linear(width, 3 * width)
    self.proj = nn.Linear(width, width)
    self.ln2 = nn.LayerNorm(width)
    self.fc1 = nn.Linear(width, 2 * width)
    self.fc2 = nn.Linear(2 * width, width)

  def forward(self, h: torch.Tensor) -> torch.Tensor:
    n, width = h.shape[1], h.shape[2]
    q, k, v = self.qkv(self.ln1(h)).split(width, dim=-1)
    att = q @ k.transpose(-2, -1) / math.sqrt(width)
    causal = torch.ones(n, n, dtype=torch.bool, device=h.device).tril()
    att = att.masked_fill(~causal, float("-inf")).softmax(dim=-1)
    h = h + self.proj(att @ v)
    return h + self.fc2(F.gelu(self.fc1(self.ln2(h))))


class ToyARModel(nn.Module):
  """
  Position 0 holds the condition embedding; position `i > 0` holds token
  `i - 1`. The output at position `i` predicts token `i`.
  """

  def __init__(self, cfg: ArConfig, codebook: Codebook | None = None):
    super().__init__()
    if codebook is None:
      codebook = build_codebook(cfg.num_tokens, cfg.code_dim,
                                cfg.codebook_seed)
    if codebook.size != cfg.num_tokens or codebook.dim != cfg.code_dim:
      raise InvalidSpec("codebook does not match the model config")
    self.config = cfg
    self.codebook = codebook
    self.register_buffer(
      "centroids", torch.tensor(codebook.centroids, dtype=torch.float64))
    h = cfg.width
    self.tok_emb = nn.Embedding(cfg.num_tokens, h)
    self.cond_emb = nn.Embedding(cfg.num_conditions, h)
    self.pos_emb = nn.Embedding(cfg.length + 1, h)
    self.block = CausalBlock(h)
    self.ln_f = nn.LayerNorm(h)
    self.to_code = nn.Linear(h, cfg.code_dim)
    self.log_kappa = nn.Parameter(torch.tensor(-4.0))

  def features(self, cond: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """
    `(B,)` conditions and `(B, n)` tokens to `(B, n + 1, code_dim)`.
    """
    h = torch.cat([self.cond_emb(cond)[:, None], self.tok_emb(tokens)], dim=1)
    h = h + self.pos_emb(torch.arange(h.shape[1], device=h.device))
    return self.to_code(self.ln_f(self.block(h)))

  def code_logits(self, z: torch.Tensor) -> torch.Tensor:
    d2 = ((z[..., None, :] - self.centroids) ** 2).sum(dim=-1)
    return -self.log_kappa.exp() * d2

  def forward(self, cond: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    return self.code_logits(self.features(cond, tokens))

  @property
  def kappa(self) -> float:
    return float(self.log_kappa.detach().exp())


def new_ar_model(cfg: ArConfig, seed: int) -> ToyARModel:
  with torch.random.fork_rng(devices=[]):
    torch.manual_seed(torch_seed(RngStream(seed).derive(_INIT)))
    model = ToyARModel(cfg).double()
  return model


# =============================================================================


def sequence_logits(model: ToyARModel, data: ArDataset) -> torch.Tensor:
  cond = torch.as_tensor(data.conditions)
  tokens = torch.as_tensor(data.tokens)
  return model(cond, tokens[:, :-1])


def heldout_nll(model: ToyARModel, data: ArDataset) -> float:
  """
  Mean next-token negative log-likelihood in nats.
  """
  with torch.no_grad():
    logits = sequence_logits(model, data)
    return float(F.cross_entropy(
      logits.reshape(-1, logits.shape[-1]),
      torch.as_tensor(data.tokens).reshape(-1)))


def train_toy_ar(
  data: ArDataset, cfg: ArConfig, seed: int, steps: int = 300,
  learning_rate: float = 3e-3, batch_size: int = 64
) -> ToyARModel:
  if data.num_tokens != cfg.num_tokens or data.length != cfg.length:
    raise InvalidSpec("dataset does not match the model config")
  model = new_ar_model(cfg, seed)
  opt = torch.optim.Adam(model.parameters(), lr=learning_rate)
  batches = RngStream(seed).derive(_BATCHES).generator()
  model.train()
  for step in range(steps):
    rows = batches.integers(0, len(data), min(batch_size, len(data)))
    logits = sequence_logits(model, data.subset(rows))
    loss = F.cross_entropy(
      logits.reshape(-1, cfg.num_tokens),
      torch.as_tensor(data.tokens[rows]).reshape(-1))
    if not torch.isfinite(loss):
      raise DivergedTraining(f"ar training loss {loss.item()} at step {step}")
    opt.zero_grad()
    loss.backward()
    opt.step()
    if step % 50 == 0:
      logger.debug("ar step %d: loss %.4f", step, loss.item())
  model.eval()
  return model


# =============================================================================


class ArGeneration(NamedTuple):
  tokens: np.ndarray
  features: np.ndarray


def sample_top_k(logits: np.ndarray, top_k: int, u: float) -> int:
  """
  Inverse-CDF draw from the renormalized `top_k` most likely tokens; `u` is
  uniform on `[0, 1)`.
  """
  order = np.argsort(-logits, kind="stable")[:top_k]
  p = special.softmax(logits[order])
  i = int(np.searchsorted(np.cumsum(p), u, side="right"))
  return int(order[min(i, top_k - 1)])


def ar_generate(
  model: ToyARModel, condition: int, top_k: int | None = None, seed: int = 0
) -> ArGeneration:
  """
  Sample `length` tokens. Each step announces the code-space feature through
  `feature` and the decoded centroid through `reconstruction`; the token is
  chosen from the (possibly perturbed) feature. `top_k = 1` is greedy
  decoding, a pure function of the model and condition.
  """
  cfg = model.config
  top_k = cfg.top_k if top_k is None else top_k
  if not 1 <= top_k <= cfg.num_tokens:
    raise InvalidSpec(f"top_k must lie in [1, {cfg.num_tokens}]")
  if not 0 <= condition < cfg.num_conditions:
    raise InvalidSpec(f"condition outside [0, {cfg.num_conditions})")
  stream = RngStream(seed).derive(_SAMPLING)
  centroids = model.codebook.centroids
  cond = torch.tensor([condition])
  tokens, feats = [], []
  with torch.no_grad(), observing(model, LINEAR_LAYERS, last_position=True):
    for step in range(cfg.length):
      begin_step(step)
      prefix = torch.tensor([tokens], dtype=torch.int64).reshape(1, -1)
      z = model.features(cond, prefix)[0, -1].numpy()
      z = np.asarray(feature(step, z), dtype=np.float64)
      if top_k == 1:
        tok = vq_encode(z, model.codebook)
      else:
        logits = -model.kappa * np.sum((z - centroids) ** 2, axis=-1)
        tok = sample_top_k(logits, top_k, uniform(stream.derive(step), 1)[0])
      reconstruction(step, np.array(centroids[tok]))
      tokens.append(tok)
      feats.append(z)
  return ArGeneration(np.array(tokens, dtype=np.int64), np.stack(feats))
