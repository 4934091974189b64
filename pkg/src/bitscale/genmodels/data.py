"""
Seeded synthetic sources for the two toy pipelines.

Discrete: an order-2 Markov chain over the codebook's `K` tokens. Each row of
the transition table is drawn from a sparse Dirichlet, so sequences are
predictable but not deterministic. A condition `c` fixes the two tokens that
precede the sequence to `(c mod K, c + 1 mod K)`.

Continuous: a planar mixture of Gaussians with means evenly spaced on a
circle.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..effects import ValueSyntax
from ..errors import InvalidSpec
from ..numerics import RngStream


_TABLE, _CONDITIONS, _SEQUENCES, _MIXTURE = 1, 2, 3, 4


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class MarkovSource(ValueSyntax):
  """
  Attributes
  ----------

  transitions: np.ndarray
    `(K, K, K)` table; `transitions[a, b]` is the next-token distribution
    after the token pair `(a, b)`.
  """
  transitions: np.ndarray

  @property
  def num_tokens(self) -> int:
    return self.transitions.shape[0]

  def context(self, condition: int) -> Tuple[int, int]:
    k = self.num_tokens
    return condition % k, (condition + 1) % k


@dataclass(frozen=True, slots=True, eq=False)
class ArDataset(ValueSyntax):
  tokens: np.ndarray
  conditions: np.ndarray
  num_tokens: int
  num_conditions: int
  source: MarkovSource | None = field(default=None, repr=False)

  def __post_init__(self):
    if self.tokens.ndim != 2 or self.tokens.shape[0] == 0:
      raise InvalidSpec("dataset needs a non-empty (N, L) token matrix")
    if self.conditions.shape != (self.tokens.shape[0],):
      raise InvalidSpec("one condition per sequence")
    if self.tokens.min() < 0 or self.tokens.max() >= self.num_tokens:
      raise InvalidSpec("tokens outside the vocabulary")

  def __len__(self) -> int:
    return self.tokens.shape[0]

  @property
  def length(self) -> int:
    return self.tokens.shape[1]

  def subset(self, rows: np.ndarray) -> "ArDataset":
    return ArDataset(self.tokens[rows], self.conditions[rows],
                     self.num_tokens, self.num_conditions, self.source)


def make_markov_source(
  num_tokens: int, seed: int, concentration: float = 0.1
) -> MarkovSource:
  g = RngStream(seed).derive(_TABLE).generator()
  k = num_tokens
  table = g.dirichlet(np.full(k, concentration), size=(k, k))
  return MarkovSource(table)


def make_markov_dataset(
  size: int, length: int, num_tokens: int, num_conditions: int, seed: int
) -> ArDataset:
  if min(size, length, num_conditions) < 1 or num_tokens < 2:
    raise InvalidSpec("dataset dimensions must be positive")
  source = make_markov_source(num_tokens, seed)
  root = RngStream(seed)
  conds = root.derive(_CONDITIONS).generator().integers(
    0, num_conditions, size)
  u = root.derive(_SEQUENCES).generator().random((size, length))
  cdf = np.cumsum(source.transitions, axis=-1)
  tokens = np.zeros((size, length), dtype=np.int64)
  for n in range(size):
    a, b = source.context(int(conds[n]))
    for i in range(length):
      nxt = int(np.searchsorted(cdf[a, b], u[n, i], side="right"))
      nxt = min(nxt, num_tokens - 1)
      tokens[n, i] = nxt
      a, b = b, nxt
  return ArDataset(tokens, conds.astype(np.int64), num_tokens,
                   num_conditions, source)


# =============================================================================


@dataclass(frozen=True, slots=True, eq=False)
class MixtureSource(ValueSyntax):
  means: np.ndarray
  std: float

  def sample(self, stream: RngStream, n: int) -> np.ndarray:
    g = stream.generator()
    comp = g.integers(0, self.means.shape[0], n)
    return self.means[comp] + self.std * g.standard_normal((n, 2))


def mixture_source(
  components: int = 5, radius: float = 1.5, std: float = 0.25
) -> MixtureSource:
  angle = 2 * np.pi * np.arange(components) / components
  means = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
  return MixtureSource(means, std)


def make_mixture_dataset(
  size: int, seed: int, components: int = 5
) -> np.ndarray:
  if size < 1:
    raise InvalidSpec("size must be positive")
  return mixture_source(components).sample(
    RngStream(seed).derive(_MIXTURE), size)


# =============================================================================


def split(data, heldout_fraction: float = 0.2):
  """
  Deterministic train / held-out split: the trailing rows are held out.
  Works on `ArDataset` and on point arrays.
  """
  n = len(data)
  k = int(round(n * heldout_fraction))
  if not 0 < k < n:
    raise InvalidSpec(f"cannot hold out {heldout_fraction} of {n} rows")
  rows = np.arange(n)
  if isinstance(data, ArDataset):
    return data.subset(rows[:n - k]), data.subset(rows[n - k:])
  return data[:n - k], data[n - k:]
