"""
Forward hooks that announce linear-layer outputs through the `activation`
effect while a pipeline generates.
"""

from contextlib import contextmanager
from typing import Iterator, Sequence

from torch import nn

from ..effects import activation


# =============================================================================


@contextmanager
def observing(
  model: nn.Module, names: Sequence[str], last_position: bool = False
) -> Iterator[None]:
  """
  Within the context, every forward pass of the named submodules calls
  `activation(name, output)`. With `last_position`, only the final sequence
  position of a `(batch, seq, features)` output is reported.
  """
  handles = []
  modules = dict(model.named_modules())
  for name in names:

    def hook(_module, _inputs, output, name=name):
      out = output.detach()
      activation(name, out[:, -1] if last_position else out)

    handles.append(modules[name].register_forward_hook(hook))
  try:
    yield
  finally:
    for h in handles:
      h.remove()
