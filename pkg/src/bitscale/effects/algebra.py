"""
Abstract types for value and effect syntax.
"""

from dataclasses import fields
from inspect import getmembers_static
from itertools import chain
from operator import itemgetter
from typing import Any, Dict, List, Mapping

import numpy as np
from effectful.ops.syntax import Operation


# =============================================================================


class ValueSyntax:
  """
  Mixin for the package's `dataclass` value types: a readable multi-line
  `__str__` and a conversion to JSON-ready records.

  Array fields are rendered by shape in `__str__` and as nested lists in
  `record()`; nested `ValueSyntax` values recurse.
  """

  @property
  def scalar_fields(self) -> List[str]:
    return [f.name for f in fields(self)
            if not isinstance(getattr(self, f.name), (np.ndarray, dict))]

  @property
  def array_fields(self) -> List[str]:
    return [f.name for f in fields(self)
            if isinstance(getattr(self, f.name), np.ndarray)]

  def record(self) -> Dict[str, Any]:
    return {f.name: _jsonable(getattr(self, f.name)) for f in fields(self)}

  def __str__(self) -> str:
    i1 = " " * 2
    descr = [f"{self.__class__.__name__}:"]
    for f in self.scalar_fields:
      descr.append(f"{i1}{f}: {getattr(self, f)}")
    for f in self.array_fields:
      a = getattr(self, f)
      descr.append(f"{i1}{f}: array{a.shape} {a.dtype}")
    return '\n'.join(descr)


def _jsonable(v: Any) -> Any:
  if isinstance(v, ValueSyntax):
    return v.record()
  if isinstance(v, np.ndarray):
    return v.tolist()
  if isinstance(v, np.generic):
    return v.item()
  if isinstance(v, (list, tuple)):
    return [_jsonable(u) for u in v]
  if isinstance(v, dict):
    return {str(k): _jsonable(u) for (k, u) in v.items()}
  return v


# =============================================================================


EffectSignatureDict = Dict[str, Operation]


class EffectSignature:
  """
  Signature for an effect algebra that can be interpreted by `effectful`.

  More precisely, this class is a mixin for a namespace of operations (syntax
  for atomic effects), each represented as an `effectful.ops.syntax.Operation`
  instance. Subsignatures can be factored out into subclasses, creating a
  partial order of signatures.
  """

  @classmethod
  def as_dict(
    cls, inheritance: bool = True, ignore: List[str] | None = None
  ) -> EffectSignatureDict:
    """
    View this signature as a mapping from symbols to `Operation` instances.

    Arguments:
    ----------
    inheritance: bool
      If `True` (default), then the result includes operations in subclasses
      accessible via introspection, which represent predefined subsignatures.
      If `False`, then the result only contains operations defined locally to
      this class, which represent residual signatures.
    ignore: List[str] | None
      Optionally filter out some symbols.
    """
    assert ignore is None or all(isinstance(symb, str) for symb in ignore)

    own = getmembers_static(cls, predicate=lambda v: isinstance(v, Operation))
    if inheritance:
      ign = list(map(itemgetter(0), own)) + ([] if ignore is None else ignore)
      return dict(chain(
        ((s, op) for (s, op) in own if ignore is None or s not in ignore),
        *(c.as_dict(True, ign).items() for c in cls.__subclasses__())))
    if ignore is None:
      return dict(own)
    return {symb: op for (symb, op) in own if symb not in ignore}

  @classmethod
  def export_ops(cls, env: Mapping[str, Any]) -> None:
    """
    Export this signature to some external namespace.
    """
    env.update(cls.as_dict())
