
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pytest

from effectful.ops.syntax import Operation

from bitscale.effects import EffectSignature
from bitscale.genmodels import (
  ArConfig, ContinuousPipeline, DiffusionSchedule, DiscretePipeline,
  GaussianOracle, new_ar_model)
from bitscale.numerics import RngStream
from bitscale.runners import Runner, handle


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


# =============================================================================


@pytest.fixture(scope="session")
def sig_syntax() -> Callable:
  """
  Provides a function to test the syntactic consistency of an effect signature.
  """
  def test(sig: EffectSignature, num_ops: int) -> None:

    # check types
    assert issubclass(sig, EffectSignature)
    ops = sig.as_dict()
    assert all(isinstance(symb, str) and isinstance(op, Operation)
               for (symb, op) in ops.items())

    # check size
    assert num_ops == len(ops)

  return test


@pytest.fixture(scope="session")
def hook_semantics() -> Callable:
  """
  Provides a function to test a hook both without a handler (its default)
  and under a runner.
  """
  def test(
    op: Operation, runner: Runner, *, eq: Callable[[Any, Any], bool],
    args: List[Tuple], default: List[Any], handled: List[Any]
  ) -> None:

    # check types
    assert isinstance(op, Operation)
    assert all(isinstance(eff, Operation) and callable(coeff)
               for (eff, coeff) in runner.as_dict().items())

    # without a runner, fall back to the default rule
    for (a, r) in zip(args, default):
      assert eq(op(*a), r)

    # under a runner, interpret the hook
    with handle(runner):
      for (a, r) in zip(args, handled):
        assert eq(op(*a), r)

  return test


# =============================================================================


@pytest.fixture(scope="session")
def grad_check() -> Callable:
  """
  Provides a function comparing an analytic gradient with central finite
  differences.
  """
  def test(
    f: Callable[[np.ndarray], float], z: np.ndarray, grad: np.ndarray, *,
    step: float = 1e-5, rtol: float = 1e-5
  ) -> None:
    fd = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
      e = np.zeros_like(z)
      e[idx] = step
      fd[idx] = (f(z + e) - f(z - e)) / (2 * step)
    err = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)
    assert err <= rtol, f"relative gradient error {err:.3g}"

  return test


@pytest.fixture(scope="session")
def streams() -> Callable[..., RngStream]:
  """
  Provides seeded streams keyed by a label path, so tests never share draws.
  """
  root = RngStream(20240521)

  def make(*labels: int) -> RngStream:
    return root.derive(*labels)

  return make


# =============================================================================


TINY_AR = ArConfig(num_tokens=8, code_dim=4, width=16, length=6,
                   num_conditions=3, top_k=3)


@pytest.fixture(scope="session")
def tiny_ar():
  return new_ar_model(TINY_AR, seed=0)


@pytest.fixture(scope="session")
def discrete_pipeline(tiny_ar) -> DiscretePipeline:
  return DiscretePipeline(tiny_ar, condition=1)


@pytest.fixture(scope="session")
def gaussian_target() -> Dict[str, Any]:
  sched = DiffusionSchedule(20, "ddim")
  return {"mean": np.array([1.0, -1.0]), "std": 0.5, "schedule": sched}


@pytest.fixture(scope="session")
def continuous_pipeline(gaussian_target) -> ContinuousPipeline:
  oracle = GaussianOracle(**gaussian_target)
  return ContinuousPipeline(oracle, gaussian_target["schedule"], num_points=8)


@pytest.fixture(scope="session")
def config_dir() -> Path:
  return CONFIGS
