
import numpy as np
import pytest

from bitscale.errors import InvalidSpec
from bitscale.genmodels import (
  DenoiserConfig, DiffusionSchedule, GaussianOracle, denoiser_mse,
  diffusion_sample, diffusion_step, make_mixture_dataset, mixture_mmd,
  new_denoiser, train_toy_denoiser)
from bitscale.numerics import RngStream
from bitscale.runners import ReconstructionTracer, handle


class ZeroDenoiser:

  @staticmethod
  def predict(x, t):  # pylint: disable=unused-argument
    return np.zeros_like(np.atleast_2d(x))


# =============================================================================


class TestSchedule:

  @staticmethod
  @pytest.mark.parametrize("mode", ["ddpm", "ddim"])
  def test_levels(mode):
    s = DiffusionSchedule(30, mode)
    np.testing.assert_allclose(s.abar ** 2 + s.bbar ** 2, 1.0, atol=1e-12)
    assert (s.abar[0], s.bbar[0]) == (1.0, 0.0)
    assert np.all(np.diff(s.abar) < 0)
    assert s.abar.shape == (31,)

  @staticmethod
  def test_sigma():
    assert np.all(DiffusionSchedule(10, "ddim").sigma == 0)
    ddpm = DiffusionSchedule(10, "ddpm")
    assert ddpm.sigma[1] == 0 and np.all(ddpm.sigma[2:] > 0)

  @staticmethod
  def test_invalid():
    with pytest.raises(InvalidSpec):
      DiffusionSchedule(0)
    with pytest.raises(InvalidSpec):
      DiffusionSchedule(10, "euler")


# =============================================================================


class TestStep:

  @staticmethod
  def test_zero_noise_rescales():
    sched = DiffusionSchedule(10, "ddim")
    x = np.array([[1.0, -2.0]])
    y = diffusion_step(x, 5, ZeroDenoiser(), sched, RngStream(0))
    np.testing.assert_allclose(y, sched.abar[4] / sched.abar[5] * x)

  @staticmethod
  def test_ddpm_draws_noise():
    sched = DiffusionSchedule(10, "ddpm")
    x = np.array([[1.0, -2.0]])
    a = diffusion_step(x, 5, ZeroDenoiser(), sched, RngStream(0))
    b = diffusion_step(x, 5, ZeroDenoiser(), sched, RngStream(1))
    c = diffusion_step(x, 5, ZeroDenoiser(), sched, RngStream(0))
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)

  @staticmethod
  def test_step_range():
    sched = DiffusionSchedule(10)
    with pytest.raises(InvalidSpec):
      diffusion_step(np.zeros((1, 2)), 0, ZeroDenoiser(), sched, RngStream(0))


class TestSample:

  @staticmethod
  def test_oracle_reaches_target_mean(gaussian_target):
    oracle = GaussianOracle(**gaussian_target)
    out = diffusion_sample(oracle, gaussian_target["schedule"], seed=0,
                           num_points=4000)
    np.testing.assert_allclose(out.x0.mean(axis=0), [1.0, -1.0], atol=0.05)
    assert np.all(out.x0.std(axis=0) < 0.55)

  @staticmethod
  def test_shapes_and_determinism(continuous_pipeline):
    a = continuous_pipeline.run(3)
    b = continuous_pipeline.run(3)
    assert a.trajectory.shape == (20, 8, 2)
    assert a.features.shape == (20, 8, 2)
    assert np.array_equal(a.x0, a.trajectory[-1])
    assert np.array_equal(a.x0, b.x0)

  @staticmethod
  def test_tracer_sees_trajectory(continuous_pipeline):
    tracer = ReconstructionTracer()
    with handle(tracer):
      out = continuous_pipeline.run(0)
    assert tracer.steps == list(range(20))
    assert np.array_equal(tracer.trajectory(), out.trajectory)

  @staticmethod
  def test_start_point():
    sched = DiffusionSchedule(5)
    out = diffusion_sample(ZeroDenoiser(), sched, 0,
                           x_start=np.array([2.0, 2.0]))
    np.testing.assert_allclose(out.x0, [[2.0, 2.0]] / sched.abar[5])


# =============================================================================


class TestDenoiser:

  @staticmethod
  def test_untrained_predicts_little():
    cfg = DenoiserConfig(steps=20)
    model = new_denoiser(cfg, seed=0)
    data = make_mixture_dataset(400, seed=1)
    mse = denoiser_mse(model, data, DiffusionSchedule(20), seed=0)
    assert mse == pytest.approx(1.0, abs=0.2)

  @staticmethod
  def test_invalid_config():
    with pytest.raises(InvalidSpec):
      DenoiserConfig(width=0)

  @staticmethod
  @pytest.mark.slow
  def test_training_reduces_mse():
    cfg = DenoiserConfig(steps=20)
    data = make_mixture_dataset(2000, seed=2)
    model = train_toy_denoiser(data, cfg, seed=0, steps=1000)
    held = make_mixture_dataset(500, seed=3)
    assert denoiser_mse(model, held, DiffusionSchedule(20), seed=1) < 0.9


def test_mmd():
  x = make_mixture_dataset(200, seed=5)
  assert mixture_mmd(x, x) == pytest.approx(0.0, abs=1e-12)
  assert mixture_mmd(x, x + 3.0) > 0.1
