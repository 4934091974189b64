import pytest

from bitscale.cli.experiments import (
  TOLERANCE_METRICS, fan_out, median_metrics, ptq_seeds, tolerance_seeds,
  tolerance_verdicts)


def _result(kind, seed, **metrics):
  base = dict.fromkeys(TOLERANCE_METRICS, 0.0)
  base.update(absorption_threshold_db=None, absorbed_above_threshold=None)
  base.update(metrics)
  return {"kind": kind, "seed": seed, "metrics": base}


def _pair(seed, rho_d, rho_c, frac=1.0, absorbed=True):
  return [
    _result("discrete", seed, spearman_rho=rho_d, distinct_loss_levels=2,
            final_le_peak_fraction=frac, variance_dispersion=0.01,
            absorbed_above_threshold=absorbed),
    _result("continuous", seed, spearman_rho=rho_c, distinct_loss_levels=7,
            post_injection_rho=0.5, variance_dispersion=0.3)]


class TestToleranceVerdicts:

  @staticmethod
  def test_medians():
    results = [r for s in range(3) for r in _pair(s, 0.2 * s, 1.0)]
    med = median_metrics(results)
    assert med["discrete"]["spearman_rho"] == pytest.approx(0.2)
    assert med["continuous"]["distinct_loss_levels"] == 7.0

  @staticmethod
  def test_expected_ordering_holds():
    results = [r for s in range(5) for r in _pair(s, 0.8, 1.0)]
    assert all(holds for (_, holds) in tolerance_verdicts(results))
    assert len(tolerance_verdicts(results)) == 6

  @staticmethod
  def test_median_decides():
    results = [r for s in range(5)
               for r in _pair(s, 1.0 if s < 3 else 0.0, 0.9)]
    verdicts = dict(tolerance_verdicts(results))
    assert not verdicts["rho_continuous_ge_discrete"]
    results = [r for s in range(5)
               for r in _pair(s, 1.0 if s < 2 else 0.0, 0.9)]
    assert dict(tolerance_verdicts(results))["rho_continuous_ge_discrete"]

  @staticmethod
  def test_single_pipeline_checks():
    results = [r for s in range(3) for r in _pair(s, 0.5, 1.0, frac=0.4)]
    discrete = [r for r in results if r["kind"] == "discrete"]
    verdicts = dict(tolerance_verdicts(discrete))
    assert set(verdicts) == {"final_le_peak_discrete_majority",
                             "discrete_absorbed_above_threshold"}
    assert not verdicts["final_le_peak_discrete_majority"]

  @staticmethod
  def test_absorption_failure_in_any_seed():
    results = _pair(0, 0.5, 1.0) + _pair(1, 0.5, 1.0, absorbed=False)
    assert not dict(tolerance_verdicts(results))[
      "discrete_absorbed_above_threshold"]


def test_derived_seeds():
  assert ptq_seeds(0, 5) == ptq_seeds(0, 5)
  assert len(set(tolerance_seeds(0, 10))) == 10
  assert ptq_seeds(0, 4) != tolerance_seeds(0, 4)


def test_fan_out_keeps_cell_order():
  cells = [-3, 1, -4, 1, -5, 9]
  assert fan_out(abs, cells, 1) == fan_out(abs, cells, 3) == [
    3, 1, 4, 1, 5, 9]
