
from bitscale.oracles import SELFTEST_CHECKS, run_selftest


def test_selftest_passes():
  results = run_selftest(0)
  assert set(results) == set(SELFTEST_CHECKS)
  assert all(results.values())
