
import csv
import json

import pytest

from bitscale.cli import main, read_manifest, report, run, selftest
from bitscale.cli.main import JOBS_ENV, resolve_jobs
from bitscale.errors import InvalidConfig
from bitscale.scaling import var_families, var_full_precision, write_records


PTQ_FIELDS = {"algorithm", "bits", "shape", "proxy_loss_before",
              "proxy_loss_after", "seed", "wall_ms"}

BUNDLED = ["quantize", "ptq_bench", "qat_distill", "tolerance",
           "scaling_report"]

TOLERANCE_CHECKS = (
  "rho_continuous_ge_discrete", "levels_discrete_le_continuous",
  "dispersion_discrete_le_continuous",
  "post_injection_rho_continuous_positive",
  "final_le_peak_discrete_majority", "discrete_absorbed_above_threshold")


class TestRun:

  @staticmethod
  def test_quantize(config_dir, tmp_path):
    out = tmp_path / "q"
    assert run(str(config_dir / "quantize.json"), str(out)) == 0
    with (out / "quantize.csv").open(encoding="utf-8", newline="") as f:
      rows = list(csv.DictReader(f))
    assert [r["code"] for r in rows] == ["0", "1", "3"]
    assert {r["scale"] for r in rows} == {"1.3333333333333333"}
    assert {r["zero_point"] for r in rows} == {"1"}
    params = json.loads((out / "params.json").read_text(encoding="utf-8"))
    assert params["bits"] == 2
    manifest = read_manifest(out / "manifest.json")
    assert manifest.experiment == "quantize"
    assert sorted(manifest.data_digests) == ["params.json", "quantize.csv"]

  @staticmethod
  def test_reproducible(config_dir, tmp_path):
    config = str(config_dir / "quantize.json")
    assert run(config, str(tmp_path / "a")) == 0
    assert run(config, str(tmp_path / "b")) == 0
    a = read_manifest(tmp_path / "a" / "manifest.json")
    b = read_manifest(tmp_path / "b" / "manifest.json")
    assert a.data_digests == b.data_digests
    assert a.config_sha256 == b.config_sha256

  @staticmethod
  def test_invalid_config_writes_nothing(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"experiment": "quantize", "seed": -1,
                                  "params": {}}), encoding="utf-8")
    out = tmp_path / "never"
    assert run(str(config), str(out)) == 1
    assert not out.exists()

  @staticmethod
  def test_ptq_records(tmp_path):
    config = tmp_path / "ptq.json"
    config.write_text(json.dumps({
      "experiment": "ptq_bench", "seed": 3,
      "params": {"rows": 4, "cols": 8, "calib_rows": 32, "instances": 2,
                 "bits": 3, "block_size": 4,
                 "vq": {"dim": 2, "size": 4, "em_iters": 2}}}),
      encoding="utf-8")
    out = tmp_path / "p"
    assert run(str(config), str(out)) == 0
    lines = (out / "ptq.jsonl").read_text(encoding="utf-8").splitlines()
    records = [json.loads(line) for line in lines]
    assert len(records) == 8
    for r in records:
      assert set(r) == PTQ_FIELDS
      assert (r["bits"], r["shape"], r["wall_ms"]) == (3, [4, 8], None)
    assert [r["algorithm"] for r in records[:4]] == [
      "rtn", "gptq", "gptvq", "omniquant"]
    assert len({r["seed"] for r in records}) == 2
    rtn_row = records[0]
    assert rtn_row["proxy_loss_after"] == rtn_row["proxy_loss_before"]

  @staticmethod
  @pytest.mark.slow
  @pytest.mark.parametrize("name", BUNDLED)
  def test_output_independent_of_jobs(config_dir, tmp_path, name):
    config = str(config_dir / f"{name}.json")
    assert run(config, str(tmp_path / "one"), jobs=1) == 0
    assert run(config, str(tmp_path / "four"), jobs=4) == 0
    one = read_manifest(tmp_path / "one" / "manifest.json")
    four = read_manifest(tmp_path / "four" / "manifest.json")
    assert one.data_digests == four.data_digests
    for f in one.data_digests:
      assert (tmp_path / "one" / f).read_bytes() == \
        (tmp_path / "four" / f).read_bytes()

  @staticmethod
  @pytest.mark.slow
  def test_tolerance_orderings(config_dir, tmp_path):
    out = tmp_path / "t"
    assert run(str(config_dir / "tolerance.json"), str(out), jobs=4) == 0
    with (out / "tolerance_verdicts.csv").open(encoding="utf-8",
                                               newline="") as f:
      verdicts = {r["check"]: r["holds"] for r in csv.DictReader(f)}
    assert verdicts == dict.fromkeys(TOLERANCE_CHECKS, "True")
    seeds = (out / "tolerance_seeds.csv").read_text(encoding="utf-8")
    assert len(seeds.splitlines()) == 1 + 2 * 10

  @staticmethod
  @pytest.mark.slow
  def test_scaling_report(config_dir, tmp_path):
    out = tmp_path / "s"
    assert run(str(config_dir / "scaling_report.json"), str(out)) == 0
    for axis in ("MT", "CT"):
      assert (out / f"verdicts_{axis}.csv").exists()
      assert (out / f"families_{axis}.svg").exists()


class TestReport:

  @staticmethod
  def test_single_family(tmp_path):
    path = write_records(tmp_path / "r.jsonl", var_full_precision())
    out = tmp_path / "rep"
    assert report([str(path)], str(out)) == 0
    assert (out / "records.jsonl").exists()
    assert (out / "fits_MT.csv").exists()
    assert (out / "frontier_CT.csv").exists()
    assert not (out / "verdicts_MT.csv").exists()

  @staticmethod
  def test_two_families(tmp_path):
    recs = var_full_precision() + var_families()["VAR W4A16 GPTQ"]
    path = write_records(tmp_path / "r.jsonl", recs)
    out = tmp_path / "rep"
    assert report([str(path)], str(out)) == 0
    lines = (out / "verdicts_MT.csv").read_text(encoding="utf-8")
    assert lines.splitlines()[0] == "family_a,family_b,x_axis,verdict"
    assert len(lines.splitlines()) == 2

  @staticmethod
  def test_missing_records(tmp_path):
    assert report([str(tmp_path / "none.jsonl")], str(tmp_path / "o")) == 2


# =============================================================================


class TestJobs:

  @staticmethod
  def test_explicit():
    assert resolve_jobs(3) == 3
    with pytest.raises(InvalidConfig):
      resolve_jobs(0)

  @staticmethod
  def test_environment(monkeypatch):
    monkeypatch.setenv(JOBS_ENV, "4")
    assert resolve_jobs(None) == 4
    monkeypatch.setenv(JOBS_ENV, "many")
    with pytest.raises(InvalidConfig):
      resolve_jobs(None)
    monkeypatch.delenv(JOBS_ENV)
    assert resolve_jobs(None) == 1


def test_selftest():
  assert selftest(0) == 0
  assert main(["--log_level", "WARNING", "selftest"]) == 0


def test_main_requires_command():
  with pytest.raises(SystemExit):
    main([])
