"""
Command line entry point.

  bitscale run CONFIG [--out DIR] [--jobs N]
  bitscale report RECORDS.jsonl... [--out DIR]
  bitscale selftest

Exit codes: 0 on success, 1 when the config (or selftest) fails
validation, 2 when an experiment fails at run time.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import torch

from ..errors import BitscaleError, InvalidConfig
from ..oracles import run_selftest
from ..scaling import load_records
from .config import load_config
from .experiments import EXPERIMENT_RUNNERS, write_report
from .manifest import build_manifest, utc_now, write_manifest


logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

JOBS_ENV = "BITSCALE_JOBS"


# =============================================================================


def resolve_jobs(jobs: int | None) -> int:
  if jobs is None:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
      jobs = int(raw)
    except ValueError as exc:
      raise InvalidConfig(JOBS_ENV, f"not an integer: {raw!r}") from exc
  if jobs < 1:
    raise InvalidConfig("jobs", "must be at least 1")
  return jobs


def _runtime_failure(what: str, exc: BaseException) -> int:
  tb = exc.__traceback__
  while tb is not None and tb.tb_next is not None:
    tb = tb.tb_next
  where = tb.tb_frame.f_globals.get("__name__", "?") if tb else "?"
  logger.error("%s failed in %s: %s: %s", what, where,
               type(exc).__name__, exc)
  logger.debug("traceback", exc_info=exc)
  return EXIT_RUNTIME


def run(config: str, out: str | None = None, jobs: int | None = None) -> int:
  try:
    cfg = load_config(config)
    jobs = resolve_jobs(jobs)
  except InvalidConfig as exc:
    logger.error("invalid config %s: %s", config, exc)
    return EXIT_INVALID

  out_dir = cfg.output_dir(out)
  started = utc_now()
  torch.set_num_threads(1)
  logger.info("running %s into %s with %d job(s)", cfg.experiment, out_dir,
              jobs)
  try:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = EXPERIMENT_RUNNERS[cfg.experiment](cfg, out_dir, jobs)
    manifest = build_manifest(cfg.experiment, cfg.digest, out_dir, files,
                              started)
    write_manifest(manifest, out_dir)
  except Exception as exc:  # pylint: disable=broad-exception-caught
    return _runtime_failure(cfg.experiment, exc)
  logger.info("%s finished: %d file(s)", cfg.experiment, len(files))
  return EXIT_OK


def report(records: Sequence[str], out: str = "report") -> int:
  out_dir = Path(out)
  try:
    recs = load_records(records)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(recs, out_dir)
  except Exception as exc:  # pylint: disable=broad-exception-caught
    return _runtime_failure("report", exc)
  return EXIT_OK


def selftest(seed: int = 0) -> int:
  try:
    results = run_selftest(seed)
  except BitscaleError as exc:
    return _runtime_failure("selftest", exc)
  failed = [name for (name, ok) in results.items() if not ok]
  for name in failed:
    logger.error("selftest check failed: %s", name)
  return EXIT_INVALID if failed else EXIT_OK


# =============================================================================


def build_arg_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
    prog="bitscale",
    description="Quantization and bit-level scaling experiments.")
  parser.add_argument(
    "--log_level", default="INFO",
    choices=["DEBUG", "INFO", "WARNING", "ERROR"])
  sub = parser.add_subparsers(dest="command", required=True)

  p = sub.add_parser("run", help="run the experiment a config describes")
  p.add_argument("config", help="path to an experiment config (JSON)")
  p.add_argument("--out", help="output directory (overrides the config)")
  p.add_argument("--jobs", type=int,
                 help=f"worker processes (default: ${JOBS_ENV} or 1)")

  p = sub.add_parser("report", help="fits and frontiers of JSONL records")
  p.add_argument("records", nargs="+", help="JSONL record files")
  p.add_argument("--out", default="report", help="output directory")

  p = sub.add_parser("selftest", help="run the brute-force oracle suite")
  p.add_argument("--seed", type=int, default=0)
  return parser


def main(argv: Optional[List[str]] = None) -> int:
  args = build_arg_parser().parse_args(argv)
  handler = logging.StreamHandler(sys.stderr)
  handler.setFormatter(logging.Formatter(
    "%(asctime)s %(levelname)s %(name)s: %(message)s"))
  root = logging.getLogger("bitscale")
  root.handlers[:] = [handler]
  root.setLevel(args.log_level)
  if args.command == "run":
    return run(args.config, args.out, args.jobs)
  if args.command == "report":
    return report(args.records, args.out)
  return selftest(args.seed)


if __name__ == "__main__":
  raise SystemExit(main())
