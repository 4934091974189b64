from .config import (
  ExperimentConfig, QuantizeParams, PtqParams, VqParams, QatParams,
  ModelParams, ToleranceParams, DenoiserParams, MultiStepParams,
  ScalingParams, load_config, parse_config, load_schema, config_digest)
from .manifest import RunManifest, build_manifest, read_manifest
from .experiments import EXPERIMENT_RUNNERS, fan_out, write_report
from .main import main, run, report, selftest
