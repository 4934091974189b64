"""
Experiment configs: JSON documents validated against the published schema,
then turned into frozen dataclasses that check the cross-field rules the
schema cannot express.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Tuple

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from ..distill.losses import LOSS_KINDS
from ..distill.qat import CROSS_ENTROPY
from ..effects import ValueSyntax
from ..errors import InvalidConfig, InvalidSpec
from ..genmodels.ar import ArConfig
from ..quant import QuantSpec


logger = logging.getLogger(__name__)

EXPERIMENTS = (
  "quantize", "ptq_bench", "qat_distill", "tolerance", "scaling_report")


def load_schema() -> Dict[str, Any]:
  text = resources.files("bitscale.cli").joinpath("schema.json").read_text(
    encoding="utf-8")
  return json.loads(text)


def canonical_json(doc: Any) -> bytes:
  return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def config_digest(doc: Dict[str, Any]) -> str:
  return hashlib.sha256(canonical_json(doc)).hexdigest()


# =============================================================================


def _params(cls, doc: Dict[str, Any], where: str):
  """
  Build a parameter dataclass, re-raising invariant violations as
  `InvalidConfig` at `where`.
  """
  try:
    return cls(**doc)
  except InvalidSpec as exc:
    raise InvalidConfig(where, str(exc)) from exc


def quant_spec(doc: Dict[str, Any], where: str) -> QuantSpec:
  scheme = doc.get("scheme", "integer")
  granularity = doc.get("granularity", "row")
  try:
    if scheme == "float":
      if "e_bits" not in doc or "m_bits" not in doc:
        raise InvalidConfig(where, "float scheme needs e_bits and m_bits")
      spec = QuantSpec.floating(doc["e_bits"], doc["m_bits"], granularity,
                                doc.get("group_size"))
      if spec.bits != doc["bits"]:
        raise InvalidConfig(where, "bits must equal 1 + e_bits + m_bits")
      return spec
    return QuantSpec.integer(doc["bits"], granularity, doc.get("group_size"))
  except InvalidSpec as exc:
    raise InvalidConfig(where, str(exc)) from exc


@dataclass(frozen=True, slots=True)
class QuantizeParams(ValueSyntax):
  values: Tuple[Tuple[float, ...], ...]
  spec: QuantSpec
  gamma: float = 1.0
  beta: float = 1.0

  def __post_init__(self):
    if len({len(r) for r in self.values}) != 1:
      raise InvalidSpec("values must be a rectangular matrix")


@dataclass(frozen=True, slots=True)
class VqParams(ValueSyntax):
  dim: int = 2
  size: int = 16
  codebooks_per_group: int = 1
  em_iters: int = 10


@dataclass(frozen=True, slots=True)
class PtqParams(ValueSyntax):
  """
  Attributes
  ----------

  outlier_scale: float
    Multiplier applied to one calibration channel; values above 1 build the
    outlier-channel instances on which clipping search pays off.
  """
  rows: int = 64
  cols: int = 64
  calib_rows: int = 256
  instances: int = 10
  bits: int = 4
  lambda_rel: float = 0.01
  block_size: int = 128
  act_order: bool = False
  outlier_scale: float = 1.0
  methods: Tuple[str, ...] = ("rtn", "gptq", "gptvq", "omniquant")
  vq: VqParams = field(default_factory=VqParams)
  record_timing: bool = False

  def __post_init__(self):
    if "gptvq" in self.methods and self.cols % self.vq.dim:
      raise InvalidSpec("vq.dim must divide cols")
    if "gptvq" in self.methods and self.vq.codebooks_per_group > self.rows:
      raise InvalidSpec("more codebooks than rows")


@dataclass(frozen=True, slots=True)
class ModelParams(ValueSyntax):
  num_tokens: int = 32
  code_dim: int = 8
  width: int = 32
  length: int = 16
  num_conditions: int = 10
  top_k: int = 4
  train_steps: int = 300
  dataset_size: int = 512

  def ar_config(self, seed: int, length: int | None = None) -> ArConfig:
    return ArConfig(self.num_tokens, self.code_dim, self.width,
                    self.length if length is None else length,
                    self.num_conditions, self.top_k, seed)


@dataclass(frozen=True, slots=True)
class QatParams(ValueSyntax):
  model: ModelParams = field(default_factory=ModelParams)
  loss_kinds: Tuple[str, ...] = (
    CROSS_ENTROPY, "forward_kld", "reverse_kld", "topkld")
  top_k: Tuple[int, ...] = (4,)
  w_bits: int = 3
  a_bits: int | None = None
  steps: int = 100
  learning_rate: float = 0.05
  batch_size: int = 32
  eval_every: int = 10
  n_seeds: int = 10
  heldout_fraction: float = 0.2

  def __post_init__(self):
    bad = set(self.loss_kinds) - set(LOSS_KINDS + (CROSS_ENTROPY,))
    if bad:
      raise InvalidSpec(f"unknown loss kinds {sorted(bad)}")
    if max(self.top_k) > self.model.num_tokens:
      raise InvalidSpec("top_k values must not exceed num_tokens")


@dataclass(frozen=True, slots=True)
class DenoiserParams(ValueSyntax):
  width: int = 64
  time_dim: int = 16
  train_steps: int = 1000
  dataset_size: int = 2048
  num_points: int = 16


@dataclass(frozen=True, slots=True)
class MultiStepParams(ValueSyntax):
  snr_db: float = 10.0
  fraction: float = 0.1
  n_seeds: int = 20


@dataclass(frozen=True, slots=True)
class ToleranceParams(ValueSyntax):
  """
  Attributes
  ----------

  steps: int
    Generation steps of both pipelines: the token count of the discrete
    one and the reverse steps of the continuous one.

  step_index: int | None
    Step perturbed by the single-step sweep; the middle step when omitted.

  harness_seeds: int
    Independent pipeline seeds (training and generation) over which the
    per-pipeline metrics are aggregated by their median.
  """
  pipelines: Tuple[str, ...] = ("discrete", "continuous")
  model: ModelParams = field(default_factory=ModelParams)
  denoiser: DenoiserParams = field(default_factory=DenoiserParams)
  steps: int = 16
  step_index: int | None = None
  snr_db: Tuple[float, ...] = (40.0, 30.0, 20.0, 15.0, 10.0, 5.0, 0.0)
  n_seeds: int = 10
  multi_step: MultiStepParams = field(default_factory=MultiStepParams)
  harness_seeds: int = 10

  def __post_init__(self):
    if any(b >= a for (a, b) in zip(self.snr_db, self.snr_db[1:])):
      raise InvalidSpec("snr_db must be strictly decreasing")
    if self.step_index is not None and self.step_index >= self.steps:
      raise InvalidSpec("step_index must be below steps")

  @property
  def sweep_step(self) -> int:
    return self.steps // 2 if self.step_index is None else self.step_index


@dataclass(frozen=True, slots=True)
class ScalingParams(ValueSyntax):
  records: Tuple[str, ...] = ()
  reference: bool = False
  x_axes: Tuple[str, ...] = ("MT", "CT")

  def __post_init__(self):
    if not self.records and not self.reference:
      raise InvalidSpec("give record files, reference data, or both")


# =============================================================================


@dataclass(frozen=True, slots=True)
class ExperimentConfig(ValueSyntax):
  experiment: str
  seed: int
  out: str | None
  params: Any
  digest: str

  def output_dir(self, override: str | None = None) -> Path:
    return Path(override or self.out or f"results/{self.experiment}")


def _tuples(doc: Dict[str, Any]) -> Dict[str, Any]:
  return {k: tuple(v) if isinstance(v, list) else v for (k, v) in doc.items()}


def _nested(cls, doc: Dict[str, Any], where: str):
  return _params(cls, _tuples(doc), where)


def _build_params(kind: str, doc: Dict[str, Any]):
  where = "params"
  if kind == "quantize":
    return _params(QuantizeParams, {
      "values": tuple(tuple(float(v) for v in row) for row in doc["values"]),
      "spec": quant_spec(doc["spec"], "params.spec"),
      **{k: float(doc[k]) for k in ("gamma", "beta") if k in doc}}, where)
  if kind == "ptq_bench":
    d = _tuples(doc)
    if "vq" in doc:
      d["vq"] = _nested(VqParams, doc["vq"], "params.vq")
    return _params(PtqParams, d, where)
  if kind == "qat_distill":
    d = _tuples(doc)
    if "model" in doc:
      d["model"] = _nested(ModelParams, doc["model"], "params.model")
    return _params(QatParams, d, where)
  if kind == "tolerance":
    d = _tuples(doc)
    for (k, cls) in (("model", ModelParams), ("denoiser", DenoiserParams),
                     ("multi_step", MultiStepParams)):
      if k in doc:
        d[k] = _nested(cls, doc[k], f"params.{k}")
    if "model" in doc and "length" in doc["model"] \
       and doc["model"]["length"] != d.get("steps", 16):
      raise InvalidConfig("params.model.length", "must equal params.steps")
    return _params(ToleranceParams, d, where)
  return _params(ScalingParams, _tuples(doc), where)


def parse_config(doc: Any) -> ExperimentConfig:
  validator = Draft202012Validator(load_schema())
  err = best_match(validator.iter_errors(doc))
  if err is not None:
    path = ".".join(str(p) for p in err.absolute_path) or "$"
    raise InvalidConfig(path, err.message)
  return ExperimentConfig(
    doc["experiment"], doc["seed"], doc.get("out"),
    _build_params(doc["experiment"], doc["params"]), config_digest(doc))


def load_config(path: str | Path) -> ExperimentConfig:
  path = Path(path)
  try:
    doc = json.loads(path.read_text(encoding="utf-8"))
  except FileNotFoundError as exc:
    raise InvalidConfig("$", f"no such config file {path}") from exc
  except json.JSONDecodeError as exc:
    raise InvalidConfig("$", f"not valid JSON: {exc}") from exc
  cfg = parse_config(doc)
  logger.info("config %s: %s (sha256 %s)", path, cfg.experiment,
              cfg.digest[:12])
  return cfg


