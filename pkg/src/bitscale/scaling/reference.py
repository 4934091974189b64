"""
Published quality of the VAR family (FID on ImageNet 256x256, lower is
better) at depths 16, 20, 24 and 30, full precision and under several
quantization methods. Used as realistic inputs for fits and reports.
"""

from typing import Dict, List, Sequence, Tuple

from .bits import ExperimentRecord


VAR_PARAMS = (310_000_000, 600_000_000, 1_000_000_000, 2_000_000_000)

# (w_bits, a_bits, method) -> FID per depth
_TABLE: Dict[Tuple[int, int, str], Tuple[float, ...]] = {
  (16, 16, "FP16"): (3.3, 2.57, 2.19, 1.92),
  # weight-only
  (8, 16, "GPTQ"): (3.41, 2.66, 2.12, 1.97),
  (8, 16, "GPTVQ"): (3.40, 2.637, 2.398, 2.11),
  (8, 16, "OmniQ"): (3.62, 2.72, 2.2098, 2.0636),
  (8, 16, "MSE"): (3.55, 2.71, 2.35, 2.05),
  (8, 16, "JS"): (3.50, 2.69, 2.22, 2.05),
  (8, 16, "ForwardKLD"): (3.41, 2.636, 2.40, 2.05),
  (8, 16, "ReverseKLD"): (3.41, 2.636, 2.41, 2.04),
  (8, 16, "TopKLD"): (3.40, 2.634, 2.394, 2.01),
  (4, 16, "GPTQ"): (4.64, 3.247, 2.572, 2.277),
  (4, 16, "GPTVQ"): (3.92, 2.96, 2.634, 2.226),
  (4, 16, "OmniQ"): (4.08, 3.17, 2.56, 2.55),
  (4, 16, "MSE"): (3.97, 3.12, 2.69, 2.25),
  (4, 16, "JS"): (3.92, 3.01, 2.65, 2.23),
  (4, 16, "ForwardKLD"): (3.95, 3.06, 2.63, 2.21),
  (4, 16, "ReverseKLD"): (3.89, 3.05, 2.59, 2.18),
  (4, 16, "TopKLD"): (3.82, 2.95, 2.53, 2.12),
  (3, 16, "GPTQ"): (27.75, 16.11, 15.45, 13.48),
  (3, 16, "GPTVQ"): (12.69, 9.01, 6.29, 5.52),
  (3, 16, "OmniQ"): (18.18, 10.67, 6.15, 3.93),
  (3, 16, "MSE"): (4.56, 3.89, 3.54, 3.01),
  (3, 16, "JS"): (4.45, 3.72, 3.25, 2.51),
  (3, 16, "ForwardKLD"): (4.27, 3.45, 2.96, 2.55),
  (3, 16, "ReverseKLD"): (4.02, 3.25, 2.91, 2.55),
  (3, 16, "TopKLD"): (3.85, 3.17, 2.66, 2.25),
  # weight-activation
  (8, 8, "SmoothQ"): (3.81, 2.68, 2.23, 2.01),
  (8, 8, "OmniQ"): (3.75, 2.75, 2.18, 2.08),
  (8, 8, "ForwardKLD"): (3.8, 2.72, 2.16, 2.10),
  (8, 8, "TopKLD"): (2.75, 2.7, 2.18, 1.98),
  (4, 8, "SmoothQ"): (7.21, 4.32, 3.21, 2.65),
  (4, 8, "OmniQ"): (6.92, 4.35, 3.11, 2.69),
  (4, 8, "ForwardKLD"): (6.62, 3.95, 3.01, 2.35),
  (4, 8, "TopKLD"): (5.89, 3.62, 2.81, 2.15),
}

# TopKLD at W3A16 for several K; the sampler's own top-k is 600
_K_ABLATION: Dict[int, Tuple[float, ...]] = {
  400: (3.95, 3.21, 2.77, 2.29),
  500: (3.91, 3.24, 2.71, 2.24),
  600: (3.85, 3.17, 2.66, 2.25),
  700: (3.92, 3.19, 2.72, 2.25),
  800: (3.96, 3.19, 2.73, 2.29),
}


# =============================================================================


def _family(
  label: str, w_bits: int, a_bits: int, fid: Sequence[float]
) -> List[ExperimentRecord]:
  return [ExperimentRecord(label, n, w_bits, a_bits, q)
          for (n, q) in zip(VAR_PARAMS, fid)]


def var_full_precision() -> List[ExperimentRecord]:
  return _family("VAR W16A16 FP16", 16, 16, _TABLE[(16, 16, "FP16")])


def var_families() -> Dict[str, List[ExperimentRecord]]:
  """
  Every published method/precision series, keyed by its label
  (`"VAR W4A16 GPTQ"` and so on).
  """
  out = {}
  for ((w, a, method), fid) in _TABLE.items():
    label = f"VAR W{w}A{a} {method}"
    out[label] = _family(label, w, a, fid)
  return out


def var_topk_ablation() -> Dict[int, List[ExperimentRecord]]:
  return {k: _family(f"VAR W3A16 TopKLD K={k}", 3, 16, fid)
          for (k, fid) in _K_ABLATION.items()}
