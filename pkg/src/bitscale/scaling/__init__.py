from .bits import (
  ExperimentRecord, model_bits, compute_bits, bit_axis, BIT_AXES)
from .powerlaw import PowerLawFit, fit_power_law
from .pareto import (
  pareto_frontier, family_points, scaling_shift, A_DOMINATES, B_DOMINATES,
  MIXED)
from .reference import (
  VAR_PARAMS, var_full_precision, var_families, var_topk_ablation)
from .reports import (
  load_records, write_records, group_families, write_fits, write_frontier,
  plot_families)
