from .noise import NoiseSpec, NoiseInjector, inject_noise
from .protocols import (
  ToleranceCurve, StepTrajectory, output_loss, distinct_levels,
  single_step_sweep, multi_step_protocol, post_injection_rho, final_vs_peak,
  absorption_threshold_db, plot_sweeps, plot_trajectories)
from .stats import (
  ActivationTable, record_activation_stats, variance_dispersion,
  plot_activation_ranges)
