"""
One function per experiment kind. Each takes a validated config, an output
directory and a worker count, and returns the files it wrote.

Independent cells are computed by a worker pool; results come back in cell
order and are written by the calling process alone, so output bytes do not
depend on the number of workers.
"""

import json
import logging
import multiprocessing
import time
from itertools import combinations
from pathlib import Path
from statistics import median
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np
import torch

from ..distill import QatConfig, qat_distill
from ..errors import InsufficientPoints, InvalidSpec, NoValidFit
from ..genmodels import (
  ContinuousPipeline, DenoiserConfig, DiffusionSchedule, DiscretePipeline,
  make_markov_dataset, make_mixture_dataset, split, train_toy_ar,
  train_toy_denoiser)
from ..numerics import RngStream, gaussian
from ..ptq import (
  AffineBlock, GptqConfig, VqConfig, estimate_hessian, gptq, gptvq,
  omniquant_block, proxy_loss, rtn)
from ..quant import (
  QuantSpec, calibrate_uniform, dequantize, quantize, simulate)
from ..reporting import new_figure, save_svg, write_csv
from ..scaling import (
  ExperimentRecord, bit_axis, family_points, fit_power_law, group_families,
  load_records, pareto_frontier, plot_families, scaling_shift, var_families,
  write_fits, write_frontier, write_records)
from ..tolerance import (
  absorption_threshold_db, final_vs_peak, multi_step_protocol,
  plot_sweeps, plot_trajectories, post_injection_rho,
  record_activation_stats, single_step_sweep, variance_dispersion)
from .config import ExperimentConfig


logger = logging.getLogger(__name__)

_PTQ, _QAT, _TOL = 0x70, 0x71, 0x72


# =============================================================================


def _worker_init() -> None:
  torch.set_num_threads(1)


def fan_out(fn: Callable, cells: Sequence[Any], jobs: int) -> List[Any]:
  """
  `[fn(c) for c in cells]`, computed by up to `jobs` worker processes.
  """
  if jobs <= 1 or len(cells) <= 1:
    return [fn(c) for c in cells]
  ctx = multiprocessing.get_context("spawn")
  with ctx.Pool(min(jobs, len(cells)), initializer=_worker_init) as pool:
    return pool.map(fn, cells)


# quantize ====================================================================


def run_quantize(cfg: ExperimentConfig, out: Path, _jobs: int) -> List[Path]:
  p = cfg.params
  x = np.array(p.values, dtype=np.float64)
  spec = p.spec
  header = ("row", "col", "x", "scale", "zero_point", "code", "x_hat")
  files = []
  if spec.scheme.name == "integer":
    qp = calibrate_uniform(x, spec, p.gamma, p.beta)
    codes = quantize(x, qp, spec)
    x_hat = dequantize(codes, qp)
    scale, zero = qp.expand(x.shape)
    rows = [(i, j, x[i, j], scale[i, j], zero[i, j], codes[i, j],
             x_hat[i, j]) for (i, j) in np.ndindex(x.shape)]
    params = out / "params.json"
    params.write_text(qp.to_json() + "\n", encoding="utf-8")
    files.append(params)
  else:
    x_hat, _ = simulate(x, spec)
    rows = [(i, j, x[i, j], None, None, None, x_hat[i, j])
            for (i, j) in np.ndindex(x.shape)]
  files.insert(0, write_csv(out / "quantize.csv", header, rows))
  return files


# ptq_bench ===================================================================


def ptq_instance(cell) -> List[Dict[str, Any]]:
  """
  One seeded layer, quantized by each configured algorithm. The `before`
  loss is the uncompensated baseline: round-to-nearest proxy loss, or the
  `gamma = beta = 1` reconstruction error for `omniquant`.
  """
  (p, seed) = cell
  stream = RngStream(seed)
  w = gaussian(stream.derive(0), p.rows * p.cols).reshape(p.rows, p.cols)
  x = gaussian(stream.derive(1), p.calib_rows * p.cols)
  x = x.reshape(p.calib_rows, p.cols)
  x[:, 0] *= p.outlier_scale
  h = estimate_hessian(x, p.lambda_rel)
  spec = QuantSpec.integer(p.bits)
  rtn_loss = proxy_loss(w, rtn(w, spec), h)

  def timed(f):
    t0 = time.perf_counter() if p.record_timing else None
    v = f()
    ms = None if t0 is None else (time.perf_counter() - t0) * 1e3
    return v, ms

  records = []
  for algorithm in p.methods:
    before = rtn_loss
    if algorithm == "rtn":
      (after, ms) = timed(lambda: proxy_loss(w, rtn(w, spec), h))
    elif algorithm == "gptq":
      gcfg = GptqConfig(spec, p.block_size, p.act_order)
      (after, ms) = timed(lambda c=gcfg: gptq(w, h, c)[1])
    elif algorithm == "gptvq":
      vcfg = VqConfig(p.vq.dim, p.vq.size, p.vq.codebooks_per_group,
                      p.vq.em_iters)
      (after, ms) = timed(lambda c=vcfg: gptvq(w, h, c).proxy_loss)
    else:
      block = AffineBlock(np.zeros(p.rows), "identity")
      (res, ms) = timed(lambda b=block: omniquant_block(b, w, x, spec))
      before, after = res.baseline_error, res.error
    records.append({"algorithm": algorithm, "bits": p.bits,
                    "shape": [p.rows, p.cols],
                    "proxy_loss_before": float(before),
                    "proxy_loss_after": float(after),
                    "seed": seed, "wall_ms": ms})
  return records


def ptq_seeds(seed: int, instances: int) -> List[int]:
  return [int(s) for s in RngStream(seed).derive(_PTQ).generator()
          .integers(0, 2 ** 31, instances)]


def run_ptq_bench(cfg: ExperimentConfig, out: Path, jobs: int) -> List[Path]:
  p = cfg.params
  cells = [(p, s) for s in ptq_seeds(cfg.seed, p.instances)]
  results = [r for rs in fan_out(ptq_instance, cells, jobs) for r in rs]

  jsonl = out / "ptq.jsonl"
  with jsonl.open("w", encoding="utf-8", newline="\n") as f:
    for r in results:
      f.write(json.dumps(r, sort_keys=True) + "\n")

  summary = []
  for algorithm in p.methods:
    rs = [r for r in results if r["algorithm"] == algorithm]
    after = [r["proxy_loss_after"] for r in rs]
    wins = sum(r["proxy_loss_after"] <= r["proxy_loss_before"] for r in rs)
    metric = ("reconstruction_mse" if algorithm == "omniquant"
              else "proxy_loss")
    summary.append((algorithm, metric, len(rs), float(np.mean(after)),
                    float(median(after)), wins))
  csv = write_csv(out / "ptq_summary.csv",
                  ("algorithm", "metric", "instances", "mean", "median",
                   "no_worse_than_before"), summary)
  return [jsonl, csv]


# qat_distill =================================================================


def qat_cell(cell) -> Dict[str, Any]:
  (teacher, train, heldout, qcfg) = cell
  _, curve = qat_distill(teacher, qcfg, train, heldout)
  final = curve.final_eval()
  return {"loss_kind": qcfg.loss_kind, "top_k": qcfg.top_k,
          "seed": qcfg.seed, "eval_forward_kld": final.eval_forward_kld,
          "eval_token_accuracy": final.eval_token_accuracy,
          "curve": list(curve)}


def run_qat_distill(
  cfg: ExperimentConfig, out: Path, jobs: int
) -> List[Path]:
  p = cfg.params
  m = p.model
  ar_cfg = m.ar_config(cfg.seed)
  data = make_markov_dataset(m.dataset_size, m.length, m.num_tokens,
                             m.num_conditions, cfg.seed)
  train, heldout = split(data, p.heldout_fraction)
  teacher = train_toy_ar(train, ar_cfg, cfg.seed, steps=m.train_steps)
  w_spec = QuantSpec.integer(p.w_bits)
  a_spec = None if p.a_bits is None else QuantSpec.integer(p.a_bits, "tensor")

  seeds = [int(s) for s in RngStream(cfg.seed).derive(_QAT).generator()
           .integers(0, 2 ** 31, p.n_seeds)]
  cells = []
  for kind in p.loss_kinds:
    for k in (p.top_k if kind == "topkld" else (0,)):
      for s in seeds:
        qcfg = QatConfig(kind, k, w_spec, a_spec, p.steps, p.learning_rate,
                         p.batch_size, p.eval_every, s)
        cells.append((teacher, train, heldout, qcfg))
  results = fan_out(qat_cell, cells, jobs)

  runs = write_csv(
    out / "qat_runs.csv",
    ("loss_kind", "top_k", "seed", "eval_forward_kld", "eval_token_accuracy"),
    ((r["loss_kind"], r["top_k"], r["seed"], r["eval_forward_kld"],
      r["eval_token_accuracy"]) for r in results))
  curves = write_csv(
    out / "qat_curves.csv",
    ("loss_kind", "top_k", "seed", "step", "loss", "eval_forward_kld",
     "eval_token_accuracy"),
    ((r["loss_kind"], r["top_k"], r["seed"], *pt)
     for r in results for pt in r["curve"]))

  arms = {}
  for r in results:
    arms.setdefault((r["loss_kind"], r["top_k"]), []).append(r)
  summary = write_csv(
    out / "qat_summary.csv",
    ("loss_kind", "top_k", "n_seeds", "median_forward_kld",
     "median_token_accuracy"),
    ((kind, k, len(rs), median(r["eval_forward_kld"] for r in rs),
      median(r["eval_token_accuracy"] for r in rs))
     for ((kind, k), rs) in arms.items()))

  fig = new_figure()
  ax = fig.axes[0]
  for (n, ((kind, k), rs)) in enumerate(arms.items()):
    ys = [r["eval_forward_kld"] for r in rs]
    ax.plot([n] * len(ys), ys, "o", ms=3, alpha=0.6)
    ax.plot([n], [median(ys)], "k_", ms=14)
  ax.set_xticks(range(len(arms)))
  ax.set_xticklabels([kind if kind != "topkld" else f"topkld K={k}"
                      for (kind, k) in arms], rotation=30, ha="right")
  ax.set_ylabel("held-out KL(teacher || student)")
  svg = save_svg(fig, out / "qat_kld.svg")
  return [runs, curves, summary, svg]


# tolerance ===================================================================


def build_pipeline(kind: str, p, seed: int):
  if kind == "discrete":
    m = p.model
    data = make_markov_dataset(m.dataset_size, p.steps, m.num_tokens,
                               m.num_conditions, seed)
    model = train_toy_ar(data, m.ar_config(seed, p.steps), seed,
                         steps=m.train_steps)
    return DiscretePipeline(model, condition=0, top_k=1)
  d = p.denoiser
  dcfg = DenoiserConfig(dim=2, width=d.width, time_dim=d.time_dim,
                        steps=p.steps)
  data = make_mixture_dataset(d.dataset_size, seed)
  model = train_toy_denoiser(data, dcfg, seed, steps=d.train_steps)
  return ContinuousPipeline(model, DiffusionSchedule(p.steps), d.num_points)


def tolerance_cell(cell) -> Dict[str, Any]:
  (kind, p, seed) = cell
  pipe = build_pipeline(kind, p, seed)
  curve = single_step_sweep(pipe, p.sweep_step, p.snr_db, p.n_seeds, seed)
  ms = p.multi_step
  traj = multi_step_protocol(pipe, ms.snr_db, ms.fraction, ms.n_seeds, seed)
  table = record_activation_stats(pipe, seed)
  threshold, absorbed = None, None
  if kind == "discrete":
    threshold = max(absorption_threshold_db(pipe, seed + j, p.sweep_step)
                    for j in range(p.n_seeds))
    absorbed = bool(np.all(curve.raw_loss[curve.snr_db > threshold] == 0))
  return {"kind": kind, "seed": seed, "curve": curve, "trajectory": traj,
          "stats": table, "metrics": {
            "spearman_rho": curve.spearman_rho,
            "distinct_loss_levels": curve.distinct_loss_levels,
            "post_injection_rho": post_injection_rho(traj),
            "final_le_peak_fraction":
              float(np.mean(final_vs_peak(traj))),
            "variance_dispersion": variance_dispersion(table),
            "absorption_threshold_db": threshold,
            "absorbed_above_threshold": absorbed}}


TOLERANCE_METRICS = (
  "spearman_rho", "distinct_loss_levels", "post_injection_rho",
  "final_le_peak_fraction", "variance_dispersion")


def median_metrics(
  results: Sequence[Dict[str, Any]]
) -> Dict[str, Dict[str, float]]:
  by_kind: Dict[str, List[Dict[str, Any]]] = {}
  for r in results:
    by_kind.setdefault(r["kind"], []).append(r["metrics"])
  return {kind: {m: float(median(x[m] for x in ms))
                 for m in TOLERANCE_METRICS}
          for (kind, ms) in by_kind.items()}


def tolerance_verdicts(
  results: Sequence[Dict[str, Any]]
) -> List[Tuple[str, bool]]:
  """
  Orderings between the pipelines, on per-pipeline medians over harness
  seeds. Comparisons need both pipelines; the others need their one.
  """
  med = median_metrics(results)
  dis, con = med.get("discrete"), med.get("continuous")
  checks = []
  if dis is not None and con is not None:
    checks += [
      ("rho_continuous_ge_discrete",
       con["spearman_rho"] >= dis["spearman_rho"]),
      ("levels_discrete_le_continuous",
       dis["distinct_loss_levels"] <= con["distinct_loss_levels"]),
      ("dispersion_discrete_le_continuous",
       dis["variance_dispersion"] <= con["variance_dispersion"])]
  if con is not None:
    checks.append(("post_injection_rho_continuous_positive",
                   con["post_injection_rho"] > 0))
  if dis is not None:
    fractions = [r["metrics"]["final_le_peak_fraction"]
                 for r in results if r["kind"] == "discrete"]
    absorbed = [r["metrics"]["absorbed_above_threshold"]
                for r in results if r["kind"] == "discrete"]
    checks += [("final_le_peak_discrete_majority",
                float(np.mean(fractions)) > 0.5),
               ("discrete_absorbed_above_threshold", all(absorbed))]
  return checks


def tolerance_seeds(seed: int, n: int) -> List[int]:
  return [int(s) for s in RngStream(seed).derive(_TOL).generator()
          .integers(0, 2 ** 31, n)]


def run_tolerance(cfg: ExperimentConfig, out: Path, jobs: int) -> List[Path]:
  """
  Every pipeline on every harness seed. Per-seed curves, trajectories and
  activation tables are written for the first harness seed; metrics for
  all of them, with their medians and the orderings between pipelines.
  """
  p = cfg.params
  seeds = tolerance_seeds(cfg.seed, p.harness_seeds)
  results = fan_out(tolerance_cell,
                    [(k, p, s) for k in p.pipelines for s in seeds], jobs)
  first = [r for r in results if r["seed"] == seeds[0]]
  files = []
  for r in first:
    kind = r["kind"]
    files.append(r["curve"].write_csv(out / f"sweep_{kind}.csv"))
    files.append(r["trajectory"].write_csv(out / f"trajectory_{kind}.csv"))
    files.append(r["stats"].write_csv(out / f"activations_{kind}.csv"))
  files.append(write_csv(
    out / "tolerance_seeds.csv",
    ("pipeline", "seed", "step_index", *TOLERANCE_METRICS,
     "absorption_threshold_db"),
    ((r["kind"], r["seed"], r["curve"].step_index,
      *(r["metrics"][m] for m in TOLERANCE_METRICS),
      r["metrics"]["absorption_threshold_db"]) for r in results)))
  files.append(write_csv(
    out / "tolerance_summary.csv",
    ("pipeline", "harness_seeds", *(f"median_{m}" for m in TOLERANCE_METRICS)),
    ((kind, len(seeds), *(med[m] for m in TOLERANCE_METRICS))
     for (kind, med) in median_metrics(results).items())))
  verdicts = tolerance_verdicts(results)
  for (check, holds) in verdicts:
    if not holds:
      logger.warning("tolerance ordering %s does not hold", check)
  files.append(write_csv(out / "tolerance_verdicts.csv", ("check", "holds"),
                         verdicts))
  files.append(plot_sweeps([(r["kind"], r["curve"]) for r in first],
                           out / "sweeps.svg"))
  files.append(plot_trajectories(
    [(r["kind"], r["trajectory"]) for r in first], out / "trajectories.svg"))
  return files


# scaling_report ==============================================================


def write_report(
  records: Sequence[ExperimentRecord], out: Path,
  x_axes: Sequence[str] = ("MT", "CT")
) -> List[Path]:
  """
  Merged records, then per bit axis: per-family fits, the Pareto frontier,
  a dominance verdict for every pair of fitted families, and a log-log
  figure.
  """
  families = group_families(records)
  files = [write_records(out / "records.jsonl", records)]
  for axis_name in x_axes:
    bit_axis(axis_name)
    fits = {}
    for (label, fam) in families.items():
      try:
        fits[label] = fit_power_law(family_points(fam, axis_name))
      except (InsufficientPoints, NoValidFit, InvalidSpec) as exc:
        logger.warning("no %s fit for %s: %s", axis_name, label, exc)
    files.append(write_fits(out / f"fits_{axis_name}.csv", fits, axis_name))
    files.append(write_frontier(out / f"frontier_{axis_name}.csv",
                                pareto_frontier(records, axis_name),
                                axis_name))
    if len(fits) >= 2:
      files.append(write_csv(
        out / f"verdicts_{axis_name}.csv",
        ("family_a", "family_b", "x_axis", "verdict"),
        ((a, b, axis_name,
          scaling_shift(families[a], families[b], axis_name))
         for (a, b) in combinations(sorted(fits), 2))))
    files.append(plot_families(out / f"families_{axis_name}.svg", families,
                               fits, axis_name))
  return files


def run_scaling_report(
  cfg: ExperimentConfig, out: Path, _jobs: int
) -> List[Path]:
  p = cfg.params
  records = load_records(p.records) if p.records else []
  if p.reference:
    records += [r for fam in var_families().values() for r in fam]
  return write_report(records, out, p.x_axes)


EXPERIMENT_RUNNERS: Dict[str, Callable[[ExperimentConfig, Path, int],
                                       List[Path]]] = {
  "quantize": run_quantize,
  "ptq_bench": run_ptq_bench,
  "qat_distill": run_qat_distill,
  "tolerance": run_tolerance,
  "scaling_report": run_scaling_report,
}
