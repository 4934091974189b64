"""
JSONL ingestion and CSV/SVG export of scaling results.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np

from ..errors import EmptyInput, InvalidSpec
from ..reporting import new_figure, save_svg, write_csv
from .bits import ExperimentRecord, bit_axis
from .powerlaw import PowerLawFit


logger = logging.getLogger(__name__)


# =============================================================================


def load_records(paths: Iterable[str | Path]) -> List[ExperimentRecord]:
  """
  Records from JSONL files, one object per non-blank line, in file and line
  order.
  """
  records = []
  for path in map(Path, paths):
    with path.open(encoding="utf-8") as f:
      for (n, line) in enumerate(f, 1):
        if not line.strip():
          continue
        try:
          records.append(ExperimentRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, InvalidSpec, TypeError) as exc:
          raise InvalidSpec(f"{path}:{n}: {exc}") from exc
  if not records:
    raise EmptyInput("no records found")
  logger.info("loaded %d records", len(records))
  return records


def write_records(
  path: str | Path, records: Iterable[ExperimentRecord]
) -> Path:
  path = Path(path)
  with path.open("w", encoding="utf-8", newline="\n") as f:
    for r in records:
      f.write(json.dumps(r.record(), sort_keys=True) + "\n")
  return path


def group_families(
  records: Iterable[ExperimentRecord]
) -> Dict[str, List[ExperimentRecord]]:
  families: Dict[str, List[ExperimentRecord]] = {}
  for r in records:
    families.setdefault(r.label, []).append(r)
  return dict(sorted(families.items()))


# =============================================================================


def write_fits(
  path: str | Path, fits: Mapping[str, PowerLawFit], x_axis: str
) -> Path:
  return write_csv(
    path, ("family", "x_axis", "a", "b", "c", "rmse"),
    ((label, x_axis, f.a, f.b, f.c, f.rmse)
     for (label, f) in sorted(fits.items())))


def write_frontier(
  path: str | Path, frontier: Sequence[ExperimentRecord], x_axis: str
) -> Path:
  axis = bit_axis(x_axis)
  return write_csv(
    path, ("label", "n_params", "w_bits", "a_bits", x_axis, "quality"),
    ((r.label, r.n_params, r.w_bits, r.a_bits, axis(r), r.quality)
     for r in frontier))


def plot_families(
  path: str | Path, families: Mapping[str, Sequence[ExperimentRecord]],
  fits: Mapping[str, PowerLawFit], x_axis: str
) -> Path:
  axis = bit_axis(x_axis)
  fig = new_figure()
  ax = fig.axes[0]
  for (label, recs) in families.items():
    x = np.array([axis(r) for r in recs], dtype=np.float64)
    y = np.array([r.quality for r in recs])
    (line,) = ax.plot(x, y, "o", ms=4, label=label)
    if label in fits:
      grid = np.geomspace(x.min(), x.max(), 64)
      ax.plot(grid, fits[label].predict(grid), "-", lw=1,
              color=line.get_color())
  ax.set_xscale("log")
  ax.set_yscale("log")
  ax.set_xlabel(f"total {'model' if x_axis == 'MT' else 'compute'} bits")
  ax.set_ylabel("quality (lower is better)")
  ax.legend()
  return save_svg(fig, path)
