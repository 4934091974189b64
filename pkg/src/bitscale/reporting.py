"""
Byte-reproducible data files and figures.

CSV: UTF-8, `\\n` line endings, header row first, floats written with
`repr` (shortest round-tripping form, `.` as decimal separator), `None` as
an empty field.

SVG: written with a fixed hash salt, glyphs as paths and no creation date,
so identical data gives identical bytes.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import matplotlib
matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402


logger = logging.getLogger(__name__)

RC = {
  "svg.hashsalt": "bitscale",
  "svg.fonttype": "path",
  "figure.figsize": (6.0, 4.0),
  "axes.grid": True,
  "grid.alpha": 0.3,
  "axes.labelsize": 10,
  "legend.fontsize": 8,
  "xtick.labelsize": 8,
  "ytick.labelsize": 8,
}


# =============================================================================


def csv_field(v: Any) -> str:
  if v is None:
    return ""
  if isinstance(v, bool):
    return str(v).lower()
  if isinstance(v, float):
    return repr(v)
  if hasattr(v, "item"):
    return csv_field(v.item())
  return str(v)


def write_csv(
  path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
  path = Path(path)
  with path.open("w", encoding="utf-8", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(header)
    for row in rows:
      w.writerow([csv_field(v) for v in row])
  logger.info("wrote %s", path)
  return path


# =============================================================================


def new_figure() -> Figure:
  with plt.rc_context(RC):
    fig, _ = plt.subplots()
  return fig


def save_svg(fig: Figure, path: str | Path) -> Path:
  path = Path(path)
  with plt.rc_context(RC):
    fig.savefig(path, format="svg", metadata={"Date": None})
  plt.close(fig)
  logger.info("wrote %s", path)
  return path
