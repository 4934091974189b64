"""
Run manifests: what ran, with which config, and the digest of every file it
wrote. Written after all other outputs.
"""

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Sequence

from .. import __version__
from ..effects import ValueSyntax


MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
  return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def utc_now() -> str:
  return datetime.now(timezone.utc).isoformat(timespec="seconds")


# =============================================================================


@dataclass(frozen=True, slots=True)
class RunManifest(ValueSyntax):
  """
  Attributes
  ----------

  files: List[Dict[str, str]]
    `{"path", "sha256"}` per emitted file, paths relative to the output
    directory, sorted by path.

  started, finished: str
    UTC timestamps; the only fields that differ between identical runs.
  """
  experiment: str
  config_sha256: str
  tool_version: str
  started: str
  finished: str
  files: List[Dict[str, str]]

  @property
  def data_digests(self) -> Dict[str, str]:
    return {f["path"]: f["sha256"] for f in self.files}


def build_manifest(
  experiment: str, config_sha256: str, out: Path, files: Sequence[Path],
  started: str
) -> RunManifest:
  entries = sorted(
    ({"path": Path(f).relative_to(out).as_posix(), "sha256": sha256_file(f)}
     for f in files), key=lambda e: e["path"])
  return RunManifest(experiment, config_sha256, __version__, started,
                     utc_now(), entries)


def write_manifest(manifest: RunManifest, out: Path) -> Path:
  path = out / MANIFEST_NAME
  path.write_text(json.dumps(manifest.record(), indent=2, sort_keys=True)
                  + "\n", encoding="utf-8")
  return path


def read_manifest(path: str | Path) -> RunManifest:
  d = json.loads(Path(path).read_text(encoding="utf-8"))
  return RunManifest(d["experiment"], d["config_sha256"], d["tool_version"],
                     d["started"], d["finished"], d["files"])
