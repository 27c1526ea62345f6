"""Atomic file output and run manifests."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["RunManifest", "atomic_write_text", "write_outputs"]


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    seed: int | None
    outputs: list[str]
    arguments: dict = field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_outputs(out_dir: Path, files: dict[str, str], manifest: RunManifest) -> list[Path]:
    """Write every output, then the manifest, each atomically.

    All content is produced before this is called, so a failing command
    leaves no files behind.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in files.items():
        p = out_dir / name
        atomic_write_text(p, text)
        paths.append(p)
    manifest.outputs = [str(p) for p in paths]
    mpath = out_dir / f"{manifest.command}.manifest.json"
    atomic_write_text(mpath, manifest.to_json())
    return paths + [mpath]
