"""Machine-readable run manifests: inputs, seeds, versions, output hashes."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import __version__


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(
    out_dir: str | Path,
    subcommand: str,
    argv: Sequence[str],
    config: Mapping,
    inputs: Sequence[str | Path],
    outputs: Sequence[str | Path],
    seed: Optional[int] = None,
    name: str = "run_manifest.json",
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "naturetext",
        "version": __version__,
        "subcommand": subcommand,
        "argv": list(argv),
        "config": dict(config),
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).is_file()},
        "outputs": {str(p): sha256_file(p) for p in outputs if Path(p).is_file()},
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out_dir / name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
