"""Run manifests and key-value sidecars.

Every CLI run writes a JSON manifest naming its inputs (with content hashes),
parameters, seed, and library versions. Manifests contain no timestamps so a
rerun with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy

from .errors import ParseError

TOOL_VERSION = "0.1.0"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(
    path: str | Path,
    command: str,
    inputs: Mapping[str, str | Path],
    parameters: Mapping[str, object],
    seed: int | None = None,
) -> None:
    document = {
        "command": command,
        "inputs": {
            name: {"path": str(p), "sha256": sha256_file(p)}
            for name, p in sorted(inputs.items())
        },
        "parameters": {k: parameters[k] for k in sorted(parameters)},
        "seed": seed,
        "versions": {
            "vsdkit": TOOL_VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def write_keyvalues(path: str | Path, mapping: Mapping[str, object]) -> None:
    lines = [f"{key}={mapping[key]}" for key in sorted(mapping)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_keyvalues(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{line_no}: expected key=value")
        key, value = line.split("=", 1)
        out[key] = value
    return out
