"""Stage manifests: content digests of inputs/outputs plus the config
digest, so reruns can be checked for byte-identical artifacts."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, stage: str, inputs: dict, outputs: dict,
                   config_digest: str) -> Path:
    """inputs/outputs map artifact name -> path; digests are computed here."""
    doc = {
        "stage": stage,
        "config_digest": config_digest,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = Path(out_dir) / f"manifest_{stage}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def read_manifest(out_dir, stage: str) -> dict:
    return json.loads((Path(out_dir) / f"manifest_{stage}.json").read_text())
