"""Text checkpoint: a versioned JSON document of named, shaped tensors.

Values are written row-major with ``repr`` precision, so a save/load round
trip is exact and two identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import PARAM_NAMES, PolicyValueNet

FORMAT = "v2v-isac-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(net: PolicyValueNet, metadata: dict | None = None) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "architecture": {
            "obs_dim": net.obs_dim, "hidden": net.hidden,
            "n_mod": net.n_mod, "n_frames": net.n_frames,
        },
        "metadata": metadata or {},
        "tensors": [
            {"name": name, "shape": list(net.params[name].shape),
             "values": [float(v) for v in net.params[name].ravel()]}
            for name in PARAM_NAMES
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def save_checkpoint(net: PolicyValueNet, path, metadata: dict | None = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(net, metadata))
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def loads(text: str, expect: dict | None = None) -> tuple[PolicyValueNet, dict]:
    """Rebuild a network; ``expect`` maps architecture keys to required values."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r} v{doc.get('version')}")
    arch = doc["architecture"]
    for key, want in (expect or {}).items():
        if arch.get(key) != want:
            raise CheckpointError(f"checkpoint {key}={arch.get(key)} does not match config {key}={want}")
    net = PolicyValueNet(arch["obs_dim"], arch["hidden"], arch["n_mod"], arch["n_frames"])
    shapes = net.shapes()
    seen = set()
    for tensor in doc["tensors"]:
        name = tensor["name"]
        if name not in shapes:
            raise CheckpointError(f"unknown tensor {name!r}")
        shape = tuple(tensor["shape"])
        if shape != shapes[name]:
            raise CheckpointError(f"tensor {name} has shape {shape}, expected {shapes[name]}")
        values = np.asarray(tensor["values"], dtype=float)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"tensor {name} has {values.size} values for shape {shape}")
        net.params[name] = values.reshape(shape)
        seen.add(name)
    missing = set(shapes) - seen
    if missing:
        raise CheckpointError(f"checkpoint lacks tensors {sorted(missing)}")
    return net, doc.get("metadata", {})


def load_checkpoint(path, expect: dict | None = None) -> tuple[PolicyValueNet, dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        return loads(text, expect)
    except CheckpointError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
