"""Parameter checkpoints: JSON manifest plus a float32 little-endian payload."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"
PAYLOAD = "params.bin"


def save_checkpoint(path, named_params, extra: dict | None = None) -> Path:
    """Write ``named_params`` (iterable of (name, Tensor|array)) into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, p in named_params:
        arr = np.ascontiguousarray(getattr(p, "data", p), dtype="<f4")
        raw = arr.tobytes(order="C")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    (path / PAYLOAD).write_bytes(payload)
    manifest = {
        "format": "f32-le",
        "payload": PAYLOAD,
        "sha256": hashlib.sha256(payload).hexdigest(),
        "tensors": entries,
        "extra": extra or {},
    }
    (path / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    manifest = json.loads((path / MANIFEST).read_text())
    payload = (path / manifest["payload"]).read_bytes()
    if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
        raise ValueError(f"checkpoint payload digest mismatch in {path}")
    out = {}
    for e in manifest["tensors"]:
        buf = payload[e["offset"]: e["offset"] + e["nbytes"]]
        out[e["name"]] = np.frombuffer(buf, dtype="<f4").reshape(e["shape"]).copy()
    return out, manifest.get("extra", {})


def load_into(module, path) -> dict:
    """Copy checkpoint tensors into a module's parameters; returns the extra metadata."""
    arrays, extra = load_checkpoint(path)
    params = dict(module.named_parameters())
    missing = set(params) - set(arrays)
    if missing:
        raise KeyError(f"checkpoint lacks parameters: {sorted(missing)[:5]}")
    for name, p in params.items():
        a = arrays[name]
        if a.shape != p.shape:
            raise ValueError(f"shape mismatch for {name}: {a.shape} vs {p.shape}")
        p.data = a.astype(p.dtype)
    return extra
