"""Versioned binary checkpoints.

Layout: magic bytes ``EVG1``, a little-endian uint32 header length, a UTF-8
JSON header (parameter names and shapes, configs, step, config hash), then
the raw little-endian float32 parameter payload in header order.  Loading
verifies the magic, the payload length, and the config hash; a truncated
file never yields a partial parameter set.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint", "config_hash"]

MAGIC = b"EVG1"


def config_hash(model_config: dict, train_config: dict | None) -> str:
    blob = json.dumps({"model": model_config, "train": train_config},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(path, params: dict[str, np.ndarray], model_config: dict,
                    train_config: dict | None = None, step: int = 0) -> None:
    header = {
        "params": [{"name": n, "shape": list(a.shape)} for n, a in params.items()],
        "model_config": model_config,
        "train_config": train_config,
        "step": int(step),
        "config_hash": config_hash(model_config, train_config),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for name, array in params.items():
            f.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (params, header)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    expected = config_hash(header.get("model_config"), header.get("train_config"))
    if header.get("config_hash") != expected:
        raise CheckpointError(f"{path}: config hash mismatch")
    payload = blob[8 + header_len :]
    sizes = [int(np.prod(spec["shape"], dtype=np.int64)) for spec in header["params"]]
    if len(payload) != 4 * sum(sizes):
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, expected {4 * sum(sizes)}"
        )
    params: dict[str, np.ndarray] = {}
    offset = 0
    for spec, size in zip(header["params"], sizes):
        raw = np.frombuffer(payload, dtype="<f4", count=size, offset=offset * 4)
        params[spec["name"]] = raw.reshape(spec["shape"]).astype(np.float32)
        offset += size
    return params, header
