"""Checkpoint container: an ``.npz`` archive of named float64 arrays plus a
JSON header stored under the reserved key ``__meta__``."""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_META_KEY = "__meta__"


class CheckpointError(ValueError):
    pass


def save_arrays(path: str | os.PathLike, arrays: dict[str, np.ndarray],
                meta: dict) -> None:
    if _META_KEY in arrays:
        raise CheckpointError(f"array name {_META_KEY!r} is reserved")
    header = dict(meta, format_version=FORMAT_VERSION)
    payload = {name: np.asarray(a, dtype=np.float64) for name, a in arrays.items()}
    payload[_META_KEY] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def load_arrays(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    try:
        data = np.load(path, allow_pickle=False)
    except (ValueError, OSError) as exc:
        raise CheckpointError(f"{path}: not a checkpoint archive ({exc})") from None
    if not isinstance(data, np.lib.npyio.NpzFile):
        raise CheckpointError(f"{path}: not a checkpoint archive")
    with data:
        if _META_KEY not in data:
            raise CheckpointError(f"{path}: missing checkpoint header")
        meta = json.loads(bytes(data[_META_KEY]).decode("utf-8"))
        arrays = {k: data[k].copy() for k in data.files if k != _META_KEY}
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version!r}")
    return arrays, meta
