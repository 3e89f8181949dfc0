"""CSV/JSON writers, content digests and the on-disk array cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_arrays(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def _fmt(v):
    return repr(float(v))


def write_csv(path, header, rows):
    """Write rows with round-trip float formatting (deterministic, lossless)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_profile_csv(path, t, values, label="t", name="u"):
    m = values.shape[1]
    header = [label] + [f"{name}{i + 1}" for i in range(m)]
    return write_csv(path, header, np.column_stack([t, values]))


def write_snapshots_csv(path, x, times, values):
    """Long-format snapshot table (t, x, u1..um)."""
    m = values.shape[2]
    header = ["t", "x"] + [f"u{i + 1}" for i in range(m)]
    nx = x.size
    rows = np.column_stack([np.repeat(times, nx), np.tile(x, len(times)),
                            values.reshape(-1, m)])
    return write_csv(path, header, rows)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


class ArrayCache:
    """Named bundles of arrays stored as ``.npz`` files under a directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def _path(self, key):
        return self.root / f"{key}.npz"

    def get(self, key):
        path = self._path(key)
        if not path.exists():
            self.misses += 1
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                out = {k: data[k] for k in data.files}
        except Exception as exc:  # corrupted or truncated file
            log.warning("cache entry %s unreadable (%s); recomputing", path.name, exc)
            self.misses += 1
            return None
        self.hits += 1
        return out

    def put(self, key, **arrays):
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / f".{key}.{os.getpid()}.tmp.npz"
        np.savez(tmp, **arrays)
        os.replace(tmp, self._path(key))


def cache_key(*parts) -> str:
    blob = json.dumps(to_jsonable(list(parts)), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]
