"""Canonical JSON serialization and atomic file writes.

Every on-disk artifact goes through `canonical_dumps` so that identical
inputs produce byte-identical files: keys sorted, ASCII-only, floats
rounded to 9 significant digits before encoding.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path


def _canonicalize(obj):
    if isinstance(obj, float):
        # round-trip through 9 significant digits for a stable shortest repr
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonicalize(v) for v in obj]
    return obj


def canonical_dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(_canonicalize(obj), sort_keys=True, ensure_ascii=True, indent=indent)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via temp-file-then-rename so readers never see partial content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, canonical_dumps(obj) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(obj) -> str:
    """Content digest of a JSON-serializable object (canonical form)."""
    return sha256_hex(canonical_dumps(obj, indent=None).encode("utf-8"))
