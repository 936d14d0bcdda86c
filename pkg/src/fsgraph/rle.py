"""Uncompressed run-length coding for binary masks.

Row-major scan; `counts` alternates runs of 0s and 1s and always starts
with the zero-run (possibly 0), matching the common COCO convention.
"""
from __future__ import annotations

import numpy as np


def encode_mask(mask: np.ndarray) -> dict:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"expected a 2D mask, got shape {mask.shape}")
    flat = mask.reshape(-1)
    counts: list[int] = []
    if flat.size:
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        runs = np.diff(np.concatenate(([0], change, [flat.size])))
        if flat[0]:
            counts.append(0)
        counts.extend(int(r) for r in runs)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def decode_mask(obj: dict) -> np.ndarray:
    h, w = obj["size"]
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in obj["counts"]:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    if pos != h * w:
        raise ValueError(f"RLE counts sum to {pos}, expected {h * w}")
    return flat.reshape(h, w)
