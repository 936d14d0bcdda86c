"""Axis-aligned boxes in 2D pixel space and 3D world space."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptySet, InvalidBox


class Box2D(NamedTuple):
    """Pixel-space box; x1/y1 exclusive. A pixel (u, v) is inside when
    x0 <= u < x1 and y0 <= v < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def clamp(self, width: int, height: int) -> "Box2D":
        return Box2D(
            min(max(self.x0, 0.0), width),
            min(max(self.y0, 0.0), height),
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
        )

    def scale_about_center(self, factor: float) -> "Box2D":
        cx, cy = self.center
        hw = self.width * factor / 2.0
        hh = self.height * factor / 2.0
        return Box2D(cx - hw, cy - hh, cx + hw, cy + hh)

    def pixel_bounds(self) -> tuple[int, int, int, int]:
        """Integer (x0, y0, x1, y1) covering the box, for slicing image arrays."""
        return (
            int(np.floor(self.x0)),
            int(np.floor(self.y0)),
            int(np.ceil(self.x1)),
            int(np.ceil(self.y1)),
        )

    def area(self) -> float:
        return max(self.width, 0.0) * max(self.height, 0.0)


@dataclass(frozen=True, eq=False)
class Box3D:
    """Axis-aligned world-space box, closed on all faces."""

    lo: np.ndarray  # (3,)
    hi: np.ndarray  # (3,)

    def __eq__(self, other):
        if not isinstance(other, Box3D):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((tuple(self.lo), tuple(self.hi)))

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise InvalidBox(f"corners must be 3-vectors, got {lo.shape}, {hi.shape}")
        if np.any(lo > hi):
            raise InvalidBox(f"box min {lo} exceeds max {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def centroid(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def volume(self) -> float:
        return float(np.prod(self.size))

    def expand(self, margin: float) -> "Box3D":
        return Box3D(self.lo - margin, self.hi + margin)

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed box."""
        pts = np.asarray(points, dtype=np.float64)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def to_list(self) -> list[list[float]]:
        return [self.lo.tolist(), self.hi.tolist()]

    @staticmethod
    def from_list(pair) -> "Box3D":
        return Box3D(np.asarray(pair[0], dtype=np.float64), np.asarray(pair[1], dtype=np.float64))


def aabb(points: np.ndarray) -> Box3D:
    """Tight axis-aligned bounding box: componentwise min/max of the points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptySet("cannot bound an empty point set")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    return Box3D(pts.min(axis=0), pts.max(axis=0))
