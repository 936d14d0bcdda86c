"""Pinhole camera model, camera-to-world poses, and projection math.

All 3D quantities are in meters; pixel (u, v) maps to the ray through
(u, v) exactly (no half-pixel offset), which the tests' hand-computed
oracles rely on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, MalformedPose, OutOfBounds, ZeroDepth

ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform: p_world = R @ p_cam + t."""

    rotation: np.ndarray = field(repr=False)  # (3, 3)
    translation: np.ndarray = field(repr=False)  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3):
            raise MalformedPose(f"rotation must be 3x3, got {r.shape}")
        if t.shape != (3,):
            raise MalformedPose(f"translation must be a 3-vector, got {t.shape}")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise MalformedPose(f"rotation not orthonormal (max |R^T R - I| = {err:.3e})")
        det = np.linalg.det(r)
        if abs(det - 1.0) > ORTHONORMAL_TOL:
            raise MalformedPose(f"rotation determinant {det:.9f} != 1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(mat: np.ndarray) -> "Pose":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != (4, 4):
            raise MalformedPose(f"pose matrix must be 4x4, got {mat.shape}")
        bottom = mat[3]
        if not np.allclose(bottom, [0.0, 0.0, 0.0, 1.0], atol=1e-9):
            raise MalformedPose(f"pose matrix bottom row must be [0 0 0 1], got {bottom}")
        return Pose(mat[:3, :3], mat[:3, 3])

    def matrix(self) -> np.ndarray:
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def inverse(self) -> "Pose":
        rinv = self.rotation.T
        return Pose(rinv, -(rinv @ self.translation))


def unproject(camera: CameraModel, pose: Pose, pixel: tuple[int, int], depth: float) -> np.ndarray:
    """Lift one pixel with its depth to a 3D world point.

    Returns R @ [(u-cx)*d/fx, (v-cy)*d/fy, d] + t.  The expression is kept
    in this exact elementwise form so that the vectorized variant below is
    bit-identical to it.
    """
    u, v = pixel
    if depth <= 0:
        raise ZeroDepth(f"depth must be > 0, got {depth}")
    if not (0 <= u < camera.width and 0 <= v < camera.height):
        raise OutOfBounds(f"pixel ({u}, {v}) outside {camera.width}x{camera.height}")
    x = (u - camera.cx) * depth / camera.fx
    y = (v - camera.cy) * depth / camera.fy
    z = depth
    r, t = pose.rotation, pose.translation
    return np.array([
        r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0],
        r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1],
        r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2],
    ])


def unproject_pixels(
    camera: CameraModel, pose: Pose, us: np.ndarray, vs: np.ndarray, depths: np.ndarray
) -> np.ndarray:
    """Vectorized unproject; elementwise results match `unproject` exactly."""
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    x = (us - camera.cx) * depths / camera.fx
    y = (vs - camera.cy) * depths / camera.fy
    z = depths
    r, t = pose.rotation, pose.translation
    wx = r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0]
    wy = r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1]
    wz = r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2]
    return np.stack([wx, wy, wz], axis=-1)


def project(camera: CameraModel, pose: Pose, point: np.ndarray) -> tuple[float, float, float]:
    """Project a world point to (u, v, depth); inverse of `unproject`.

    Raises BehindCamera when the camera-space z is <= 0.
    """
    p = np.asarray(point, dtype=np.float64)
    r, t = pose.rotation, pose.translation
    d = p - t
    # camera-space point is R^T @ (p - t)
    x = r[0, 0] * d[0] + r[1, 0] * d[1] + r[2, 0] * d[2]
    y = r[0, 1] * d[0] + r[1, 1] * d[1] + r[2, 1] * d[2]
    z = r[0, 2] * d[0] + r[1, 2] * d[1] + r[2, 2] * d[2]
    if z <= 0:
        raise BehindCamera(f"camera-space z = {z:.6g} <= 0")
    u = camera.fx * x / z + camera.cx
    v = camera.fy * y / z + camera.cy
    return (u, v, z)
