"""Posed RGB-D sequence loading.

On-disk layout of a scene directory:

    <scene>/color/<index>.png|jpg     RGB frames
    <scene>/depth/<index>.png         16-bit PNG, millimeters, 0 = invalid
    <scene>/pose/<index>.txt          4x4 row-major camera-to-world
    <scene>/intrinsics.json           {fx, fy, cx, cy, width, height}
    <scene>/meta.json                 optional free-form key/value

Depth is converted to meters on load and resampled (nearest neighbor, so
invalid pixels stay exactly invalid) to the color resolution when needed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import CameraModel, Pose
from .errors import DimensionMismatch, MissingAsset

logger = logging.getLogger(__name__)

COLOR_SUFFIXES = (".png", ".jpg", ".jpeg")
DEPTH_SCALE = 1000.0  # stored millimeters -> meters


@dataclass(frozen=True)
class Frame:
    """One posed RGB-D observation."""

    index: int
    color: np.ndarray = field(repr=False)  # (H, W, 3) uint8
    depth: np.ndarray = field(repr=False)  # (H, W) float32 meters
    camera: CameraModel
    pose: Pose
    valid_depth_mask: np.ndarray | None = field(repr=False, default=None)  # (H, W) bool

    def __post_init__(self):
        if self.color.shape[:2] != self.depth.shape:
            raise DimensionMismatch(
                f"frame {self.index}: color {self.color.shape[:2]} vs depth {self.depth.shape}"
            )
        if self.valid_depth_mask is None:
            object.__setattr__(self, "valid_depth_mask", self.depth > 0)


@dataclass(frozen=True)
class SceneSequence:
    """Ordered posed RGB-D frames of one scene."""

    scene_id: str
    frames: tuple[Frame, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("a scene needs at least one frame")
        indices = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"frame indices must be strictly increasing, got {indices}")

    def frame_by_index(self, index: int) -> Frame:
        for f in self.frames:
            if f.index == index:
                return f
        raise KeyError(f"no frame with index {index}")


def _load_color(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def _load_depth(path: Path, target_size: tuple[int, int]) -> np.ndarray:
    """Load a 16-bit millimeter PNG as meters, resampled to (width, height)."""
    with Image.open(path) as im:
        if im.size != target_size:
            im = im.resize(target_size, resample=Image.NEAREST)
        raw = np.asarray(im)
    if raw.dtype not in (np.uint16, np.int32, np.uint8):
        raise DimensionMismatch(f"{path}: unexpected depth dtype {raw.dtype}")
    return (raw.astype(np.float64) / DEPTH_SCALE).astype(np.float32)


def _load_pose(path: Path) -> Pose:
    mat = np.loadtxt(path, dtype=np.float64)
    return Pose.from_matrix(mat.reshape(4, 4))


def load_scene(path: str | Path) -> SceneSequence:
    """Load a scene directory into an immutable SceneSequence.

    Raises MissingAsset when a frame lacks depth/pose/intrinsics,
    MalformedPose for a bad rotation, DimensionMismatch when the color
    resolution disagrees with the intrinsics.
    """
    root = Path(path)
    if not root.is_dir():
        raise MissingAsset(f"scene directory {root} does not exist")
    intrinsics_path = root / "intrinsics.json"
    if not intrinsics_path.is_file():
        raise MissingAsset(f"{root}: intrinsics.json missing")
    intr = json.loads(intrinsics_path.read_text())
    camera = CameraModel(
        fx=float(intr["fx"]),
        fy=float(intr["fy"]),
        cx=float(intr["cx"]),
        cy=float(intr["cy"]),
        width=int(intr["width"]),
        height=int(intr["height"]),
    )

    color_dir = root / "color"
    if not color_dir.is_dir():
        raise MissingAsset(f"{root}: color/ missing")
    color_files: dict[int, Path] = {}
    for f in sorted(color_dir.iterdir()):
        if f.suffix.lower() in COLOR_SUFFIXES:
            color_files[int(f.stem)] = f
    if not color_files:
        raise MissingAsset(f"{root}: no color frames found")

    frames = []
    for index in sorted(color_files):
        color = _load_color(color_files[index])
        if (color.shape[1], color.shape[0]) != (camera.width, camera.height):
            raise DimensionMismatch(
                f"frame {index}: color is {color.shape[1]}x{color.shape[0]}, "
                f"intrinsics say {camera.width}x{camera.height}"
            )
        depth_path = root / "depth" / f"{index}.png"
        if not depth_path.is_file():
            raise MissingAsset(f"frame {index}: depth file {depth_path} missing")
        pose_path = root / "pose" / f"{index}.txt"
        if not pose_path.is_file():
            raise MissingAsset(f"frame {index}: pose file {pose_path} missing")
        depth = _load_depth(depth_path, (camera.width, camera.height))
        pose = _load_pose(pose_path)
        frames.append(Frame(index=index, color=color, depth=depth, camera=camera, pose=pose))

    meta_path = root / "meta.json"
    metadata = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    logger.info("loaded scene %s: %d frames", root.name, len(frames))
    return SceneSequence(scene_id=root.name, frames=tuple(frames), metadata=metadata)
