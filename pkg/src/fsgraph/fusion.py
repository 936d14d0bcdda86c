"""Multi-view fusion of 2D detections into 3D node candidates.

Detections are lifted to world-space point clouds through the depth maps,
then greedily merged across frames: a lifted detection joins the best
existing candidate of its kind when both the geometric overlap and the
label-embedding similarity clear their thresholds, otherwise it seeds a
new candidate. Objects and elements are fused in separate pools so an
element can never merge into an object.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .boxes import Box2D, Box3D, aabb
from .camera import unproject_pixels
from .detection import Detection2D
from .embeddings import EmbeddingBackend, cosine
from .errors import EmptyLift
from .rle import decode_mask
from .scene import Frame, SceneSequence

logger = logging.getLogger(__name__)

__all__ = [
    "ViewRecord", "NodeCandidate", "FusionConfig",
    "lift_detection", "association_score", "fuse_scene", "aabb",
]


@dataclass
class ViewRecord:
    """One view's contribution to a fused candidate."""

    frame_index: int
    box2d: Box2D
    mask_rle: dict = field(repr=False)
    score: float
    contributed_points: int
    crop_ref: Optional[str] = None

    def __post_init__(self):
        if self.contributed_points < 1:
            raise ValueError("a view must contribute at least one point")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass
class NodeCandidate:
    """Fused 3D candidate: point cloud, tight AABB, per-view records."""

    id: str
    kind: str  # "object" | "element"
    label_votes: list[tuple[str, float]]
    points: np.ndarray = field(repr=False)
    bbox3d: Box3D
    views: list[ViewRecord]
    description: Optional["object"] = None  # NodeDescription, filled later

    def top_label(self) -> str:
        """Plurality label, votes weighted by score, ties broken lexicographically."""
        weights: dict[str, float] = {}
        for label, score in self.label_votes:
            weights[label] = weights.get(label, 0.0) + score
        return min(weights, key=lambda lab: (-weights[lab], lab))

    def view_frames(self) -> list[int]:
        return sorted({v.frame_index for v in self.views})


@dataclass(frozen=True)
class FusionConfig:
    voxel_size: float = 0.02
    assoc_geo_threshold: float = 0.4
    assoc_sem_threshold: float = 0.6
    nn_radius: float = 0.025
    min_views: int = 9
    outlier_nn_count: int = 10
    # elements are small; halving the radius keeps nearby distinct knobs apart
    element_radius_scale: float = 0.5

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be > 0")
        if self.min_views < 1:
            raise ValueError("min_views must be >= 1")


def remove_statistical_outliers(points: np.ndarray, nn_count: int, sigma: float = 2.0) -> np.ndarray:
    """Drop points whose mean kNN distance exceeds mean + sigma * std."""
    n = points.shape[0]
    if n <= nn_count:
        return points
    tree = cKDTree(points)
    # k+1 because the closest neighbor of each point is itself
    dists, _ = tree.query(points, k=nn_count + 1)
    mean_dists = dists[:, 1:].mean(axis=1)
    cutoff = mean_dists.mean() + sigma * mean_dists.std()
    return points[mean_dists <= cutoff]


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """One centroid per occupied voxel, output in voxel-key order (deterministic)."""
    keys = np.floor(points / voxel_size).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    sums = np.zeros((uniq.shape[0], 3), dtype=np.float64)
    np.add.at(sums, inverse, points)
    counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
    return sums / counts[:, None]


def lift_detection(det: Detection2D, frame: Frame, cfg: FusionConfig | None = None) -> np.ndarray:
    """Backproject a detection's masked pixels into a world-space point set.

    With cfg=None the result is the raw per-pixel unprojection (the oracle
    the tests compare against); with a config, statistical outliers are
    removed and the cloud is voxel-downsampled.
    """
    mask = decode_mask(det.mask_rle) & frame.valid_depth_mask
    if not mask.any():
        raise EmptyLift(f"detection {det.label!r} on frame {det.frame_index} has no valid depth")
    vs, us = np.nonzero(mask)
    depths = frame.depth[vs, us].astype(np.float64)
    points = unproject_pixels(frame.camera, frame.pose, us.astype(np.float64),
                              vs.astype(np.float64), depths)
    if cfg is None:
        return points
    points = remove_statistical_outliers(points, cfg.outlier_nn_count)
    return voxel_downsample(points, cfg.voxel_size)


def association_score(candidate: NodeCandidate, lifted: np.ndarray, label: str,
                      embedder: EmbeddingBackend, nn_radius: float) -> tuple[float, float]:
    """(geometric, semantic) association between a candidate and a lifted cloud.

    Geometric: fraction of lifted points with a candidate point within
    nn_radius. Semantic: embedding cosine between the detection label and
    the candidate's current top-voted label.
    """
    tree = cKDTree(candidate.points)
    dists, _ = tree.query(lifted, k=1)
    geo = float(np.count_nonzero(dists <= nn_radius)) / float(lifted.shape[0])
    sem = cosine(embedder.embed(label), embedder.embed(candidate.top_label()))
    return geo, sem


def _merge(candidate: NodeCandidate, lifted: np.ndarray, det: Detection2D,
           voxel_size: float) -> None:
    union = np.vstack([candidate.points, lifted])
    candidate.points = voxel_downsample(union, voxel_size)
    candidate.bbox3d = aabb(candidate.points)
    candidate.views.append(ViewRecord(
        frame_index=det.frame_index,
        box2d=det.box,
        mask_rle=det.mask_rle,
        score=det.score,
        contributed_points=int(lifted.shape[0]),
    ))
    candidate.label_votes.append((det.label, det.score))


def fuse_scene(detections: Iterable[Detection2D], scene: SceneSequence,
               cfg: FusionConfig, embedder: EmbeddingBackend) -> list[NodeCandidate]:
    """Greedy streaming fusion over frames in index order.

    Candidates seen in fewer than cfg.min_views distinct frames are
    discarded at the end; survivors get stable sequential ids per kind.
    """
    frames = {f.index: f for f in scene.frames}
    ordered = sorted(detections, key=lambda d: d.frame_index)
    pools: dict[str, list[NodeCandidate]] = {"object": [], "element": []}
    radii = {
        "object": cfg.nn_radius,
        "element": cfg.nn_radius * cfg.element_radius_scale,
    }

    for det in ordered:
        frame = frames.get(det.frame_index)
        if frame is None:
            logger.warning("detection references unknown frame %d, skipped", det.frame_index)
            continue
        try:
            lifted = lift_detection(det, frame, cfg)
        except EmptyLift:
            logger.debug("empty lift for %r on frame %d", det.label, det.frame_index)
            continue
        if lifted.shape[0] == 0:
            continue
        pool = pools[det.kind]
        radius = radii[det.kind]
        best: NodeCandidate | None = None
        best_key: tuple[float, float] | None = None
        for cand in pool:
            geo, sem = association_score(cand, lifted, det.label, embedder, radius)
            if geo >= cfg.assoc_geo_threshold and sem >= cfg.assoc_sem_threshold:
                key = (geo, sem)
                if best_key is None or key > best_key:
                    best, best_key = cand, key
        if best is None:
            pool.append(NodeCandidate(
                id=f"tmp-{det.kind}-{len(pool)}",
                kind=det.kind,
                label_votes=[(det.label, det.score)],
                points=lifted,
                bbox3d=aabb(lifted),
                views=[ViewRecord(
                    frame_index=det.frame_index,
                    box2d=det.box,
                    mask_rle=det.mask_rle,
                    score=det.score,
                    contributed_points=int(lifted.shape[0]),
                )],
            ))
        else:
            _merge(best, lifted, det, cfg.voxel_size)

    out: list[NodeCandidate] = []
    counters = {"object": 0, "element": 0}
    prefixes = {"object": "obj", "element": "elem"}
    for kind in ("object", "element"):
        for cand in pools[kind]:
            if len(cand.view_frames()) < cfg.min_views:
                continue
            cand.id = f"{prefixes[kind]}-{counters[kind]:03d}"
            counters[kind] += 1
            cand.bbox3d = aabb(cand.points)
            out.append(cand)
    logger.info("fused %d candidates (%d objects, %d elements)",
                len(out), counters["object"], counters["element"])
    return out
