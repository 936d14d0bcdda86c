"""Dict <-> dataclass conversion for the stage checkpoint files."""
from __future__ import annotations

import numpy as np

from .boxes import Box2D, Box3D
from .description import NodeDescription
from .detection import Detection2D, TagSet
from .fusion import NodeCandidate, ViewRecord
from .reasoning import FunctionalEdge, RemoteProposal


def tagset_to_dict(ts: TagSet) -> dict:
    return {
        "frame_index": ts.frame_index,
        "object_tags": list(ts.object_tags),
        "valid_tags": list(ts.valid_tags),
        "element_prompt_pairs": [list(p) for p in ts.element_prompt_pairs],
    }


def tagset_from_dict(d: dict) -> TagSet:
    return TagSet(
        frame_index=int(d["frame_index"]),
        object_tags=tuple(d["object_tags"]),
        valid_tags=tuple(d["valid_tags"]),
        element_prompt_pairs=tuple((p[0], p[1]) for p in d["element_prompt_pairs"]),
    )


def detection_to_dict(det: Detection2D) -> dict:
    return {
        "frame_index": det.frame_index,
        "kind": det.kind,
        "label": det.label,
        "box": list(det.box),
        "mask_rle": det.mask_rle,
        "score": det.score,
        "source_prompt": det.source_prompt,
    }


def detection_from_dict(d: dict) -> Detection2D:
    return Detection2D(
        frame_index=int(d["frame_index"]),
        kind=d["kind"],
        label=d["label"],
        box=Box2D(*[float(v) for v in d["box"]]),
        mask_rle=d["mask_rle"],
        score=float(d["score"]),
        source_prompt=d["source_prompt"],
    )


def view_to_dict(view: ViewRecord) -> dict:
    return {
        "frame_index": view.frame_index,
        "box2d": list(view.box2d),
        "mask_rle": view.mask_rle,
        "score": view.score,
        "contributed_points": view.contributed_points,
        "crop_ref": view.crop_ref,
    }


def view_from_dict(d: dict) -> ViewRecord:
    return ViewRecord(
        frame_index=int(d["frame_index"]),
        box2d=Box2D(*[float(v) for v in d["box2d"]]),
        mask_rle=d["mask_rle"],
        score=float(d["score"]),
        contributed_points=int(d["contributed_points"]),
        crop_ref=d.get("crop_ref"),
    )


def candidate_to_dict(cand: NodeCandidate) -> dict:
    """Candidate metadata; the point cloud is checkpointed separately as PLY."""
    return {
        "id": cand.id,
        "kind": cand.kind,
        "label_votes": [[label, score] for label, score in cand.label_votes],
        "bbox3d": cand.bbox3d.to_list(),
        "views": [view_to_dict(v) for v in cand.views],
        "num_points": int(cand.points.shape[0]),
    }


def candidate_from_dict(d: dict, points: np.ndarray) -> NodeCandidate:
    return NodeCandidate(
        id=d["id"],
        kind=d["kind"],
        label_votes=[(v[0], float(v[1])) for v in d["label_votes"]],
        points=points,
        bbox3d=Box3D.from_list(d["bbox3d"]),
        views=[view_from_dict(v) for v in d["views"]],
    )


def description_to_dict(desc: NodeDescription) -> dict:
    return {
        "summary": desc.summary,
        "per_view_captions": [[f, s, c] for f, s, c in desc.per_view_captions],
        "views_used": list(desc.views_used),
        "model_meta": desc.model_meta,
    }


def description_from_dict(d: dict) -> NodeDescription:
    return NodeDescription(
        summary=d["summary"],
        per_view_captions=tuple((int(f), float(s), c) for f, s, c in d["per_view_captions"]),
        views_used=tuple(int(v) for v in d["views_used"]),
        model_meta=dict(d.get("model_meta", {})),
    )


def edge_to_dict(edge: FunctionalEdge) -> dict:
    return {
        "element_id": edge.element_id,
        "object_id": edge.object_id,
        "kind": edge.kind,
        "relation": edge.relation,
        "confidence": edge.confidence,
        "evidence": list(edge.evidence),
    }


def edge_from_dict(d: dict) -> FunctionalEdge:
    return FunctionalEdge(
        element_id=d["element_id"],
        object_id=d["object_id"],
        kind=d["kind"],
        relation=d["relation"],
        confidence=float(d["confidence"]),
        evidence=tuple(d.get("evidence", [])),
    )


def proposal_to_dict(prop: RemoteProposal) -> dict:
    return {
        "element_id": prop.element_id,
        "object_id": prop.object_id,
        "feasibility_text": prop.feasibility_text,
        "confidence": prop.confidence,
        "relation": prop.relation,
    }


def proposal_from_dict(d: dict) -> RemoteProposal:
    return RemoteProposal(
        element_id=d["element_id"],
        object_id=d["object_id"],
        feasibility_text=d["feasibility_text"],
        confidence=float(d["confidence"]),
        relation=d["relation"],
    )
