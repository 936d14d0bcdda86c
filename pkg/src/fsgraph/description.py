"""Natural-language descriptions of fused candidates.

Views are ranked by detection confidence times the view's share of the
fused point cloud; the best views are cropped (multi-scale with a red
outline for small elements), captioned by the VLM, and the captions are
summarized into one description by the LLM.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Optional

from PIL import Image, ImageDraw

from .backend import ImagePayload, ModelClient, ModelRequest
from .boxes import Box2D
from .fusion import NodeCandidate, ViewRecord
from .prompting import render
from .scene import Frame, SceneSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeDescription:
    summary: str
    per_view_captions: tuple[tuple[int, float, str], ...]  # (frame_index, scale, caption)
    views_used: tuple[int, ...]
    model_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.summary:
            raise ValueError("summary must be nonempty")


@dataclass(frozen=True)
class CropSpec:
    """A (possibly enlarged) crop window, with an optional box to outline in red."""

    frame_index: int
    box: Box2D
    scale: float
    highlight: Optional[Box2D] = None

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")


@dataclass(frozen=True)
class DescriptionConfig:
    element_scales: tuple[float, ...] = (1.0, 2.0, 4.0)
    max_views: int = 9
    outline_px: int = 3


def view_rank_score(view: ViewRecord, total_points: int) -> float:
    """Detection confidence weighted by the view's geometric contribution."""
    return view.score * view.contributed_points / total_points


def rank_views(candidate: NodeCandidate, max_views: int = 9) -> list[ViewRecord]:
    """Views sorted by descending rank score, ties broken by earlier frame;
    returns the top min(max_views, available)."""
    n_points = candidate.points.shape[0]
    if not candidate.views or n_points == 0:
        raise ValueError(f"candidate {candidate.id} has no views or points")
    ranked = sorted(
        candidate.views,
        key=lambda v: (-view_rank_score(v, n_points), v.frame_index),
    )
    return ranked[: min(max_views, len(ranked))]


def make_crops(view: ViewRecord, kind: str, cfg: DescriptionConfig,
               image_size: tuple[int, int]) -> list[CropSpec]:
    """Crop windows for one view: a single tight crop for objects, one
    enlarged crop per configured scale (with the original box highlighted)
    for elements."""
    width, height = image_size
    if kind == "object":
        return [CropSpec(view.frame_index, view.box2d.clamp(width, height), 1.0)]
    crops = []
    for scale in cfg.element_scales:
        enlarged = view.box2d.scale_about_center(scale).clamp(width, height)
        crops.append(CropSpec(view.frame_index, enlarged, scale, highlight=view.box2d))
    return crops


def render_crop(frame: Frame, spec: CropSpec, outline_px: int = 3) -> bytes:
    """Crop the frame's color image and draw the highlight outline; PNG bytes."""
    x0, y0, x1, y1 = spec.box.clamp(frame.camera.width, frame.camera.height).pixel_bounds()
    img = Image.fromarray(frame.color[y0:y1, x0:x1])
    if spec.highlight is not None:
        draw = ImageDraw.Draw(img)
        hx0, hy0, hx1, hy1 = spec.highlight.pixel_bounds()
        # outline drawn on the already-cropped image so it is never scaled away
        draw.rectangle(
            (hx0 - x0, hy0 - y0, hx1 - x0 - 1, hy1 - y0 - 1),
            outline=(255, 0, 0),
            width=outline_px,
        )
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def caption_crop(frame: Frame, spec: CropSpec, kind: str, label: str,
                 vlm: ModelClient, cfg: DescriptionConfig) -> str:
    template = "describe_element" if kind == "element" else "describe_object"
    prompt = render(template, label=label)
    request = ModelRequest(
        messages=(("user", prompt),),
        images=(ImagePayload(render_crop(frame, spec, cfg.outline_px)),),
        model_hint="vlm",
    )
    return vlm.complete(request).text.strip()


def describe_candidate(candidate: NodeCandidate, scene: SceneSequence,
                       vlm: ModelClient, llm: ModelClient,
                       cfg: DescriptionConfig | None = None) -> NodeDescription:
    """Caption the top-ranked views of a candidate and summarize into one text.

    Empty captions are skipped; if every caption is empty the summary
    falls back to the top-voted label so the description stays nonempty.
    """
    cfg = cfg or DescriptionConfig()
    label = candidate.top_label()
    top = rank_views(candidate, cfg.max_views)
    captions: list[tuple[int, float, str]] = []
    for view in top:
        frame = scene.frame_by_index(view.frame_index)
        for spec in make_crops(view, candidate.kind, cfg,
                               (frame.camera.width, frame.camera.height)):
            caption = caption_crop(frame, spec, candidate.kind, label, vlm, cfg)
            if caption:
                captions.append((view.frame_index, spec.scale, caption))
    if captions:
        listing = "\n".join(f"- {text}" for _, _, text in captions)
        request = ModelRequest(
            messages=(("user", render("summarize", label=label, captions=listing)),),
            model_hint="llm",
        )
        summary = llm.complete(request).text.strip() or label
    else:
        logger.warning("all captions empty for %s, falling back to label", candidate.id)
        summary = label
    return NodeDescription(
        summary=summary,
        per_view_captions=tuple(captions),
        views_used=tuple(v.frame_index for v in top),
        model_meta={"vlm": vlm.backend.backend_id, "llm": llm.backend.backend_id},
    )
