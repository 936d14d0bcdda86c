"""Per-frame 2D detection of objects and interactive elements.

Objects are detected from frame-level tags; interactive elements from
composed two-tag prompts ("door. handle") so the grounding detector gets
the assistive object context. The detector itself runs out of process,
behind either a fixture directory or an HTTP service speaking the fixture
schema.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import requests

from .backend import ModelClient, ModelRequest
from .boxes import Box2D
from .errors import BackendUnreachable, FixtureMiss
from .jsonutil import read_json, sha256_hex
from .prompting import render
from .rle import decode_mask, encode_mask
from .scene import Frame
from .structured import complete_json

logger = logging.getLogger(__name__)

_WS = re.compile(r"\s+")

PROMPT_SEPARATOR = ". "


def normalize_tag(tag: str) -> str:
    """Lowercase, trim, collapse internal whitespace."""
    return _WS.sub(" ", tag.strip().lower())


def normalize_tags(tags) -> list[str]:
    """Normalize and deduplicate, preserving first-seen order."""
    seen: dict[str, None] = {}
    for tag in tags:
        norm = normalize_tag(tag)
        if norm:
            seen.setdefault(norm, None)
    return list(seen)


@dataclass(frozen=True)
class TagSet:
    """Object tags of one frame plus the element prompts derived from them."""

    frame_index: int
    object_tags: tuple[str, ...]
    valid_tags: tuple[str, ...]
    element_prompt_pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        objects = set(self.object_tags)
        valid = set(self.valid_tags)
        if not valid <= objects:
            raise ValueError("valid_tags must be a subset of object_tags")
        for obj, _ in self.element_prompt_pairs:
            if obj not in valid:
                raise ValueError(f"pair references non-valid tag {obj!r}")


@dataclass(frozen=True)
class Detection2D:
    """One tagged box+mask on one frame."""

    frame_index: int
    kind: str  # "object" | "element"
    label: str
    box: Box2D
    mask_rle: dict = field(repr=False)
    score: float
    source_prompt: str

    def __post_init__(self):
        if self.kind not in ("object", "element"):
            raise ValueError(f"bad kind {self.kind!r}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")

    def mask(self) -> np.ndarray:
        return decode_mask(self.mask_rle)


@dataclass(frozen=True)
class DetectionConfig:
    score_threshold: float = 0.25
    compose_element_prompts: bool = True


def prompt_digest(prompt: str) -> str:
    """Filesystem-safe key for one detector prompt."""
    return sha256_hex(prompt.encode("utf-8"))[:16]


class DetectorBackend(Protocol):
    def tag(self, frame: Frame) -> list[str]: ...

    def detect(self, frame: Frame, prompt: str) -> dict: ...


class FixtureDetector:
    """Reads `tags/<frame>.json` and `detections/<frame>/<digest>.json`."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def tag(self, frame: Frame) -> list[str]:
        path = self.root / "tags" / f"{frame.index}.json"
        if not path.is_file():
            raise FixtureMiss(f"no tag fixture for frame {frame.index} at {path}")
        return list(read_json(path)["tags"])

    def detect(self, frame: Frame, prompt: str) -> dict:
        path = self.root / "detections" / str(frame.index) / f"{prompt_digest(prompt)}.json"
        if not path.is_file():
            raise FixtureMiss(
                f"no detection fixture for frame {frame.index}, prompt {prompt!r} at {path}"
            )
        return read_json(path)


class HttpDetector:
    """POST /tag and /detect against a detector service speaking the fixture schema."""

    def __init__(self, base_url: str, scene_id: str = "", timeout: float = 60.0,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.scene_id = scene_id
        self.timeout = timeout
        self.session = session or requests.Session()

    def _image_ref(self, frame: Frame) -> str:
        return f"{self.scene_id}/{frame.index}" if self.scene_id else str(frame.index)

    def _post(self, endpoint: str, payload: dict) -> dict:
        try:
            resp = self.session.post(f"{self.base_url}{endpoint}", json=payload,
                                     timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise BackendUnreachable(f"detector {self.base_url}{endpoint}: {exc}") from exc
        return resp.json()

    def tag(self, frame: Frame) -> list[str]:
        return list(self._post("/tag", {"image_ref": self._image_ref(frame)})["tags"])

    def detect(self, frame: Frame, prompt: str) -> dict:
        return self._post("/detect", {"image_ref": self._image_ref(frame), "prompt": prompt})


def tag_frame(frame: Frame, tagger: DetectorBackend) -> list[str]:
    """Frame-level object tags, normalized and deduplicated."""
    return normalize_tags(tagger.tag(frame))


def generate_element_prompts(object_tags, llm: ModelClient, frame_index: int = 0) -> TagSet:
    """Ask the LLM which tags are interactable and what their elements are.

    Non-interactable tags are excluded from valid_tags and produce no
    prompt pairs.
    """
    object_tags = normalize_tags(object_tags)
    valid: list[str] = []
    pairs: list[tuple[str, str]] = []
    for tag in object_tags:
        request = ModelRequest(
            messages=(("user", render("element_tags", object_tag=tag)),),
            model_hint="llm",
        )
        reply = complete_json(llm, request, required_keys=("interactable",))
        if not reply.get("interactable"):
            continue
        elements = normalize_tags(reply.get("elements", []))
        if not elements:
            continue
        valid.append(tag)
        pairs.extend((tag, element) for element in elements)
    return TagSet(
        frame_index=frame_index,
        object_tags=tuple(object_tags),
        valid_tags=tuple(valid),
        element_prompt_pairs=tuple(pairs),
    )


def compose_prompt(pair: tuple[str, str]) -> str:
    """Two-tag grounding prompt: assistive object tag, period, element tag."""
    object_tag, element_tag = pair
    if not object_tag or not element_tag:
        raise ValueError("both tags must be nonempty")
    return f"{object_tag}{PROMPT_SEPARATOR}{element_tag}"


def _clamp_detection(frame: Frame, label: str, box_values, mask_rle, score: float,
                     kind: str, prompt: str) -> Detection2D | None:
    h, w = frame.depth.shape
    box = Box2D(*[float(v) for v in box_values]).clamp(w, h)
    if box.width <= 0 or box.height <= 0:
        return None
    mask = decode_mask(mask_rle)
    if mask.shape != (h, w):
        raise ValueError(f"mask size {mask.shape} does not match frame {h}x{w}")
    x0, y0, x1, y1 = box.pixel_bounds()
    boxed = np.zeros_like(mask)
    boxed[y0:y1, x0:x1] = mask[y0:y1, x0:x1]
    if not boxed.any():
        return None
    return Detection2D(
        frame_index=frame.index,
        kind=kind,
        label=label,
        box=box,
        mask_rle=encode_mask(boxed),
        score=float(score),
        source_prompt=prompt,
    )


def detect(frame: Frame, prompt: str, detector: DetectorBackend,
           cfg: DetectionConfig | None = None, element_tag: str | None = None) -> list[Detection2D]:
    """Run one grounding prompt on one frame.

    For element prompts only the detections matching the element tag are
    kept; the tag comes either from the explicit argument or from the
    composed-prompt tail after ". ".
    """
    cfg = cfg or DetectionConfig()
    if element_tag is None and PROMPT_SEPARATOR in prompt:
        element_tag = prompt.split(PROMPT_SEPARATOR, 1)[1]
    kind = "element" if element_tag is not None else "object"
    payload = detector.detect(frame, prompt)
    out = []
    for det in payload.get("detections", []):
        label = normalize_tag(det["label"])
        score = float(det["score"])
        if score < cfg.score_threshold:
            continue
        if element_tag is not None and label != normalize_tag(element_tag):
            continue
        clamped = _clamp_detection(frame, label, det["box"], det["mask_rle"],
                                   score, kind, prompt)
        if clamped is not None:
            out.append(clamped)
    return out


def detect_frame(frame: Frame, detector: DetectorBackend, llm: ModelClient,
                 cfg: DetectionConfig | None = None) -> tuple[TagSet, list[Detection2D]]:
    """Full progressive detection for one frame: tags, element prompts, grounding."""
    cfg = cfg or DetectionConfig()
    tags = tag_frame(frame, detector)
    tag_set = generate_element_prompts(tags, llm, frame_index=frame.index)
    detections: list[Detection2D] = []
    for tag in tag_set.object_tags:
        detections.extend(detect(frame, tag, detector, cfg))
    for pair in tag_set.element_prompt_pairs:
        if cfg.compose_element_prompts:
            prompt = compose_prompt(pair)
            detections.extend(detect(frame, prompt, detector, cfg))
        else:
            detections.extend(detect(frame, pair[1], detector, cfg, element_tag=pair[1]))
    return tag_set, detections
