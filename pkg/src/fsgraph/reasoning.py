"""Functional edge inference.

Two sequential stages: local edges first (element rigidly attached to the
object it operates, gated by spatial overlap and confirmed by the LLM),
then confidence-aware remote edges over the elements the first stage left
unassigned (LLM proposes targets, VLM assesses per-pair feasibility from
the top views, LLM scores all of an element's pairs together). A direct
single-call mode replaces both stages behind a config flag.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .backend import ImagePayload, ModelClient, ModelRequest
from .description import DescriptionConfig, make_crops, rank_views, render_crop
from .fusion import NodeCandidate
from .prompting import render
from .scene import SceneSequence
from .structured import complete_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FunctionalEdge:
    """Directed element -> object relation."""

    element_id: str
    object_id: str
    kind: str  # "local" | "remote"
    relation: str
    confidence: float
    evidence: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("local", "remote"):
            raise ValueError(f"bad edge kind {self.kind!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class RemoteProposal:
    element_id: str
    object_id: str
    feasibility_text: str
    confidence: float
    relation: str


@dataclass(frozen=True)
class ReasoningConfig:
    local_overlap_threshold: float = 0.5
    local_margin: float = 0.05
    sequential: bool = True
    remote_select: str = "best"  # "best" | "all"
    description: DescriptionConfig = field(default_factory=DescriptionConfig)


def spatial_overlap(obj: NodeCandidate, elem: NodeCandidate, margin: float) -> float:
    """Fraction of the element's points inside the object's margin-expanded box."""
    box = obj.bbox3d.expand(margin)
    inside = box.contains_points(elem.points)
    return float(np.count_nonzero(inside)) / float(elem.points.shape[0])


def _summary(candidate: NodeCandidate) -> str:
    if candidate.description is not None:
        return candidate.description.summary
    return candidate.top_label()


def _box_text(candidate: NodeCandidate) -> str:
    lo = ", ".join(f"{v:.3f}" for v in candidate.bbox3d.lo)
    hi = ", ".join(f"{v:.3f}" for v in candidate.bbox3d.hi)
    return f"[[{lo}], [{hi}]]"


def _clamp_confidence(value, context: str) -> float:
    conf = float(value)
    if conf < 0.0 or conf > 1.0:
        logger.warning("confidence %.3f outside [0, 1] for %s, clamping", conf, context)
        conf = min(max(conf, 0.0), 1.0)
    return conf


def infer_local_edges(objects: list[NodeCandidate], elements: list[NodeCandidate],
                      llm: ModelClient, cfg: ReasoningConfig,
                      ) -> tuple[list[FunctionalEdge], set[str]]:
    """Local stage: one LLM feasibility call per spatially overlapping pair.

    An element feasible with several objects keeps only the highest-overlap
    pair (ties broken by smaller object volume, then object id).
    """
    edges: list[FunctionalEdge] = []
    assigned: set[str] = set()
    for elem in sorted(elements, key=lambda c: c.id):
        feasible: list[tuple[float, float, str, str]] = []  # (-overlap, volume, obj_id, relation)
        for obj in sorted(objects, key=lambda c: c.id):
            overlap = spatial_overlap(obj, elem, cfg.local_margin)
            if overlap < cfg.local_overlap_threshold:
                continue
            request = ModelRequest(
                messages=(("user", render(
                    "reason_local",
                    element_description=_summary(elem),
                    element_box=_box_text(elem),
                    object_description=_summary(obj),
                    object_box=_box_text(obj),
                )),),
                model_hint="llm",
            )
            reply = complete_json(llm, request, required_keys=("feasible",))
            if reply.get("feasible"):
                relation = str(reply.get("relation", "")).strip() or "operates"
                feasible.append((-overlap, obj.bbox3d.volume(), obj.id, relation))
        if feasible:
            feasible.sort()
            _, _, obj_id, relation = feasible[0]
            edges.append(FunctionalEdge(
                element_id=elem.id, object_id=obj_id, kind="local",
                relation=relation, confidence=1.0,
            ))
            assigned.add(elem.id)
    return edges, assigned


def propose_remote_targets(unassigned: list[NodeCandidate], objects: list[NodeCandidate],
                           llm: ModelClient) -> list[tuple[str, str]]:
    """Remote stage 1: per element, ask the LLM for plausible target object ids."""
    known = {obj.id for obj in objects}
    listing = "\n".join(f"- {obj.id}: {_summary(obj)}" for obj in sorted(objects, key=lambda c: c.id))
    pairs: list[tuple[str, str]] = []
    for elem in sorted(unassigned, key=lambda c: c.id):
        request = ModelRequest(
            messages=(("user", render(
                "reason_remote_targets",
                element_description=_summary(elem),
                object_listing=listing or "(none)",
            )),),
            model_hint="llm",
        )
        reply = complete_json(llm, request, required_keys=("targets",))
        seen: set[str] = set()
        for target in reply["targets"]:
            target = str(target)
            if target in known and target not in seen:
                pairs.append((elem.id, target))
                seen.add(target)
            elif target not in known:
                logger.warning("remote proposal for %s names unknown object %r, dropped",
                               elem.id, target)
    return pairs


def _top1_crop_png(candidate: NodeCandidate, scene: SceneSequence,
                   cfg: DescriptionConfig) -> bytes:
    view = rank_views(candidate, 1)[0]
    frame = scene.frame_by_index(view.frame_index)
    specs = make_crops(view, candidate.kind, cfg, (frame.camera.width, frame.camera.height))
    # elements: widest crop carries the context needed for layout cues
    spec = specs[-1]
    return render_crop(frame, spec, cfg.outline_px)


def assess_feasibility(element: NodeCandidate, obj: NodeCandidate, scene: SceneSequence,
                       vlm: ModelClient, cfg: ReasoningConfig) -> str:
    """Remote stage 2: the VLM sees the top-1 crops of both candidates and
    returns a free-text feasibility assessment, stored verbatim."""
    request = ModelRequest(
        messages=(("user", render(
            "reason_feasibility",
            element_description=_summary(element),
            object_description=_summary(obj),
        )),),
        images=(
            ImagePayload(_top1_crop_png(element, scene, cfg.description)),
            ImagePayload(_top1_crop_png(obj, scene, cfg.description)),
        ),
        model_hint="vlm",
    )
    return vlm.complete(request).text.strip()


def score_remote_edges(proposals_by_element: dict[str, list[tuple[str, str]]],
                       elements_by_id: dict[str, NodeCandidate],
                       llm: ModelClient) -> list[RemoteProposal]:
    """Remote stage 3: per element, one LLM call over all its feasibility
    texts yields a confidence and relation per pair (clamped to [0, 1],
    never renormalized)."""
    out: list[RemoteProposal] = []
    for elem_id in sorted(proposals_by_element):
        pairs = proposals_by_element[elem_id]
        if not pairs:
            continue
        listing = "\n".join(f"- object {obj_id}: {text}" for obj_id, text in pairs)
        request = ModelRequest(
            messages=(("user", render(
                "reason_score",
                element_description=_summary(elements_by_id[elem_id]),
                pair_listing=listing,
            )),),
            model_hint="llm",
        )
        reply = complete_json(llm, request, required_keys=("pairs",))
        scored = {str(p.get("object_id")): p for p in reply["pairs"] if isinstance(p, dict)}
        for obj_id, text in pairs:
            entry = scored.get(obj_id)
            if entry is None:
                logger.warning("score reply omitted pair (%s, %s); confidence 0", elem_id, obj_id)
                conf, relation = 0.0, ""
            else:
                conf = _clamp_confidence(entry.get("confidence", 0.0), f"({elem_id}, {obj_id})")
                relation = str(entry.get("relation", "")).strip() or "operates"
            out.append(RemoteProposal(
                element_id=elem_id, object_id=obj_id,
                feasibility_text=text, confidence=conf, relation=relation,
            ))
    return out


def select_remote_edges(proposals: list[RemoteProposal], mode: str = "best") -> list[FunctionalEdge]:
    """mode=best keeps each element's single highest-confidence proposal
    (ties to the lexicographically smaller object id); mode=all keeps every
    proposal as an edge."""
    if mode not in ("best", "all"):
        raise ValueError(f"bad mode {mode!r}")
    if mode == "all":
        chosen = list(proposals)
    else:
        by_element: dict[str, RemoteProposal] = {}
        for prop in proposals:
            cur = by_element.get(prop.element_id)
            if cur is None or prop.confidence > cur.confidence or (
                prop.confidence == cur.confidence and prop.object_id < cur.object_id
            ):
                by_element[prop.element_id] = prop
        chosen = list(by_element.values())
    edges = [
        FunctionalEdge(
            element_id=p.element_id, object_id=p.object_id, kind="remote",
            relation=p.relation, confidence=p.confidence,
            evidence=(p.feasibility_text,) if p.feasibility_text else (),
        )
        for p in chosen
    ]
    return sorted(edges, key=lambda e: (e.element_id, e.object_id))


def infer_edges_direct(objects: list[NodeCandidate], elements: list[NodeCandidate],
                       llm: ModelClient, cfg: ReasoningConfig) -> list[FunctionalEdge]:
    """Single-call edge inference (sequential reasoning disabled).

    Output obeys the same schema and invariants as the two-stage path;
    mode=best still keeps at most one edge per element.
    """
    object_ids = {o.id for o in objects}
    element_ids = {e.id for e in elements}
    obj_listing = "\n".join(
        f"- {o.id}: {_summary(o)} box {_box_text(o)}" for o in sorted(objects, key=lambda c: c.id)
    )
    elem_listing = "\n".join(
        f"- {e.id}: {_summary(e)} box {_box_text(e)}" for e in sorted(elements, key=lambda c: c.id)
    )
    request = ModelRequest(
        messages=(("user", render(
            "reason_direct",
            object_listing=obj_listing or "(none)",
            element_listing=elem_listing or "(none)",
        )),),
        model_hint="llm",
    )
    reply = complete_json(llm, request, required_keys=("edges",))
    parsed: list[FunctionalEdge] = []
    for entry in reply["edges"]:
        if not isinstance(entry, dict):
            continue
        elem_id = str(entry.get("element_id"))
        obj_id = str(entry.get("object_id"))
        kind = str(entry.get("kind", "remote"))
        if elem_id not in element_ids or obj_id not in object_ids or kind not in ("local", "remote"):
            logger.warning("direct reply edge %r invalid, dropped", entry)
            continue
        conf = 1.0 if kind == "local" else _clamp_confidence(
            entry.get("confidence", 0.0), f"({elem_id}, {obj_id})")
        relation = str(entry.get("relation", "")).strip() or "operates"
        parsed.append(FunctionalEdge(
            element_id=elem_id, object_id=obj_id, kind=kind,
            relation=relation, confidence=conf,
        ))
    if cfg.remote_select == "best":
        best: dict[str, FunctionalEdge] = {}
        for edge in parsed:
            cur = best.get(edge.element_id)
            if cur is None or edge.confidence > cur.confidence or (
                edge.confidence == cur.confidence and edge.object_id < cur.object_id
            ):
                best[edge.element_id] = edge
        parsed = list(best.values())
    return sorted(parsed, key=lambda e: (e.element_id, e.object_id))


@dataclass(frozen=True)
class ReasoningResult:
    local_edges: tuple[FunctionalEdge, ...]
    remote_proposals: tuple[RemoteProposal, ...]
    edges: tuple[FunctionalEdge, ...]


def run_reasoning(objects: list[NodeCandidate], elements: list[NodeCandidate],
                  scene: SceneSequence, llm: ModelClient, vlm: ModelClient,
                  cfg: ReasoningConfig | None = None) -> ReasoningResult:
    """Run both stages (or the direct single call) and return the edge set,
    byte-stably ordered by (element_id, object_id)."""
    cfg = cfg or ReasoningConfig()
    if not cfg.sequential:
        edges = infer_edges_direct(objects, elements, llm, cfg)
        local = tuple(e for e in edges if e.kind == "local")
        return ReasoningResult(local_edges=local, remote_proposals=(), edges=tuple(edges))

    local_edges, assigned = infer_local_edges(objects, elements, llm, cfg)
    unassigned = [e for e in elements if e.id not in assigned]
    pairs = propose_remote_targets(unassigned, objects, llm)

    elements_by_id = {e.id: e for e in elements}
    objects_by_id = {o.id: o for o in objects}
    with_texts: dict[str, list[tuple[str, str]]] = {}
    for elem_id, obj_id in pairs:
        text = assess_feasibility(elements_by_id[elem_id], objects_by_id[obj_id],
                                  scene, vlm, cfg)
        with_texts.setdefault(elem_id, []).append((obj_id, text))

    proposals = score_remote_edges(with_texts, elements_by_id, llm)
    remote_edges = select_remote_edges(proposals, cfg.remote_select)
    edges = sorted(local_edges + remote_edges, key=lambda e: (e.element_id, e.object_id))
    return ReasoningResult(
        local_edges=tuple(sorted(local_edges, key=lambda e: (e.element_id, e.object_id))),
        remote_proposals=tuple(proposals),
        edges=tuple(edges),
    )
