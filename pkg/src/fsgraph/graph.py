"""The functional scene graph: assembly, canonical JSON, inventory QA.

The graph is bipartite and directed: every edge points from an interactive
element node to the object node it operates. Nodes are lightweight
projections of fused candidates (label, description, box, view count);
point clouds stay in the fusion checkpoints.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .backend import ModelClient, ModelRequest
from .boxes import Box3D
from .errors import DanglingEdge, SchemaViolation
from .fusion import NodeCandidate
from .jsonutil import canonical_dumps
from .prompting import render
from .reasoning import FunctionalEdge

logger = logging.getLogger(__name__)

NODE_KINDS = ("object", "element")


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: str
    label: str
    description: str
    bbox3d: Box3D
    num_views: int

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"bad node kind {self.kind!r}")

    @staticmethod
    def from_candidate(candidate: NodeCandidate) -> "GraphNode":
        if candidate.description is not None:
            description = candidate.description.summary
        else:
            description = candidate.top_label()
        return GraphNode(
            id=candidate.id,
            kind=candidate.kind,
            label=candidate.top_label(),
            description=description,
            bbox3d=candidate.bbox3d,
            num_views=len(candidate.views),
        )


@dataclass(frozen=True)
class FunctionalSceneGraph:
    scene_id: str
    objects: tuple[GraphNode, ...]
    elements: tuple[GraphNode, ...]
    edges: tuple[FunctionalEdge, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [n.id for n in self.objects + self.elements]
        if len(ids) != len(set(ids)):
            raise ValueError("node ids must be unique")
        object_ids = {n.id for n in self.objects}
        element_ids = {n.id for n in self.elements}
        for edge in self.edges:
            if edge.element_id not in element_ids:
                raise DanglingEdge(f"edge source {edge.element_id!r} is not an element node")
            if edge.object_id not in object_ids:
                raise DanglingEdge(f"edge target {edge.object_id!r} is not an object node")

    def node_by_id(self, node_id: str) -> GraphNode:
        for n in self.objects + self.elements:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


def assemble(candidates: list[NodeCandidate], local_edges, remote_edges,
             scene_id: str, provenance: dict | None = None) -> FunctionalSceneGraph:
    """Union of both reasoning subgraphs plus every described candidate.

    Isolated candidates are retained; a pair appearing both as local and
    remote keeps only the local edge.
    """
    objects = tuple(sorted(
        (GraphNode.from_candidate(c) for c in candidates if c.kind == "object"),
        key=lambda n: n.id))
    elements = tuple(sorted(
        (GraphNode.from_candidate(c) for c in candidates if c.kind == "element"),
        key=lambda n: n.id))
    merged: dict[tuple[str, str], FunctionalEdge] = {}
    for edge in list(remote_edges) + list(local_edges):
        # locals written last so they win on duplicate endpoints
        key = (edge.element_id, edge.object_id)
        if key in merged and merged[key].kind == "local" and edge.kind == "remote":
            continue
        merged[key] = edge
    edges = tuple(sorted(merged.values(), key=lambda e: (e.element_id, e.object_id)))
    return FunctionalSceneGraph(
        scene_id=scene_id,
        objects=objects,
        elements=elements,
        edges=edges,
        provenance=dict(provenance or {}),
    )


def to_dict(graph: FunctionalSceneGraph) -> dict:
    nodes = []
    for node in sorted(graph.objects + graph.elements, key=lambda n: n.id):
        nodes.append({
            "id": node.id,
            "kind": node.kind,
            "label": node.label,
            "description": node.description,
            "position": node.bbox3d.centroid.tolist(),
            "bbox": node.bbox3d.to_list(),
            "num_views": node.num_views,
        })
    edges = []
    for edge in sorted(graph.edges, key=lambda e: (e.element_id, e.object_id)):
        edges.append({
            "source": edge.element_id,
            "target": edge.object_id,
            "kind": edge.kind,
            "relation": edge.relation,
            "confidence": edge.confidence,
            "evidence": list(edge.evidence),
        })
    return {
        "scene_id": graph.scene_id,
        "nodes": nodes,
        "edges": edges,
        "provenance": graph.provenance,
    }


def to_json(graph: FunctionalSceneGraph) -> str:
    """Canonical text form: sorted keys, 9-significant-digit floats."""
    return canonical_dumps(to_dict(graph)) + "\n"


def from_dict(doc: dict) -> FunctionalSceneGraph:
    try:
        scene_id = doc["scene_id"]
        objects = []
        elements = []
        for node in doc["nodes"]:
            parsed = GraphNode(
                id=str(node["id"]),
                kind=node["kind"],
                label=node["label"],
                description=node["description"],
                bbox3d=Box3D.from_list(node["bbox"]),
                num_views=int(node["num_views"]),
            )
            (objects if parsed.kind == "object" else elements).append(parsed)
        edges = [
            FunctionalEdge(
                element_id=str(e["source"]),
                object_id=str(e["target"]),
                kind=e["kind"],
                relation=e["relation"],
                confidence=float(e["confidence"]),
                evidence=tuple(e.get("evidence", [])),
            )
            for e in doc["edges"]
        ]
        return FunctionalSceneGraph(
            scene_id=scene_id,
            objects=tuple(sorted(objects, key=lambda n: n.id)),
            elements=tuple(sorted(elements, key=lambda n: n.id)),
            edges=tuple(sorted(edges, key=lambda e: (e.element_id, e.object_id))),
            provenance=dict(doc.get("provenance", {})),
        )
    except (KeyError, TypeError, ValueError, DanglingEdge) as exc:
        raise SchemaViolation(f"invalid graph document: {exc}") from exc


def from_json(text: str) -> FunctionalSceneGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    return from_dict(doc)


@dataclass(frozen=True)
class QAResult:
    answer: str
    prompt: str  # exact prompt sent, kept for audit


def qa_query(graph: FunctionalSceneGraph, question: str, llm: ModelClient) -> QAResult:
    """Answer an inventory question grounded in the graph's JSON form."""
    prompt = render("qa", graph_json=to_json(graph).strip(), question=question)
    response = llm.complete(ModelRequest(messages=(("user", prompt),), model_hint="llm"))
    return QAResult(answer=response.text, prompt=prompt)
