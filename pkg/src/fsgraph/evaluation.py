"""Open-vocabulary Recall@K scoring of predicted graphs against ground truth.

A ground-truth node counts as retrieved when some predicted node of the
same kind overlaps it (3D IoU > 0) and the predicted label, embedded and
compared against the ground-truth label vocabulary, ranks the true label
inside the top K. Triplets additionally require the predicted relation
text to retrieve the annotated relation in the relation-embedding space;
the node-association / edge-prediction decomposition falls out of the
same counts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .boxes import Box3D
from .embeddings import EmbeddingBackend, cosine
from .errors import EmptyGroundTruth, SchemaViolation
from .graph import FunctionalSceneGraph, GraphNode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GTNode:
    id: str
    kind: str
    label: str
    bbox3d: Box3D

    def __post_init__(self):
        if self.kind not in ("object", "element"):
            raise ValueError(f"bad kind {self.kind!r}")
        if not self.label:
            raise ValueError("label must be nonempty")


@dataclass(frozen=True)
class GTTriplet:
    object_id: str
    element_id: str
    relation_text: str


@dataclass(frozen=True)
class GroundTruthGraph:
    nodes: tuple[GTNode, ...]
    triplets: tuple[GTTriplet, ...]

    def __post_init__(self):
        by_id = {n.id: n for n in self.nodes}
        if len(by_id) != len(self.nodes):
            raise ValueError("duplicate ground-truth node ids")
        for t in self.triplets:
            obj = by_id.get(t.object_id)
            elem = by_id.get(t.element_id)
            if obj is None or obj.kind != "object":
                raise ValueError(f"triplet object {t.object_id!r} missing or wrong kind")
            if elem is None or elem.kind != "element":
                raise ValueError(f"triplet element {t.element_id!r} missing or wrong kind")
            if not t.relation_text:
                raise ValueError("relation_text must be nonempty")

    def node_by_id(self, node_id: str) -> GTNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def labels(self) -> list[str]:
        return sorted({n.label for n in self.nodes})

    def relation_texts(self) -> list[str]:
        return sorted({t.relation_text for t in self.triplets})


def gt_from_dict(doc: dict) -> GroundTruthGraph:
    try:
        nodes = tuple(
            GTNode(
                id=str(n["id"]), kind=n["kind"], label=n["label"],
                bbox3d=Box3D.from_list(n["bbox"]),
            )
            for n in doc["nodes"]
        )
        triplets = tuple(
            GTTriplet(
                object_id=str(t["object_id"]),
                element_id=str(t["element_id"]),
                relation_text=t["relation_text"],
            )
            for t in doc.get("triplets", [])
        )
        return GroundTruthGraph(nodes=nodes, triplets=triplets)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"invalid ground-truth document: {exc}") from exc


def gt_to_dict(gt: GroundTruthGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind, "label": n.label, "bbox": n.bbox3d.to_list()}
            for n in gt.nodes
        ],
        "triplets": [
            {"object_id": t.object_id, "element_id": t.element_id,
             "relation_text": t.relation_text}
            for t in gt.triplets
        ],
    }


def bbox_iou(a: Box3D, b: Box3D) -> float:
    """Volume IoU of two axis-aligned boxes; any zero-volume case yields 0."""
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    inter = float(np.prod(np.maximum(hi - lo, 0.0)))
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def embed(text: str, backend: EmbeddingBackend) -> np.ndarray:
    """Deterministic unit-norm embedding of nonempty text."""
    return backend.embed(text)


class _Retriever:
    """Ranks a vocabulary against a query label by embedding cosine,
    similarity ties broken by lexicographic label order."""

    def __init__(self, vocabulary: list[str], backend: EmbeddingBackend):
        self.vocabulary = sorted(set(vocabulary))
        self.backend = backend
        self._vecs = {term: backend.embed(term) for term in self.vocabulary}
        self._query_cache: dict[str, list[str]] = {}

    def ranked(self, query: str) -> list[str]:
        if query not in self._query_cache:
            qv = self.backend.embed(query)
            scored = sorted(
                ((-cosine(qv, self._vecs[term]), term) for term in self.vocabulary),
            )
            self._query_cache[query] = [term for _, term in scored]
        return self._query_cache[query]

    def rank_of(self, query: str, target: str) -> int:
        ranked = self.ranked(query)
        try:
            return ranked.index(target)
        except ValueError:
            return len(ranked)


def _overlapping_preds(gt_node: GTNode, preds: list[GraphNode],
                       one_to_one_match: dict[str, str] | None) -> list[tuple[GraphNode, float]]:
    if one_to_one_match is not None:
        pred_id = one_to_one_match.get(gt_node.id)
        if pred_id is None:
            return []
        preds = [p for p in preds if p.id == pred_id]
    out = []
    for p in preds:
        if p.kind != gt_node.kind:
            continue
        iou = bbox_iou(gt_node.bbox3d, p.bbox3d)
        if iou > 0.0:
            out.append((p, iou))
    return out


def _hungarian_match(gt_nodes, pred_nodes) -> dict[str, str]:
    """Optional one-to-one assignment maximizing total IoU, per kind."""
    match: dict[str, str] = {}
    for kind in ("object", "element"):
        gts = [g for g in gt_nodes if g.kind == kind]
        preds = [p for p in pred_nodes if p.kind == kind]
        if not gts or not preds:
            continue
        iou = np.zeros((len(gts), len(preds)))
        for i, g in enumerate(gts):
            for j, p in enumerate(preds):
                iou[i, j] = bbox_iou(g.bbox3d, p.bbox3d)
        rows, cols = linear_sum_assignment(-iou)
        for i, j in zip(rows, cols):
            if iou[i, j] > 0.0:
                match[gts[i].id] = preds[j].id
    return match


@dataclass
class NodeRecallResult:
    r_o: float
    r_ie: float
    r_no: float
    retrieved_objects: int
    retrieved_elements: int
    records: list[dict] = field(default_factory=list)


def node_recall(pred: FunctionalSceneGraph, gt: GroundTruthGraph, k: int,
                labels: list[str], emb: EmbeddingBackend,
                one_to_one: bool = False) -> NodeRecallResult:
    """Node Recall@K for objects, elements, and overall.

    The reading is existential: any overlapping prediction whose label
    retrieves the ground-truth label within the top K marks the node
    retrieved (one-to-one matching available behind the flag).
    """
    if not gt.nodes:
        raise EmptyGroundTruth("ground truth has no nodes")
    retriever = _Retriever(labels, emb)
    pred_nodes = list(pred.objects + pred.elements)
    match = _hungarian_match(gt.nodes, pred_nodes) if one_to_one else None

    retrieved = {"object": 0, "element": 0}
    records = []
    for gt_node in gt.nodes:
        best_rank: int | None = None
        best_pred: str | None = None
        best_iou = 0.0
        for p, iou in _overlapping_preds(gt_node, pred_nodes, match):
            rank = retriever.rank_of(p.label, gt_node.label)
            if best_rank is None or rank < best_rank:
                best_rank, best_pred, best_iou = rank, p.id, iou
        hit = best_rank is not None and best_rank < k
        if hit:
            retrieved[gt_node.kind] += 1
        records.append({
            "gt_id": gt_node.id,
            "kind": gt_node.kind,
            "retrieved": hit,
            "matched_pred": best_pred,
            "iou": best_iou,
            "retrieval_rank": best_rank,
        })

    n_o = sum(1 for n in gt.nodes if n.kind == "object")
    n_ie = len(gt.nodes) - n_o
    return NodeRecallResult(
        r_o=retrieved["object"] / n_o if n_o else 0.0,
        r_ie=retrieved["element"] / n_ie if n_ie else 0.0,
        r_no=(retrieved["object"] + retrieved["element"]) / len(gt.nodes),
        retrieved_objects=retrieved["object"],
        retrieved_elements=retrieved["element"],
        records=records,
    )


@dataclass
class TripletRecallResult:
    r_tr: float
    r_na: float
    r_ep: float
    n_na: int
    n_re: int
    ep_undefined: bool
    records: list[dict] = field(default_factory=list)


def triplet_recall(pred: FunctionalSceneGraph, gt: GroundTruthGraph, k: int,
                   emb_labels: EmbeddingBackend, emb_relations: EmbeddingBackend,
                   label_vocab: list[str] | None = None,
                   relation_vocab: list[str] | None = None) -> TripletRecallResult:
    """Triplet Recall@K with node-association / edge-prediction decomposition.

    A triplet is node-associated when some predicted edge's endpoints both
    overlap and retrieve the corresponding ground-truth nodes; it is fully
    retrieved when the edge's relation text also retrieves the annotated
    relation. R_ep conditions on node association (0/0 reported as 0 with
    the `ep_undefined` flag).
    """
    if not gt.nodes:
        raise EmptyGroundTruth("ground truth has no nodes")
    label_retriever = _Retriever(label_vocab if label_vocab is not None else gt.labels(),
                                 emb_labels)
    relation_texts = relation_vocab if relation_vocab is not None else gt.relation_texts()
    relation_retriever = _Retriever(relation_texts, emb_relations) if relation_texts else None

    pred_nodes = {n.id: n for n in pred.objects + pred.elements}
    n_tr = len(gt.triplets)
    n_na = 0
    n_re = 0
    records = []
    for triplet in gt.triplets:
        gt_obj = gt.node_by_id(triplet.object_id)
        gt_elem = gt.node_by_id(triplet.element_id)
        associated = False
        fully = False
        matched_edge = None
        for edge in pred.edges:
            pred_elem = pred_nodes[edge.element_id]
            pred_obj = pred_nodes[edge.object_id]
            if bbox_iou(pred_elem.bbox3d, gt_elem.bbox3d) <= 0.0:
                continue
            if bbox_iou(pred_obj.bbox3d, gt_obj.bbox3d) <= 0.0:
                continue
            if label_retriever.rank_of(pred_elem.label, gt_elem.label) >= k:
                continue
            if label_retriever.rank_of(pred_obj.label, gt_obj.label) >= k:
                continue
            associated = True
            if relation_retriever is not None and relation_retriever.rank_of(
                    edge.relation, triplet.relation_text) < k:
                fully = True
                matched_edge = (edge.element_id, edge.object_id)
                break
            if matched_edge is None:
                matched_edge = (edge.element_id, edge.object_id)
        n_na += associated
        n_re += fully
        records.append({
            "object_id": triplet.object_id,
            "element_id": triplet.element_id,
            "relation_text": triplet.relation_text,
            "node_associated": associated,
            "retrieved": fully,
            "matched_edge": list(matched_edge) if matched_edge else None,
        })

    ep_undefined = n_na == 0
    return TripletRecallResult(
        r_tr=n_re / n_tr if n_tr else 0.0,
        r_na=n_na / n_tr if n_tr else 0.0,
        r_ep=n_re / n_na if n_na else 0.0,
        n_na=n_na,
        n_re=n_re,
        ep_undefined=ep_undefined,
        records=records,
    )


@dataclass
class EvalReport:
    """All six recall figures at each requested K plus the raw counts."""

    node_ks: tuple[int, ...]
    triplet_ks: tuple[int, ...]
    counts: dict
    recalls: dict  # metric name -> {K: value}
    flags: dict
    node_records: dict = field(default_factory=dict)
    triplet_records: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "node_ks": list(self.node_ks),
            "triplet_ks": list(self.triplet_ks),
            "counts": self.counts,
            "recalls": {
                name: {str(k): v for k, v in per_k.items()}
                for name, per_k in self.recalls.items()
            },
            "flags": {
                name: {str(k): v for k, v in per_k.items()}
                for name, per_k in self.flags.items()
            },
            "node_records": {str(k): v for k, v in self.node_records.items()},
            "triplet_records": {str(k): v for k, v in self.triplet_records.items()},
        }

    def table(self) -> str:
        lines = []
        header = "metric " + " ".join(f"@{k:<6}" for k in self.node_ks)
        lines.append(header)
        for name in ("R_o", "R_ie", "R_no"):
            row = f"{name:<6} " + " ".join(
                f"{self.recalls[name][k]:.4f} " for k in self.node_ks)
            lines.append(row)
        header = "metric " + " ".join(f"@{k:<6}" for k in self.triplet_ks)
        lines.append(header)
        for name in ("R_na", "R_ep", "R_tr"):
            row = f"{name:<6} " + " ".join(
                f"{self.recalls[name][k]:.4f} " for k in self.triplet_ks)
            lines.append(row)
        return "\n".join(lines)


def evaluate(pred: FunctionalSceneGraph, gt: GroundTruthGraph,
             emb_labels: EmbeddingBackend, emb_relations: EmbeddingBackend,
             node_ks: tuple[int, ...] = (3, 10), triplet_ks: tuple[int, ...] = (5, 10),
             label_vocab: list[str] | None = None,
             relation_vocab: list[str] | None = None,
             one_to_one: bool = False) -> EvalReport:
    """Score one scene at the requested operating points."""
    labels = label_vocab if label_vocab is not None else gt.labels()
    n_o = sum(1 for n in gt.nodes if n.kind == "object")
    n_ie = len(gt.nodes) - n_o
    counts: dict = {
        "n_o": n_o, "n_ie": n_ie, "n_no": len(gt.nodes), "n_tr": len(gt.triplets),
        "n_re_o": {}, "n_re_ie": {}, "n_na": {}, "n_re": {},
    }
    recalls: dict = {name: {} for name in ("R_o", "R_ie", "R_no", "R_tr", "R_na", "R_ep")}
    flags: dict = {"ep_undefined": {}}
    node_records: dict = {}
    triplet_records: dict = {}

    for k in node_ks:
        res = node_recall(pred, gt, k, labels, emb_labels, one_to_one=one_to_one)
        recalls["R_o"][k] = res.r_o
        recalls["R_ie"][k] = res.r_ie
        recalls["R_no"][k] = res.r_no
        counts["n_re_o"][k] = res.retrieved_objects
        counts["n_re_ie"][k] = res.retrieved_elements
        node_records[k] = res.records

    for k in triplet_ks:
        res = triplet_recall(pred, gt, k, emb_labels, emb_relations,
                             label_vocab=labels, relation_vocab=relation_vocab)
        recalls["R_tr"][k] = res.r_tr
        recalls["R_na"][k] = res.r_na
        recalls["R_ep"][k] = res.r_ep
        counts["n_na"][k] = res.n_na
        counts["n_re"][k] = res.n_re
        flags["ep_undefined"][k] = res.ep_undefined
        triplet_records[k] = res.records

    return EvalReport(
        node_ks=tuple(node_ks),
        triplet_ks=tuple(triplet_ks),
        counts=counts,
        recalls=recalls,
        flags=flags,
        node_records=node_records,
        triplet_records=triplet_records,
    )


def merge_counts(reports: list[EvalReport]) -> EvalReport:
    """Associative merge over per-scene reports: sum the counts, recompute recalls."""
    if not reports:
        raise ValueError("nothing to merge")
    node_ks = reports[0].node_ks
    triplet_ks = reports[0].triplet_ks
    counts: dict = {
        "n_o": 0, "n_ie": 0, "n_no": 0, "n_tr": 0,
        "n_re_o": {k: 0 for k in node_ks}, "n_re_ie": {k: 0 for k in node_ks},
        "n_na": {k: 0 for k in triplet_ks}, "n_re": {k: 0 for k in triplet_ks},
    }
    for rep in reports:
        if rep.node_ks != node_ks or rep.triplet_ks != triplet_ks:
            raise ValueError("reports must share K values to merge")
        for key in ("n_o", "n_ie", "n_no", "n_tr"):
            counts[key] += rep.counts[key]
        for k in node_ks:
            counts["n_re_o"][k] += rep.counts["n_re_o"][k]
            counts["n_re_ie"][k] += rep.counts["n_re_ie"][k]
        for k in triplet_ks:
            counts["n_na"][k] += rep.counts["n_na"][k]
            counts["n_re"][k] += rep.counts["n_re"][k]
    recalls: dict = {name: {} for name in ("R_o", "R_ie", "R_no", "R_tr", "R_na", "R_ep")}
    flags: dict = {"ep_undefined": {}}
    for k in node_ks:
        recalls["R_o"][k] = counts["n_re_o"][k] / counts["n_o"] if counts["n_o"] else 0.0
        recalls["R_ie"][k] = counts["n_re_ie"][k] / counts["n_ie"] if counts["n_ie"] else 0.0
        total = counts["n_re_o"][k] + counts["n_re_ie"][k]
        recalls["R_no"][k] = total / counts["n_no"] if counts["n_no"] else 0.0
    for k in triplet_ks:
        recalls["R_na"][k] = counts["n_na"][k] / counts["n_tr"] if counts["n_tr"] else 0.0
        recalls["R_tr"][k] = counts["n_re"][k] / counts["n_tr"] if counts["n_tr"] else 0.0
        recalls["R_ep"][k] = counts["n_re"][k] / counts["n_na"][k] if counts["n_na"][k] else 0.0
        flags["ep_undefined"][k] = counts["n_na"][k] == 0
    return EvalReport(
        node_ks=node_ks, triplet_ks=triplet_ks,
        counts=counts, recalls=recalls, flags=flags,
    )
