/** Annotation draft: an editable working copy of the ground-truth graph.
 *
 * Every operation returns a fresh draft with validation recomputed; the
 * operations themselves maintain referential integrity (removing a node
 * drops its triplets), so drafts built through this module never fail
 * server validation. */

import { validateGraph } from "./schema.js";
import type { Bbox3, GroundTruthGraph, GTNode, NodeKind } from "./types.js";
import { cloneGraph, deepEqual } from "./types.js";

export interface AnnotationDraft {
  graph: GroundTruthGraph;
  dirty: boolean;
  validation: string[];
}

export interface EditResult {
  draft: AnnotationDraft;
  /** set when the edit was refused; the draft is then unchanged */
  error?: string;
}

function make(graph: GroundTruthGraph, dirty: boolean): AnnotationDraft {
  return { graph, dirty, validation: validateGraph(graph) };
}

export function emptyDraft(): AnnotationDraft {
  return make({ nodes: [], triplets: [] }, false);
}

export function fromServer(doc: GroundTruthGraph): AnnotationDraft {
  return make(cloneGraph(doc), false);
}

export function canSave(draft: AnnotationDraft): boolean {
  return draft.validation.length === 0;
}

export function markSaved(draft: AnnotationDraft): AnnotationDraft {
  return { ...draft, dirty: false };
}

export function nodeById(draft: AnnotationDraft, id: string): GTNode | undefined {
  return draft.graph.nodes.find((n) => n.id === id);
}

function freshId(draft: AnnotationDraft, kind: NodeKind): string {
  const prefix = kind === "object" ? "ann-obj" : "ann-elem";
  let n = 0;
  while (draft.graph.nodes.some((node) => node.id === `${prefix}-${n}`)) n++;
  return `${prefix}-${n}`;
}

/** Add a node with a caller-provided or generated id. */
export function addNode(
  draft: AnnotationDraft,
  kind: NodeKind,
  label: string,
  bbox: Bbox3,
  id?: string,
): EditResult {
  const nodeId = id ?? freshId(draft, kind);
  if (nodeById(draft, nodeId)) {
    return { draft, error: `node id '${nodeId}' already exists` };
  }
  if (!label.trim()) {
    return { draft, error: "label must not be empty" };
  }
  const graph = cloneGraph(draft.graph);
  graph.nodes.push({ id: nodeId, kind, label: label.trim(), bbox });
  return { draft: make(graph, true) };
}

/** Remove a node and every triplet referencing it. */
export function removeNode(draft: AnnotationDraft, id: string): EditResult {
  if (!nodeById(draft, id)) {
    return { draft, error: `no node with id '${id}'` };
  }
  const graph = cloneGraph(draft.graph);
  graph.nodes = graph.nodes.filter((n) => n.id !== id);
  graph.triplets = graph.triplets.filter(
    (t) => t.object_id !== id && t.element_id !== id,
  );
  return { draft: make(graph, true) };
}

export function relabelNode(draft: AnnotationDraft, id: string, label: string): EditResult {
  const node = nodeById(draft, id);
  if (!node) return { draft, error: `no node with id '${id}'` };
  if (!label.trim()) return { draft, error: "label must not be empty" };
  const graph = cloneGraph(draft.graph);
  const target = graph.nodes.find((n) => n.id === id)!;
  target.label = label.trim();
  return { draft: make(graph, true) };
}

/** Connect an element to the object it operates.
 *
 * The element must be picked first; a repeated (element, object) pair
 * replaces the relation text instead of duplicating the triplet. */
export function annotateEdge(
  draft: AnnotationDraft,
  elementId: string,
  objectId: string,
  relationText: string,
): EditResult {
  const element = nodeById(draft, elementId);
  const object = nodeById(draft, objectId);
  if (!element) return { draft, error: `no node with id '${elementId}'` };
  if (!object) return { draft, error: `no node with id '${objectId}'` };
  if (element.kind !== "element" || object.kind !== "object") {
    return {
      draft,
      error:
        "connections go from an interactive element to the object it operates " +
        `(got ${element.kind} -> ${object.kind})`,
    };
  }
  if (!relationText.trim()) {
    return { draft, error: "relation text must not be empty" };
  }
  const graph = cloneGraph(draft.graph);
  const existing = graph.triplets.find(
    (t) => t.element_id === elementId && t.object_id === objectId,
  );
  if (existing) {
    existing.relation_text = relationText.trim();
  } else {
    graph.triplets.push({
      object_id: objectId,
      element_id: elementId,
      relation_text: relationText.trim(),
    });
  }
  return { draft: make(graph, true) };
}

export function removeEdge(draft: AnnotationDraft, elementId: string, objectId: string): EditResult {
  const graph = cloneGraph(draft.graph);
  const before = graph.triplets.length;
  graph.triplets = graph.triplets.filter(
    (t) => !(t.element_id === elementId && t.object_id === objectId),
  );
  if (graph.triplets.length === before) {
    return { draft, error: "no such connection" };
  }
  return { draft: make(graph, true) };
}

/** True when the draft equals the given server copy (deep equality). */
export function matchesServer(draft: AnnotationDraft, serverDoc: GroundTruthGraph): boolean {
  return deepEqual(draft.graph, serverDoc);
}
