/** Client-side ground-truth validation mirroring the server's rules.
 *
 * The save button stays disabled while any message is present, so every
 * document the UI submits is one the server accepts. */

import type { GroundTruthGraph } from "./types.js";

const KINDS = new Set(["object", "element"]);

function validBbox(bbox: unknown): boolean {
  if (!Array.isArray(bbox) || bbox.length !== 2) return false;
  const [lo, hi] = bbox as [unknown, unknown];
  if (!Array.isArray(lo) || !Array.isArray(hi)) return false;
  if (lo.length !== 3 || hi.length !== 3) return false;
  for (let axis = 0; axis < 3; axis++) {
    const a = lo[axis];
    const b = hi[axis];
    if (typeof a !== "number" || typeof b !== "number") return false;
    if (!Number.isFinite(a) || !Number.isFinite(b)) return false;
    if (a > b) return false;
  }
  return true;
}

/** Every problem in the document, as human-readable messages. */
export function validateGraph(graph: GroundTruthGraph): string[] {
  const messages: string[] = [];
  const byId = new Map<string, { kind: string }>();
  for (const node of graph.nodes) {
    if (!node.id) messages.push("a node is missing its id");
    if (byId.has(node.id)) messages.push(`duplicate node id '${node.id}'`);
    if (!KINDS.has(node.kind)) messages.push(`node '${node.id}' has bad kind '${node.kind}'`);
    if (!node.label || !node.label.trim()) messages.push(`node '${node.id}' has an empty label`);
    if (!validBbox(node.bbox)) messages.push(`node '${node.id}' has an invalid bbox`);
    byId.set(node.id, { kind: node.kind });
  }
  graph.triplets.forEach((t, i) => {
    const obj = byId.get(t.object_id);
    const elem = byId.get(t.element_id);
    if (!obj) messages.push(`triplet ${i} references missing object '${t.object_id}'`);
    else if (obj.kind !== "object") {
      messages.push(`triplet ${i} target '${t.object_id}' is not an object`);
    }
    if (!elem) messages.push(`triplet ${i} references missing element '${t.element_id}'`);
    else if (elem.kind !== "element") {
      messages.push(`triplet ${i} source '${t.element_id}' is not an element`);
    }
    if (!t.relation_text || !t.relation_text.trim()) {
      messages.push(`triplet ${i} has empty relation text`);
    }
  });
  return messages;
}
