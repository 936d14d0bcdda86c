/** Wire types mirroring the pipeline server's JSON schemas. */

export type NodeKind = "object" | "element";
export type EdgeKind = "local" | "remote";

/** [lo, hi] corners, each [x, y, z] in meters. */
export type Bbox3 = [number[], number[]];

export interface GTNode {
  id: string;
  kind: NodeKind;
  label: string;
  bbox: Bbox3;
}

export interface GTTriplet {
  object_id: string;
  element_id: string;
  relation_text: string;
}

export interface GroundTruthGraph {
  nodes: GTNode[];
  triplets: GTTriplet[];
}

export interface PredictionNode {
  id: string;
  kind: NodeKind;
  label: string;
  description: string;
  position: number[];
  bbox: Bbox3;
  num_views: number;
}

export interface PredictionEdge {
  source: string;
  target: string;
  kind: EdgeKind;
  relation: string;
  confidence: number;
  evidence: string[];
}

export interface PredictionGraph {
  scene_id: string;
  nodes: PredictionNode[];
  edges: PredictionEdge[];
  provenance: Record<string, unknown>;
}

export interface CandidateView {
  frame_index: number;
  box2d: number[];
  score: number;
  contributed_points: number;
}

export interface Candidate {
  id: string;
  kind: NodeKind;
  label_votes: [string, number][];
  bbox3d: Bbox3;
  views: CandidateView[];
  num_points: number;
}

export interface CandidatesDoc {
  scene_id: string;
  candidates: Candidate[];
}

/** Structural equality: array order matters, object key order does not. */
export function deepEqual(a: unknown, b: unknown): boolean {
  if (Object.is(a, b)) return true;
  if (Array.isArray(a) || Array.isArray(b)) {
    if (!Array.isArray(a) || !Array.isArray(b) || a.length !== b.length) return false;
    return a.every((value, i) => deepEqual(value, b[i]));
  }
  if (typeof a === "object" && typeof b === "object" && a !== null && b !== null) {
    const keysA = Object.keys(a as Record<string, unknown>);
    const keysB = Object.keys(b as Record<string, unknown>);
    if (keysA.length !== keysB.length) return false;
    return keysA.every((key) =>
      deepEqual((a as Record<string, unknown>)[key], (b as Record<string, unknown>)[key]),
    );
  }
  return false;
}

export function cloneGraph(graph: GroundTruthGraph): GroundTruthGraph {
  return JSON.parse(JSON.stringify(graph)) as GroundTruthGraph;
}
