/** Prediction-vs-annotation comparison for the inspection view.
 *
 * Predicted and annotated nodes live in different id spaces, so edges are
 * matched spatially: a predicted edge corresponds to an annotated triplet
 * when both endpoint boxes overlap (IoU > 0) with matching kinds. When
 * evaluation match records are supplied they take precedence. */

import { bboxIou } from "./geometry.js";
import type {
  GroundTruthGraph,
  GTTriplet,
  PredictionEdge,
  PredictionGraph,
} from "./types.js";

export type EdgeDiffStatus = "matched" | "prediction-only" | "annotation-only";

export interface EdgeDiffEntry {
  status: EdgeDiffStatus;
  prediction?: PredictionEdge;
  annotation?: GTTriplet;
  /** detail panel content for a clicked edge */
  detail: {
    relation: string;
    confidence: number | null;
    evidence: string[];
  };
}

export interface GraphDiff {
  entries: EdgeDiffEntry[];
  counts: { matched: number; predictionOnly: number; annotationOnly: number };
}

/** Optional per-triplet eval records: matched_edge is [element_id, object_id]. */
export interface EvalTripletRecord {
  object_id: string;
  element_id: string;
  retrieved: boolean;
  matched_edge: [string, string] | null;
}

function spatiallyMatches(
  pred: PredictionGraph,
  edge: PredictionEdge,
  gt: GroundTruthGraph,
  triplet: GTTriplet,
): boolean {
  const predElem = pred.nodes.find((n) => n.id === edge.source);
  const predObj = pred.nodes.find((n) => n.id === edge.target);
  const gtElem = gt.nodes.find((n) => n.id === triplet.element_id);
  const gtObj = gt.nodes.find((n) => n.id === triplet.object_id);
  if (!predElem || !predObj || !gtElem || !gtObj) return false;
  return (
    predElem.kind === gtElem.kind &&
    predObj.kind === gtObj.kind &&
    bboxIou(predElem.bbox, gtElem.bbox) > 0 &&
    bboxIou(predObj.bbox, gtObj.bbox) > 0
  );
}

export function compareGraphs(
  prediction: PredictionGraph,
  annotation: GroundTruthGraph,
  evalRecords?: EvalTripletRecord[],
): GraphDiff {
  const entries: EdgeDiffEntry[] = [];
  const matchedTriplets = new Set<GTTriplet>();

  for (const edge of prediction.edges) {
    let match: GTTriplet | undefined;
    if (evalRecords) {
      const record = evalRecords.find(
        (r) =>
          r.matched_edge !== null &&
          r.matched_edge[0] === edge.source &&
          r.matched_edge[1] === edge.target &&
          r.retrieved,
      );
      if (record) {
        match = annotation.triplets.find(
          (t) => t.object_id === record.object_id && t.element_id === record.element_id,
        );
      }
    } else {
      match = annotation.triplets.find(
        (t) => !matchedTriplets.has(t) && spatiallyMatches(prediction, edge, annotation, t),
      );
    }
    if (match) {
      matchedTriplets.add(match);
      entries.push({
        status: "matched",
        prediction: edge,
        annotation: match,
        detail: { relation: edge.relation, confidence: edge.confidence,
                  evidence: edge.evidence },
      });
    } else {
      entries.push({
        status: "prediction-only",
        prediction: edge,
        detail: { relation: edge.relation, confidence: edge.confidence,
                  evidence: edge.evidence },
      });
    }
  }

  for (const triplet of annotation.triplets) {
    if (!matchedTriplets.has(triplet)) {
      entries.push({
        status: "annotation-only",
        annotation: triplet,
        detail: { relation: triplet.relation_text, confidence: null, evidence: [] },
      });
    }
  }

  const counts = {
    matched: entries.filter((e) => e.status === "matched").length,
    predictionOnly: entries.filter((e) => e.status === "prediction-only").length,
    annotationOnly: entries.filter((e) => e.status === "annotation-only").length,
  };
  return { entries, counts };
}
