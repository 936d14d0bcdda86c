/** Viewer state and invariant-preserving transitions.
 *
 * Invariants: the selection always references an entity in a visible
 * layer; connect mode requires an element selected as source before an
 * object may be chosen as target. */

import type { NodeKind } from "./types.js";

export type EditMode = "select" | "label" | "connect";
export type LayerName = "pointcloud" | "candidates" | "prediction" | "annotation";

export interface Selection {
  type: "node" | "edge";
  id: string;
  layer: LayerName;
}

export interface ViewerState {
  sceneId: string | null;
  layers: Record<LayerName, boolean>;
  selection: Selection | null;
  mode: EditMode;
  /** element picked first while connecting */
  connectSource: string | null;
}

export function initialState(): ViewerState {
  return {
    sceneId: null,
    layers: { pointcloud: true, candidates: true, prediction: false, annotation: true },
    selection: null,
    mode: "select",
    connectSource: null,
  };
}

export function loadScene(state: ViewerState, sceneId: string): ViewerState {
  return { ...initialState(), layers: { ...state.layers }, sceneId };
}

export function setMode(state: ViewerState, mode: EditMode): ViewerState {
  return { ...state, mode, connectSource: null };
}

export function toggleLayer(state: ViewerState, layer: LayerName): ViewerState {
  const layers = { ...state.layers, [layer]: !state.layers[layer] };
  let selection = state.selection;
  if (selection && !layers[selection.layer]) {
    selection = null; // selection may not reference a hidden layer
  }
  return { ...state, layers, selection };
}

export function select(state: ViewerState, selection: Selection | null): ViewerState {
  if (selection && !state.layers[selection.layer]) {
    return state; // refuse selections in hidden layers
  }
  return { ...state, selection };
}

export interface ConnectPick {
  state: ViewerState;
  /** set when both endpoints are picked: ready for relation text */
  pair?: { elementId: string; objectId: string };
  error?: string;
}

/** Handle a node pick while in connect mode. */
export function pickForConnect(
  state: ViewerState,
  nodeId: string,
  kind: NodeKind,
): ConnectPick {
  if (state.mode !== "connect") {
    return { state, error: "not in connect mode" };
  }
  if (state.connectSource === null) {
    if (kind !== "element") {
      return {
        state,
        error: "pick the interactive element first, then the object it operates",
      };
    }
    return { state: { ...state, connectSource: nodeId } };
  }
  if (kind !== "object") {
    return {
      state: { ...state, connectSource: null },
      error: "the second pick must be an object",
    };
  }
  const pair = { elementId: state.connectSource, objectId: nodeId };
  return { state: { ...state, connectSource: null }, pair };
}
