/** DOM wiring: panels, mode buttons, annotation workflow, compare view. */

import { ApiClient, ApiError } from "./api.js";
import {
  AnnotationDraft,
  addNode,
  annotateEdge,
  canSave,
  emptyDraft,
  fromServer,
  markSaved,
  matchesServer,
  nodeById,
  relabelNode,
  removeEdge,
  removeNode,
} from "./draft.js";
import { compareGraphs, EdgeDiffEntry } from "./diff.js";
import { parsePly } from "./ply.js";
import {
  EditMode,
  LayerName,
  ViewerState,
  initialState,
  loadScene as loadSceneState,
  pickForConnect,
  select,
  setMode,
  toggleLayer,
} from "./state.js";
import type { Bbox3, CandidatesDoc, NodeKind, PredictionGraph } from "./types.js";
import { BoxEntry, EdgeEntry, Viewer } from "./viewer.js";

const LAYER_COLORS: Record<string, number> = {
  candidates: 0x5a6a7a,
  annotation: 0x3366cc,
  prediction: 0xd9822b,
};

/** Banner text for a failed save; server validation details pass through. */
export function saveErrorMessage(err: unknown): string {
  if (err instanceof ApiError) {
    return `save rejected: ${err.detail}`;
  }
  return `save failed: ${(err as Error).message}`;
}

interface AppData {
  candidates: CandidatesDoc | null;
  prediction: PredictionGraph | null;
  draft: AnnotationDraft;
  pointTotal: number;
  frameIndices: number[];
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class App {
  private api: ApiClient;
  private viewer: Viewer;
  private state: ViewerState = initialState();
  private data: AppData = {
    candidates: null,
    prediction: null,
    draft: emptyDraft(),
    pointTotal: 0,
    frameIndices: [],
  };
  private detail: EdgeDiffEntry | null = null;

  constructor(apiBaseUrl: string) {
    this.api = new ApiClient(apiBaseUrl);
    this.viewer = new Viewer(el("viewer"), (id) => this.onPick(id));
    window.addEventListener("resize", () => this.viewer.resize());
    this.bindControls();
    void this.bootstrap();
  }

  private banner(text: string, tone: "ok" | "error" | "info" = "info"): void {
    const node = el<HTMLDivElement>("banner");
    node.textContent = text;
    node.dataset.tone = tone;
  }

  private async bootstrap(): Promise<void> {
    try {
      const scenes = await this.api.listScenes();
      const picker = el<HTMLSelectElement>("scene-picker");
      picker.innerHTML = "";
      for (const scene of scenes) {
        const option = document.createElement("option");
        option.value = scene;
        option.textContent = scene;
        picker.appendChild(option);
      }
      if (scenes.length) await this.loadScene(scenes[0]!);
    } catch (err) {
      this.banner(`failed to list scenes: ${(err as Error).message} (retry below)`, "error");
      el<HTMLButtonElement>("btn-reload").disabled = false;
    }
  }

  private async loadScene(sceneId: string): Promise<void> {
    this.state = loadSceneState(this.state, sceneId);
    this.banner(`loading ${sceneId}...`);
    try {
      const candidates = await this.api.getCandidates(sceneId);
      let prediction: PredictionGraph | null = null;
      try {
        prediction = await this.api.getPrediction(sceneId);
      } catch {
        prediction = null; // prediction is optional until the pipeline ran
      }
      const annotation = await this.api.getAnnotation(sceneId);
      const clouds: Float32Array[] = [];
      let total = 0;
      for (const cand of candidates.candidates) {
        const cloud = parsePly(await this.api.getPointcloud(sceneId, cand.id));
        if (cloud.positions.length !== cloud.headerCount * 3) {
          throw new Error(`point count mismatch for ${cand.id}`);
        }
        total += cloud.headerCount;
        clouds.push(cloud.positions);
      }
      const merged = new Float32Array(total * 3);
      let offset = 0;
      for (const cloud of clouds) {
        merged.set(cloud, offset);
        offset += cloud.length;
      }
      const frames = new Set<number>();
      for (const cand of candidates.candidates) {
        for (const view of cand.views) frames.add(view.frame_index);
      }
      this.data = {
        candidates,
        prediction,
        draft: fromServer(annotation),
        pointTotal: total,
        frameIndices: [...frames].sort((a, b) => a - b),
      };
      this.viewer.setPointCloud(merged);
      this.banner(`${sceneId}: ${total} points, ` +
        `${candidates.candidates.length} candidates`, "ok");
      this.render();
    } catch (err) {
      this.banner(`failed to load ${sceneId}: ${(err as Error).message} (retry below)`,
                  "error");
    }
  }

  private bindControls(): void {
    el<HTMLSelectElement>("scene-picker").addEventListener("change", (ev) => {
      void this.loadScene((ev.target as HTMLSelectElement).value);
    });
    el<HTMLButtonElement>("btn-reload").addEventListener("click", () => {
      if (this.state.sceneId) void this.loadScene(this.state.sceneId);
    });
    for (const mode of ["select", "label", "connect"] as EditMode[]) {
      el<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", () => {
        this.state = setMode(this.state, mode);
        this.render();
      });
    }
    for (const layer of ["pointcloud", "candidates", "prediction", "annotation"] as LayerName[]) {
      el<HTMLInputElement>(`layer-${layer}`).addEventListener("change", () => {
        this.state = toggleLayer(this.state, layer);
        this.render();
      });
    }
    el<HTMLButtonElement>("btn-save").addEventListener("click", () => void this.save());
    el<HTMLButtonElement>("btn-add-box").addEventListener("click", () => this.addCustomBox());
  }

  private onPick(id: string | null): void {
    if (id === null) {
      this.state = select(this.state, null);
      this.render();
      return;
    }
    const [layer, entityId] = id.includes(":")
      ? (id.split(":", 2) as [LayerName, string])
      : (["annotation", id] as [LayerName, string]);
    if (this.state.mode === "connect") {
      const node = nodeById(this.data.draft, entityId);
      if (node) this.handleConnectPick(entityId, node.kind);
      return;
    }
    this.state = select(this.state, { type: "node", id: entityId, layer });
    if (this.state.mode === "label") {
      const node = nodeById(this.data.draft, entityId);
      if (node) {
        el<HTMLInputElement>("label-input").value = node.label;
      }
    }
    this.render();
  }

  private handleConnectPick(nodeId: string, kind: NodeKind): void {
    const pick = pickForConnect(this.state, nodeId, kind);
    this.state = pick.state;
    if (pick.error) {
      this.banner(pick.error, "error");
    } else if (pick.pair) {
      const relation = el<HTMLInputElement>("relation-input").value;
      const result = annotateEdge(this.data.draft, pick.pair.elementId,
                                  pick.pair.objectId, relation);
      if (result.error) {
        this.banner(result.error, "error");
      } else {
        this.data.draft = result.draft;
        this.banner(
          `connected ${pick.pair.elementId} -> ${pick.pair.objectId}`, "ok");
      }
    } else if (this.state.connectSource) {
      this.banner(`element ${this.state.connectSource} selected; now pick the object`, "info");
    }
    this.render();
  }

  private addCustomBox(): void {
    const kind = el<HTMLSelectElement>("box-kind").value as NodeKind;
    const label = el<HTMLInputElement>("box-label").value;
    const values = ["x0", "y0", "z0", "x1", "y1", "z1"].map(
      (name) => Number(el<HTMLInputElement>(`box-${name}`).value));
    if (values.some((v) => !Number.isFinite(v))) {
      this.banner("box corners must be six numbers", "error");
      return;
    }
    const bbox: Bbox3 = [values.slice(0, 3), values.slice(3, 6)];
    const result = addNode(this.data.draft, kind, label, bbox);
    if (result.error) {
      this.banner(result.error, "error");
    } else {
      this.data.draft = result.draft;
      this.banner(`added ${kind} '${label}'`, "ok");
    }
    this.render();
  }

  private importCandidate(candidateId: string): void {
    const cand = this.data.candidates?.candidates.find((c) => c.id === candidateId);
    if (!cand) return;
    const label = cand.label_votes.length ? cand.label_votes[0]![0] : cand.id;
    const result = addNode(this.data.draft, cand.kind, label, cand.bbox3d,
                           `ann-${cand.id}`);
    if (result.error) {
      this.banner(result.error, "error");
    } else {
      this.data.draft = result.draft;
    }
    this.render();
  }

  private async save(): Promise<void> {
    if (!this.state.sceneId || !canSave(this.data.draft)) return;
    try {
      const saved = await this.api.putAnnotation(this.state.sceneId, this.data.draft.graph);
      this.data.draft = markSaved(this.data.draft);
      if (!matchesServer(this.data.draft, saved)) {
        this.banner("server normalized the annotation; reload to sync", "error");
      } else {
        this.banner("annotation saved", "ok");
      }
    } catch (err) {
      this.banner(saveErrorMessage(err), "error");
    }
    this.render();
  }

  private applyEdit(result: { draft: AnnotationDraft; error?: string }): void {
    if (result.error) {
      this.banner(result.error, "error");
    } else {
      this.data.draft = result.draft;
    }
    this.render();
  }

  // --- rendering ---

  private render(): void {
    for (const mode of ["select", "label", "connect"] as EditMode[]) {
      el(`mode-${mode}`).classList.toggle("active", this.state.mode === mode);
    }
    for (const layer of Object.keys(this.state.layers) as LayerName[]) {
      el<HTMLInputElement>(`layer-${layer}`).checked = this.state.layers[layer];
    }
    this.viewer.setPointCloudVisible(this.state.layers.pointcloud);
    this.renderBoxes();
    this.renderNodeList();
    this.renderTripletList();
    this.renderCandidateList();
    this.renderValidation();
    this.renderCompare();
    this.renderFrames();
    const save = el<HTMLButtonElement>("btn-save");
    save.disabled = !canSave(this.data.draft);
    el("dirty-flag").textContent = this.data.draft.dirty ? "unsaved changes" : "";
  }

  private renderBoxes(): void {
    const boxes: BoxEntry[] = [];
    if (this.state.layers.candidates && this.data.candidates) {
      for (const cand of this.data.candidates.candidates) {
        boxes.push({ id: `candidates:${cand.id}`, bbox: cand.bbox3d,
                     color: LAYER_COLORS.candidates!, layer: "candidates" });
      }
    }
    if (this.state.layers.prediction && this.data.prediction) {
      for (const node of this.data.prediction.nodes) {
        boxes.push({ id: `prediction:${node.id}`, bbox: node.bbox,
                     color: LAYER_COLORS.prediction!, layer: "prediction" });
      }
    }
    if (this.state.layers.annotation) {
      for (const node of this.data.draft.graph.nodes) {
        boxes.push({ id: `annotation:${node.id}`, bbox: node.bbox,
                     color: LAYER_COLORS.annotation!, layer: "annotation" });
      }
    }
    const highlight = this.state.selection
      ? `${this.state.selection.layer}:${this.state.selection.id}`
      : this.state.connectSource
        ? `annotation:${this.state.connectSource}`
        : null;
    this.viewer.setBoxes(boxes, highlight);

    const edges: EdgeEntry[] = [];
    if (this.state.layers.annotation) {
      for (const t of this.data.draft.graph.triplets) {
        const elem = nodeById(this.data.draft, t.element_id);
        const obj = nodeById(this.data.draft, t.object_id);
        if (elem && obj) {
          edges.push({ key: `${t.element_id}->${t.object_id}`, from: elem.bbox,
                       to: obj.bbox, status: "annotation" });
        }
      }
    }
    if (this.state.layers.prediction && this.data.prediction) {
      const pred = this.data.prediction;
      const diff = compareGraphs(pred, this.data.draft.graph);
      for (const entry of diff.entries) {
        if (!entry.prediction) continue;
        const source = pred.nodes.find((n) => n.id === entry.prediction!.source);
        const target = pred.nodes.find((n) => n.id === entry.prediction!.target);
        if (source && target) {
          edges.push({ key: `${source.id}->${target.id}`, from: source.bbox,
                       to: target.bbox, status: entry.status });
        }
      }
    }
    this.viewer.setEdges(edges);
  }

  private renderNodeList(): void {
    const list = el<HTMLUListElement>("node-list");
    list.innerHTML = "";
    for (const node of this.data.draft.graph.nodes) {
      const item = document.createElement("li");
      const title = document.createElement("span");
      title.textContent = `[${node.kind}] ${node.label} (${node.id})`;
      title.addEventListener("click", () => this.onPick(`annotation:${node.id}`));
      item.appendChild(title);
      if (this.state.mode === "label" && this.state.selection?.id === node.id) {
        const apply = document.createElement("button");
        apply.textContent = "apply label";
        apply.addEventListener("click", () => {
          this.applyEdit(relabelNode(this.data.draft, node.id,
                                     el<HTMLInputElement>("label-input").value));
        });
        item.appendChild(apply);
      }
      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () => this.applyEdit(removeNode(this.data.draft, node.id)));
      item.appendChild(remove);
      list.appendChild(item);
    }
  }

  private renderTripletList(): void {
    const list = el<HTMLUListElement>("triplet-list");
    list.innerHTML = "";
    for (const t of this.data.draft.graph.triplets) {
      const item = document.createElement("li");
      item.textContent = `${t.element_id} -[${t.relation_text}]-> ${t.object_id}`;
      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () =>
        this.applyEdit(removeEdge(this.data.draft, t.element_id, t.object_id)));
      item.appendChild(remove);
      list.appendChild(item);
    }
  }

  private renderCandidateList(): void {
    const list = el<HTMLUListElement>("candidate-list");
    list.innerHTML = "";
    if (!this.data.candidates) return;
    for (const cand of this.data.candidates.candidates) {
      const item = document.createElement("li");
      const label = cand.label_votes.length ? cand.label_votes[0]![0] : "?";
      item.textContent = `[${cand.kind}] ${label} (${cand.id}, ${cand.num_points} pts)`;
      const importBtn = document.createElement("button");
      importBtn.textContent = "import";
      importBtn.addEventListener("click", () => this.importCandidate(cand.id));
      item.appendChild(importBtn);
      list.appendChild(item);
    }
  }

  private renderValidation(): void {
    const list = el<HTMLUListElement>("validation-list");
    list.innerHTML = "";
    for (const message of this.data.draft.validation) {
      const item = document.createElement("li");
      item.textContent = message;
      list.appendChild(item);
    }
  }

  private renderCompare(): void {
    const list = el<HTMLUListElement>("diff-list");
    list.innerHTML = "";
    if (!this.data.prediction) {
      const item = document.createElement("li");
      item.textContent = "no prediction available for this scene";
      list.appendChild(item);
      return;
    }
    const diff = compareGraphs(this.data.prediction, this.data.draft.graph);
    el("diff-counts").textContent =
      `matched ${diff.counts.matched} / prediction-only ${diff.counts.predictionOnly}` +
      ` / annotation-only ${diff.counts.annotationOnly}`;
    for (const entry of diff.entries) {
      const item = document.createElement("li");
      item.dataset.status = entry.status;
      const what = entry.prediction
        ? `${entry.prediction.source} -> ${entry.prediction.target}`
        : `${entry.annotation!.element_id} -> ${entry.annotation!.object_id}`;
      item.textContent = `[${entry.status}] ${what} (${entry.detail.relation})`;
      item.addEventListener("click", () => {
        this.detail = entry;
        this.renderDetail();
      });
      list.appendChild(item);
    }
    this.renderDetail();
  }

  private renderDetail(): void {
    const panel = el<HTMLDivElement>("detail-panel");
    if (!this.detail) {
      panel.textContent = "click a connection to inspect it";
      return;
    }
    const { relation, confidence, evidence } = this.detail.detail;
    const lines = [
      `relation: ${relation}`,
      `confidence: ${confidence === null ? "n/a (annotation)" : confidence}`,
    ];
    if (evidence.length) lines.push(`evidence: ${evidence.join(" | ")}`);
    panel.textContent = lines.join("\n");
  }

  private renderFrames(): void {
    const gallery = el<HTMLDivElement>("frame-gallery");
    gallery.innerHTML = "";
    if (!this.state.sceneId) return;
    for (const index of this.data.frameIndices) {
      const img = document.createElement("img");
      img.src = this.api.frameColorUrl(this.state.sceneId, index);
      img.alt = `frame ${index}`;
      img.title = `frame ${index}`;
      gallery.appendChild(img);
    }
  }
}

declare global {
  interface Window {
    FSGRAPH_API_BASE?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("viewer")) {
  new App(window.FSGRAPH_API_BASE ?? "http://127.0.0.1:8008");
}
