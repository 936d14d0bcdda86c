/** Thin three.js layer: point cloud, candidate/annotation boxes, edge lines.
 *
 * All interaction decisions live in state.ts/draft.ts; this module only
 * turns data into scene objects and reports picks back via a callback. */

import * as THREE from "three";

import { boxCenter } from "./geometry.js";
import type { Bbox3 } from "./types.js";
import type { EdgeDiffStatus } from "./diff.js";

export interface BoxEntry {
  id: string;
  bbox: Bbox3;
  color: number;
  layer: string;
}

export interface EdgeEntry {
  key: string;
  from: Bbox3;
  to: Bbox3;
  status: EdgeDiffStatus | "annotation";
}

const EDGE_COLORS: Record<string, number> = {
  matched: 0x2e9e4f,
  "prediction-only": 0xd9822b,
  "annotation-only": 0x3366cc,
  annotation: 0x3366cc,
};

export class Viewer {
  readonly scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private raycaster = new THREE.Raycaster();
  private pointCloud: THREE.Points | null = null;
  private boxGroup = new THREE.Group();
  private edgeGroup = new THREE.Group();
  private boxMeshes = new Map<string, THREE.Object3D>();
  private dragging = false;
  private lastPointer: [number, number] = [0, 0];
  private orbit = { theta: 0.0, phi: 1.2, radius: 5.0, target: new THREE.Vector3() };

  constructor(
    private container: HTMLElement,
    private onPick: (id: string | null) => void,
  ) {
    this.camera = new THREE.PerspectiveCamera(
      55, container.clientWidth / Math.max(container.clientHeight, 1), 0.01, 100);
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    this.renderer.setClearColor(0x10141a);
    container.appendChild(this.renderer.domElement);
    this.scene.add(this.boxGroup);
    this.scene.add(this.edgeGroup);
    this.bindInput();
    this.animate();
  }

  private bindInput(): void {
    const el = this.renderer.domElement;
    el.addEventListener("pointerdown", (ev) => {
      this.dragging = true;
      this.lastPointer = [ev.clientX, ev.clientY];
    });
    window.addEventListener("pointerup", () => (this.dragging = false));
    el.addEventListener("pointermove", (ev) => {
      if (!this.dragging) return;
      const dx = ev.clientX - this.lastPointer[0];
      const dy = ev.clientY - this.lastPointer[1];
      this.lastPointer = [ev.clientX, ev.clientY];
      this.orbit.theta -= dx * 0.008;
      this.orbit.phi = Math.min(Math.max(this.orbit.phi - dy * 0.008, 0.05), Math.PI - 0.05);
    });
    el.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.orbit.radius = Math.min(Math.max(this.orbit.radius * (1 + ev.deltaY * 0.001), 0.2), 50);
    });
    el.addEventListener("click", (ev) => {
      const rect = el.getBoundingClientRect();
      const ndc = new THREE.Vector2(
        ((ev.clientX - rect.left) / rect.width) * 2 - 1,
        -((ev.clientY - rect.top) / rect.height) * 2 + 1,
      );
      this.raycaster.setFromCamera(ndc, this.camera);
      const hits = this.raycaster.intersectObjects(this.boxGroup.children, true);
      const first = hits.find((h) => h.object.userData.pickId);
      this.onPick(first ? (first.object.userData.pickId as string) : null);
    });
  }

  private animate = (): void => {
    requestAnimationFrame(this.animate);
    const { theta, phi, radius, target } = this.orbit;
    this.camera.position.set(
      target.x + radius * Math.sin(phi) * Math.cos(theta),
      target.y + radius * Math.cos(phi),
      target.z + radius * Math.sin(phi) * Math.sin(theta),
    );
    this.camera.lookAt(target);
    this.renderer.render(this.scene, this.camera);
  };

  setPointCloud(positions: Float32Array): void {
    if (this.pointCloud) this.scene.remove(this.pointCloud);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.computeBoundingSphere();
    const material = new THREE.PointsMaterial({ size: 0.02, color: 0xc8d2dc });
    this.pointCloud = new THREE.Points(geometry, material);
    this.scene.add(this.pointCloud);
    if (geometry.boundingSphere) {
      this.orbit.target.copy(geometry.boundingSphere.center);
      this.orbit.radius = Math.max(geometry.boundingSphere.radius * 2.5, 1.0);
    }
  }

  setPointCloudVisible(visible: boolean): void {
    if (this.pointCloud) this.pointCloud.visible = visible;
  }

  setBoxes(entries: BoxEntry[], highlightId: string | null): void {
    this.boxGroup.clear();
    this.boxMeshes.clear();
    for (const entry of entries) {
      const [lo, hi] = entry.bbox;
      const size = [0, 1, 2].map((i) => Math.max((hi[i] ?? 0) - (lo[i] ?? 0), 1e-3));
      const geometry = new THREE.BoxGeometry(size[0], size[1], size[2]);
      const selected = entry.id === highlightId;
      const material = new THREE.MeshBasicMaterial({
        color: selected ? 0xffffff : entry.color,
        wireframe: true,
      });
      const mesh = new THREE.Mesh(geometry, material);
      const center = boxCenter(entry.bbox);
      mesh.position.set(center[0], center[1], center[2]);
      mesh.userData.pickId = entry.id;
      this.boxMeshes.set(entry.id, mesh);
      this.boxGroup.add(mesh);
    }
  }

  setEdges(entries: EdgeEntry[]): void {
    this.edgeGroup.clear();
    for (const entry of entries) {
      const from = boxCenter(entry.from);
      const to = boxCenter(entry.to);
      const geometry = new THREE.BufferGeometry().setFromPoints([
        new THREE.Vector3(...from),
        new THREE.Vector3(...to),
      ]);
      const material = new THREE.LineBasicMaterial({
        color: EDGE_COLORS[entry.status] ?? 0x888888,
      });
      this.edgeGroup.add(new THREE.Line(geometry, material));
    }
  }

  resize(): void {
    const w = this.container.clientWidth;
    const h = Math.max(this.container.clientHeight, 1);
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(w, h);
  }
}
