/** Axis-aligned box math shared by the diff view and the viewer. */

import type { Bbox3 } from "./types.js";

export function boxVolume(box: Bbox3): number {
  const [lo, hi] = box;
  let volume = 1.0;
  for (let axis = 0; axis < 3; axis++) {
    volume *= Math.max(0, (hi[axis] ?? 0) - (lo[axis] ?? 0));
  }
  return volume;
}

/** Volume IoU; degenerate (zero-volume) boxes always score 0. */
export function bboxIou(a: Bbox3, b: Bbox3): number {
  let inter = 1.0;
  for (let axis = 0; axis < 3; axis++) {
    const lo = Math.max(a[0][axis] ?? 0, b[0][axis] ?? 0);
    const hi = Math.min(a[1][axis] ?? 0, b[1][axis] ?? 0);
    inter *= Math.max(0, hi - lo);
  }
  const union = boxVolume(a) + boxVolume(b) - inter;
  return union > 0 ? inter / union : 0;
}

export function boxCenter(box: Bbox3): [number, number, number] {
  const [lo, hi] = box;
  return [
    ((lo[0] ?? 0) + (hi[0] ?? 0)) / 2,
    ((lo[1] ?? 0) + (hi[1] ?? 0)) / 2,
    ((lo[2] ?? 0) + (hi[2] ?? 0)) / 2,
  ];
}
