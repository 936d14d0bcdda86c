import { describe, expect, it } from "vitest";

import { cloneGraph, deepEqual } from "../src/types.js";

describe("deepEqual", () => {
  it("ignores object key order (the server serializes keys sorted)", () => {
    expect(deepEqual({ a: 1, b: [2, 3] }, { b: [2, 3], a: 1 })).toBe(true);
  });

  it("array order is significant", () => {
    expect(deepEqual([1, 2], [2, 1])).toBe(false);
  });

  it("detects nested differences", () => {
    expect(deepEqual({ a: { b: 1 } }, { a: { b: 2 } })).toBe(false);
    expect(deepEqual({ a: { b: 1 } }, { a: { b: 1, c: 3 } })).toBe(false);
  });

  it("handles primitives and nulls", () => {
    expect(deepEqual(null, null)).toBe(true);
    expect(deepEqual(null, {})).toBe(false);
    expect(deepEqual(1.5, 1.5)).toBe(true);
    expect(deepEqual("x", "y")).toBe(false);
  });
});

describe("cloneGraph", () => {
  it("makes an independent copy", () => {
    const graph = { nodes: [{ id: "a", kind: "object" as const, label: "x",
                              bbox: [[0, 0, 0], [1, 1, 1]] as [number[], number[]] }],
                    triplets: [] };
    const copy = cloneGraph(graph);
    copy.nodes[0]!.label = "changed";
    expect(graph.nodes[0]!.label).toBe("x");
  });
});
