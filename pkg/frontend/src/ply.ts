/** Minimal binary little-endian PLY reader (x/y/z as double or float). */

export interface PointCloud {
  /** flattened xyz triples */
  positions: Float32Array;
  /** vertex count from the header (consistency-checked against the body) */
  headerCount: number;
}

const HEADER_END = "end_header\n";

export function parsePly(buffer: ArrayBuffer): PointCloud {
  const bytes = new Uint8Array(buffer);
  const headerLimit = Math.min(bytes.length, 4096);
  const headerText = new TextDecoder("ascii").decode(bytes.subarray(0, headerLimit));
  const end = headerText.indexOf(HEADER_END);
  if (end < 0) throw new Error("not a PLY file (no end_header)");
  const header = headerText.slice(0, end);
  if (!header.startsWith("ply")) throw new Error("not a PLY file");
  if (!header.includes("format binary_little_endian")) {
    throw new Error("unsupported PLY format (need binary_little_endian)");
  }

  let count = 0;
  const propertyTypes: string[] = [];
  for (const line of header.split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts[0] === "element" && parts[1] === "vertex") count = Number(parts[2]);
    if (parts[0] === "property" && parts[1]) propertyTypes.push(parts[1]);
  }
  if (propertyTypes.length < 3) throw new Error("PLY has fewer than 3 vertex properties");
  const sizes: Record<string, number> = {
    double: 8, float64: 8, float: 4, float32: 4,
  };
  const stride = propertyTypes.reduce((acc, t) => {
    const size = sizes[t];
    if (size === undefined) throw new Error(`unsupported property type '${t}'`);
    return acc + size;
  }, 0);

  const bodyOffset = end + HEADER_END.length;
  const body = new DataView(buffer, bodyOffset);
  if (body.byteLength < count * stride) {
    throw new Error(`truncated PLY: need ${count * stride} bytes, have ${body.byteLength}`);
  }
  const positions = new Float32Array(count * 3);
  for (let i = 0; i < count; i++) {
    let offset = i * stride;
    for (let axis = 0; axis < 3; axis++) {
      const type = propertyTypes[axis]!;
      if (type === "double" || type === "float64") {
        positions[i * 3 + axis] = body.getFloat64(offset, true);
        offset += 8;
      } else {
        positions[i * 3 + axis] = body.getFloat32(offset, true);
        offset += 4;
      }
    }
  }
  return { positions, headerCount: count };
}
