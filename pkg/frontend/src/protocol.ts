// Wire protocol of the stylization service: JSON text frames for control,
// little-endian binary frames [u32 iteration][f32 energy][f32 x 3V] for
// geometry.

export type Regularization = "arap" | "farap" | "acap";

export type StyleSpec =
  | "sphere"
  | "cube"
  | "icosahedron"
  | "tetrahedron"
  | { kind: "polytope"; directions: number[][] }
  | { kind: "mesh"; obj: string }
  | { kind: "normcap"; width: number; height: number; pixels: string }
  | { kind: "developable" };

export type ClientMsg =
  | { type: "load_mesh"; obj: string }
  | { type: "set_style"; style: StyleSpec }
  | {
      type: "set_params";
      lambda?: number;
      regularization?: Regularization;
      maxIterations?: number;
      convergenceTol?: number;
      dynamicTargets?: boolean;
      creaseThreshold?: number;
    }
  | { type: "paint_normcap"; x: number; y: number; width: number; height: number; pixels: string }
  | { type: "start" }
  | { type: "pause" }
  | { type: "reset" }
  | { type: "export" };

export type ServerMsg =
  | { type: "session_created"; session: string; vertices: number; faces: number }
  | { type: "ack"; of: string }
  | { type: "error"; code: "BAD_MESH" | "BAD_STYLE" | "BAD_PARAMS" | "NO_SESSION"; message: string }
  | { type: "exported"; obj: string };

export interface Frame {
  iteration: number;
  energy: number;
  positions: Float32Array; // x0 y0 z0 x1 y1 z1 ...
}

export function decodeFrame(data: ArrayBuffer): Frame {
  if (data.byteLength < 8 || (data.byteLength - 8) % 12 !== 0) {
    throw new Error(`bad frame length ${data.byteLength}`);
  }
  const view = new DataView(data);
  const iteration = view.getUint32(0, true);
  const energy = view.getFloat32(4, true);
  const n = (data.byteLength - 8) / 4;
  const positions = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    positions[i] = view.getFloat32(8 + 4 * i, true);
  }
  return { iteration, energy, positions };
}

export function encodeFrame(frame: Frame): ArrayBuffer {
  const out = new ArrayBuffer(8 + 4 * frame.positions.length);
  const view = new DataView(out);
  view.setUint32(0, frame.iteration, true);
  view.setFloat32(4, frame.energy, true);
  for (let i = 0; i < frame.positions.length; i++) {
    view.setFloat32(8 + 4 * i, frame.positions[i], true);
  }
  return out;
}

export function bytesToBase64(bytes: Uint8Array): string {
  if (typeof btoa === "function") {
    let bin = "";
    const chunk = 0x8000;
    for (let i = 0; i < bytes.length; i += chunk) {
      bin += String.fromCharCode(...bytes.subarray(i, i + chunk));
    }
    return btoa(bin);
  }
  // node (tests)
  return Buffer.from(bytes).toString("base64");
}
