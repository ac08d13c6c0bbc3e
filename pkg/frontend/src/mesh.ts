// Client-side mesh bookkeeping: face list parsing (for uploads) and
// per-face normals for flat shading and the heatmap overlay.

import type { Vec3 } from "./normcap.js";

export interface ClientMesh {
  faces: Uint32Array; // triangle corner indices, fan-triangulated
  vertexCount: number;
}

export function parseObjFaces(objText: string): ClientMesh {
  let vertexCount = 0;
  const faces: number[] = [];
  for (const raw of objText.split("\n")) {
    const line = raw.trim();
    if (line.startsWith("v ")) {
      vertexCount++;
    } else if (line.startsWith("f ")) {
      const idx = line
        .split(/\s+/)
        .slice(1)
        .map((tok) => {
          const v = parseInt(tok.split("/")[0], 10);
          return v > 0 ? v - 1 : vertexCount + v;
        });
      for (let i = 1; i + 1 < idx.length; i++) {
        faces.push(idx[0], idx[i], idx[i + 1]);
      }
    }
  }
  return { faces: new Uint32Array(faces), vertexCount };
}

export function faceNormal(positions: Float32Array, faces: Uint32Array, f: number): Vec3 {
  const a = 3 * faces[3 * f];
  const b = 3 * faces[3 * f + 1];
  const c = 3 * faces[3 * f + 2];
  const ux = positions[b] - positions[a];
  const uy = positions[b + 1] - positions[a + 1];
  const uz = positions[b + 2] - positions[a + 2];
  const vx = positions[c] - positions[a];
  const vy = positions[c + 1] - positions[a + 1];
  const vz = positions[c + 2] - positions[a + 2];
  const nx = uy * vz - uz * vy;
  const ny = uz * vx - ux * vz;
  const nz = ux * vy - uy * vx;
  const len = Math.hypot(nx, ny, nz) || 1;
  return [nx / len, ny / len, nz / len];
}
