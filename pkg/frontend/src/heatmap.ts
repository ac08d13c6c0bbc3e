// Angle-to-target heatmap: face normals against the active style's
// targets, colored on a blue -> green -> yellow -> red ramp.

import type { Vec3 } from "./normcap.js";

export const HEATMAP_MAX_DEG = 45;

export function heatColor(angleDeg: number): [number, number, number] {
  const t = Math.min(1, Math.max(0, angleDeg / HEATMAP_MAX_DEG));
  const stops: [number, number, number][] = [
    [0.16, 0.32, 0.75],
    [0.18, 0.7, 0.4],
    [0.95, 0.85, 0.25],
    [0.85, 0.2, 0.15],
  ];
  const x = t * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(x));
  const f = x - i;
  const a = stops[i];
  const b = stops[i + 1];
  return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])];
}

export function angleBetweenDeg(a: Vec3, b: Vec3): number {
  const d = Math.min(1, Math.max(-1, a[0] * b[0] + a[1] * b[1] + a[2] * b[2]));
  return (Math.acos(d) * 180) / Math.PI;
}

// Nearest direction in a finite set (the client-side mirror of the
// service's snapping styles, used to color faces by angle-to-target).
export function snapToSet(n: Vec3, set: Vec3[]): Vec3 {
  let best = set[0];
  let bestDot = -Infinity;
  for (const s of set) {
    const d = n[0] * s[0] + n[1] * s[1] + n[2] * s[2];
    if (d > bestDot) {
      bestDot = d;
      best = s;
    }
  }
  return best;
}

export const CUBE_AXES: Vec3[] = [
  [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1],
];
