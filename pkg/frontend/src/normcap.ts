// Equirectangular normal-capture math, mirroring the service convention:
// columns span longitude atan2(z, x) in [-pi, pi），rows span latitude
// asin(y) from +pi/2 (top) to -pi/2; a normal n encodes to RGB as
// round(255 * (n + 1) / 2).

import { bytesToBase64 } from "./protocol.js";

export type Vec3 = [number, number, number];

export function encodeNormal(n: Vec3): [number, number, number] {
  const c = (v: number) => Math.min(255, Math.max(0, Math.round((v + 1) * 0.5 * 255)));
  return [c(n[0]), c(n[1]), c(n[2])];
}

export function decodeNormal(r: number, g: number, b: number): Vec3 {
  const v: Vec3 = [(2 * r) / 255 - 1, (2 * g) / 255 - 1, (2 * b) / 255 - 1];
  const len = Math.hypot(v[0], v[1], v[2]);
  if (len < 0.1) throw new Error("pixel decodes to a near-zero normal");
  return [v[0] / len, v[1] / len, v[2] / len];
}

export function pixelCenterDirection(col: number, row: number, width: number, height: number): Vec3 {
  const lon = ((col + 0.5) / width) * 2 * Math.PI - Math.PI;
  const lat = Math.PI / 2 - ((row + 0.5) / height) * Math.PI;
  return [Math.cos(lat) * Math.cos(lon), Math.sin(lat), Math.cos(lat) * Math.sin(lon)];
}

export function directionToPixel(d: Vec3, width: number, height: number): [number, number] {
  const lon = Math.atan2(d[2], d[0]);
  const lat = Math.asin(Math.min(1, Math.max(-1, d[1])));
  const col = ((lon + Math.PI) / (2 * Math.PI)) * width - 0.5;
  const row = (0.5 - lat / Math.PI) * height - 0.5;
  return [col, row];
}

export interface DirtyRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

// Paintable RGB image with dirty-rect tracking for patch messages.
export class NormcapCanvas {
  readonly pixels: Uint8Array; // row-major RGB

  private dirty: DirtyRect | null = null;

  constructor(readonly width: number, readonly height: number) {
    this.pixels = new Uint8Array(width * height * 3);
    // start from the identity capture: each pixel encodes its own direction
    for (let r = 0; r < height; r++) {
      for (let c = 0; c < width; c++) {
        this.setPixel(c, r, encodeNormal(pixelCenterDirection(c, r, width, height)));
      }
    }
    this.dirty = null;
  }

  setPixel(col: number, row: number, rgb: [number, number, number]): void {
    const o = (row * this.width + col) * 3;
    this.pixels[o] = rgb[0];
    this.pixels[o + 1] = rgb[1];
    this.pixels[o + 2] = rgb[2];
    this.grow(col, row);
  }

  getPixel(col: number, row: number): [number, number, number] {
    const o = (row * this.width + col) * 3;
    return [this.pixels[o], this.pixels[o + 1], this.pixels[o + 2]];
  }

  // Stamp a disc of the encoded normal; rows clamp, columns wrap.
  brush(col: number, row: number, radius: number, normal: Vec3): void {
    const rgb = encodeNormal(normal);
    const r2 = radius * radius;
    for (let dr = -Math.ceil(radius); dr <= Math.ceil(radius); dr++) {
      const rr = Math.round(row) + dr;
      if (rr < 0 || rr >= this.height) continue;
      for (let dc = -Math.ceil(radius); dc <= Math.ceil(radius); dc++) {
        if (dr * dr + dc * dc > r2) continue;
        const cc = ((Math.round(col) + dc) % this.width + this.width) % this.width;
        this.setPixel(cc, rr, rgb);
      }
    }
  }

  private grow(col: number, row: number): void {
    if (!this.dirty) {
      this.dirty = { x: col, y: row, width: 1, height: 1 };
      return;
    }
    const x0 = Math.min(this.dirty.x, col);
    const y0 = Math.min(this.dirty.y, row);
    const x1 = Math.max(this.dirty.x + this.dirty.width, col + 1);
    const y1 = Math.max(this.dirty.y + this.dirty.height, row + 1);
    this.dirty = { x: x0, y: y0, width: x1 - x0, height: y1 - y0 };
  }

  // Extract and clear the pending dirty rect as a patch message payload.
  takePatch(): { x: number; y: number; width: number; height: number; pixels: string } | null {
    if (!this.dirty) return null;
    const { x, y, width, height } = this.dirty;
    const out = new Uint8Array(width * height * 3);
    for (let r = 0; r < height; r++) {
      const src = ((y + r) * this.width + x) * 3;
      out.set(this.pixels.subarray(src, src + width * 3), r * width * 3);
    }
    this.dirty = null;
    return { x, y, width, height, pixels: bytesToBase64(out) };
  }

  // Full image as a set_style payload.
  toStylePayload(): { kind: "normcap"; width: number; height: number; pixels: string } {
    return {
      kind: "normcap",
      width: this.width,
      height: this.height,
      pixels: bytesToBase64(this.pixels),
    };
  }
}
