// Orbit camera: spherical coordinates around a target, producing
// column-major view and projection matrices for WebGL.

export type Mat4 = Float32Array;

export class OrbitCamera {
  yaw = 0.6;
  pitch = 0.4;
  distance = 3.0;
  target: [number, number, number] = [0, 0, 0];
  minDistance = 0.2;
  maxDistance = 50;

  rotate(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    const limit = Math.PI / 2 - 1e-3;
    this.pitch = Math.min(limit, Math.max(-limit, this.pitch + dPitch));
  }

  zoom(factor: number): void {
    this.distance = Math.min(
      this.maxDistance,
      Math.max(this.minDistance, this.distance * factor),
    );
  }

  eye(): [number, number, number] {
    const cp = Math.cos(this.pitch);
    return [
      this.target[0] + this.distance * cp * Math.sin(this.yaw),
      this.target[1] + this.distance * Math.sin(this.pitch),
      this.target[2] + this.distance * cp * Math.cos(this.yaw),
    ];
  }

  viewMatrix(): Mat4 {
    return lookAt(this.eye(), this.target, [0, 1, 0]);
  }
}

export function lookAt(
  eye: [number, number, number],
  target: [number, number, number],
  up: [number, number, number],
): Mat4 {
  const f = normalize([target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]]);
  const s = normalize(cross(f, up));
  const u = cross(s, f);
  // column-major
  return new Float32Array([
    s[0], u[0], -f[0], 0,
    s[1], u[1], -f[1], 0,
    s[2], u[2], -f[2], 0,
    -dot(s, eye), -dot(u, eye), dot(f, eye), 1,
  ]);
}

export function perspective(fovYRad: number, aspect: number, near: number, far: number): Mat4 {
  const t = 1 / Math.tan(fovYRad / 2);
  const inv = 1 / (near - far);
  return new Float32Array([
    t / aspect, 0, 0, 0,
    0, t, 0, 0,
    0, 0, (far + near) * inv, -1,
    0, 0, 2 * far * near * inv, 0,
  ]);
}

export function multiply(a: Mat4, b: Mat4): Mat4 {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let acc = 0;
      for (let k = 0; k < 4; k++) acc += a[k * 4 + row] * b[col * 4 + k];
      out[col * 4 + row] = acc;
    }
  }
  return out;
}

function normalize(v: [number, number, number]): [number, number, number] {
  const len = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / len, v[1] / len, v[2] / len];
}

function cross(a: [number, number, number], b: [number, number, number]): [number, number, number] {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function dot(a: [number, number, number], b: [number, number, number]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
