// Minimal WebGL2 flat-shaded mesh viewport with orbit/zoom and an
// optional per-face angle-to-target heatmap.

import { multiply, OrbitCamera, perspective } from "./camera.js";
import { angleBetweenDeg, CUBE_AXES, heatColor, snapToSet } from "./heatmap.js";
import { faceNormal } from "./mesh.js";
import type { Vec3 } from "./normcap.js";

const VS = `#version 300 es
layout(location=0) in vec3 position;
layout(location=1) in vec3 normal;
layout(location=2) in vec3 color;
uniform mat4 mvp;
out vec3 vNormal;
out vec3 vColor;
void main() {
  gl_Position = mvp * vec4(position, 1.0);
  vNormal = normal;
  vColor = color;
}`;

const FS = `#version 300 es
precision mediump float;
in vec3 vNormal;
in vec3 vColor;
uniform vec3 lightDir;
out vec4 outColor;
void main() {
  float diffuse = 0.35 + 0.65 * abs(dot(normalize(vNormal), lightDir));
  outColor = vec4(vColor * diffuse, 1.0);
}`;

export class Viewport {
  readonly camera = new OrbitCamera();
  heatmap = false;
  targetSet: Vec3[] = CUBE_AXES;

  private gl: WebGL2RenderingContext;
  private program: WebGLProgram;
  private vbo: WebGLBuffer;
  private mvpLoc: WebGLUniformLocation;
  private lightLoc: WebGLUniformLocation;
  private cornerCount = 0;
  private positions: Float32Array | null = null;
  private faces: Uint32Array | null = null;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2");
    if (!gl) throw new Error("WebGL2 not available");
    this.gl = gl;
    this.program = makeProgram(gl, VS, FS);
    this.vbo = gl.createBuffer()!;
    this.mvpLoc = gl.getUniformLocation(this.program, "mvp")!;
    this.lightLoc = gl.getUniformLocation(this.program, "lightDir")!;
    gl.enable(gl.DEPTH_TEST);
    this.attachControls();
  }

  setMesh(faces: Uint32Array): void {
    this.faces = faces;
  }

  setPositions(positions: Float32Array): void {
    this.positions = positions;
    this.rebuild();
  }

  private rebuild(): void {
    if (!this.positions || !this.faces) return;
    const nf = this.faces.length / 3;
    const data = new Float32Array(nf * 3 * 9);
    let o = 0;
    for (let f = 0; f < nf; f++) {
      const n = faceNormal(this.positions, this.faces, f);
      let color: [number, number, number] = [0.62, 0.69, 0.87];
      if (this.heatmap) {
        color = heatColor(angleBetweenDeg(n, snapToSet(n, this.targetSet)));
      }
      for (let c = 0; c < 3; c++) {
        const v = 3 * this.faces[3 * f + c];
        data[o++] = this.positions[v];
        data[o++] = this.positions[v + 1];
        data[o++] = this.positions[v + 2];
        data[o++] = n[0];
        data[o++] = n[1];
        data[o++] = n[2];
        data[o++] = color[0];
        data[o++] = color[1];
        data[o++] = color[2];
      }
    }
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.bufferData(gl.ARRAY_BUFFER, data, gl.DYNAMIC_DRAW);
    this.cornerCount = nf * 3;
  }

  refreshColors(): void {
    this.rebuild();
  }

  draw(): void {
    const gl = this.gl;
    const w = this.canvas.clientWidth || this.canvas.width;
    const h = this.canvas.clientHeight || this.canvas.height;
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.canvas.width = w;
      this.canvas.height = h;
    }
    gl.viewport(0, 0, w, h);
    gl.clearColor(0.08, 0.09, 0.11, 1.0);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.cornerCount === 0) return;

    gl.useProgram(this.program);
    const mvp = multiply(
      perspective(Math.PI / 4, w / Math.max(1, h), 0.01, 100),
      this.camera.viewMatrix(),
    );
    gl.uniformMatrix4fv(this.mvpLoc, false, mvp);
    gl.uniform3f(this.lightLoc, 0.4, 0.82, 0.41);

    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    for (let i = 0; i < 3; i++) {
      gl.enableVertexAttribArray(i);
      gl.vertexAttribPointer(i, 3, gl.FLOAT, false, 36, i * 12);
    }
    gl.drawArrays(gl.TRIANGLES, 0, this.cornerCount);
  }

  private attachControls(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.camera.rotate((e.clientX - lastX) * 0.008, (e.clientY - lastY) * 0.008);
      lastX = e.clientX;
      lastY = e.clientY;
    });
    this.canvas.addEventListener("pointerup", () => (dragging = false));
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.camera.zoom(Math.exp(e.deltaY * 0.001));
    });
  }
}

function makeProgram(gl: WebGL2RenderingContext, vs: string, fs: string): WebGLProgram {
  const compile = (type: number, src: string) => {
    const sh = gl.createShader(type)!;
    gl.shaderSource(sh, src);
    gl.compileShader(sh);
    if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
      throw new Error(gl.getShaderInfoLog(sh) ?? "shader compile failed");
    }
    return sh;
  };
  const program = gl.createProgram()!;
  gl.attachShader(program, compile(gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(gl.getProgramInfoLog(program) ?? "program link failed");
  }
  return program;
}
