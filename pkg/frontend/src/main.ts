// Wires the studio UI: connection, style pickers, normcap painter,
// lambda slider, viewport, and the energy sparkline.

import { decodeFrame, type ServerMsg, type StyleSpec } from "./protocol.js";
import { StudioViewModel } from "./state.js";
import { NormcapCanvas, decodeNormal, type Vec3 } from "./normcap.js";
import { parseObjFaces } from "./mesh.js";
import { Viewport } from "./render.js";
import { drawSparkline } from "./sparkline.js";
import { CUBE_AXES } from "./heatmap.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

let ws: WebSocket | null = null;
let vm: StudioViewModel | null = null;
let viewport: Viewport | null = null;
const normcap = new NormcapCanvas(128, 64);
let normcapActive = false;
let patchTimer: number | null = null;

function connect(): void {
  const url = ($("url") as HTMLInputElement).value;
  ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  vm = new StudioViewModel({ send: (m) => ws?.send(JSON.stringify(m)) });
  ws.onopen = () => setStatus("connected");
  ws.onclose = () => setStatus("disconnected");
  ws.onerror = () => setStatus("socket error");
  ws.onmessage = (ev) => {
    if (!vm) return;
    if (ev.data instanceof ArrayBuffer) {
      const frame = decodeFrame(ev.data);
      vm.onFrame(frame);
      viewport?.setPositions(frame.positions);
      $("iteration").textContent = `iteration ${frame.iteration}`;
      drawSparkline($("sparkline") as HTMLCanvasElement, vm.energyTrace);
    } else {
      const msg = JSON.parse(ev.data) as ServerMsg;
      vm.onServerMessage(msg);
      if (msg.type === "session_created") {
        $("meshinfo").textContent = `${msg.vertices} vertices, ${msg.faces} faces`;
      } else if (msg.type === "error") {
        toast(`${msg.code}: ${msg.message}`);
      } else if (msg.type === "exported") {
        downloadText("stylized.obj", msg.obj);
      }
    }
  };
}

function setStatus(text: string): void {
  $("status").textContent = text;
}

function toast(text: string): void {
  const el = $("toast");
  el.textContent = text;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 4000);
}

function downloadText(name: string, text: string): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([text], { type: "text/plain" }));
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

function currentStyle(): StyleSpec {
  const kind = ($("style") as HTMLSelectElement).value;
  if (kind === "normcap") return normcap.toStylePayload();
  if (kind === "developable") return { kind: "developable" };
  return kind as StyleSpec;
}

function applyStyle(): void {
  const kind = ($("style") as HTMLSelectElement).value;
  normcapActive = kind === "normcap";
  $("normcap-panel").style.display = normcapActive ? "block" : "none";
  $("crease-panel").style.display = kind === "developable" ? "block" : "none";
  vm?.setStyle(currentStyle());
}

function flushPaintPatch(): void {
  const patch = normcap.takePatch();
  if (patch && vm) {
    vm.paintPatch(patch.x, patch.y, patch.width, patch.height, patch.pixels);
  }
  patchTimer = null;
}

function setupNormcapPainting(): void {
  const canvas = $("normcap-canvas") as HTMLCanvasElement;
  canvas.width = normcap.width;
  canvas.height = normcap.height;
  const redraw = () => {
    const ctx = canvas.getContext("2d")!;
    const img = ctx.createImageData(normcap.width, normcap.height);
    for (let i = 0; i < normcap.width * normcap.height; i++) {
      img.data[4 * i] = normcap.pixels[3 * i];
      img.data[4 * i + 1] = normcap.pixels[3 * i + 1];
      img.data[4 * i + 2] = normcap.pixels[3 * i + 2];
      img.data[4 * i + 3] = 255;
    }
    ctx.putImageData(img, 0, 0);
    drawSpherePreview();
  };

  const brushNormal = (): Vec3 => {
    const az = parseFloat(($("brush-az") as HTMLInputElement).value);
    const el = parseFloat(($("brush-el") as HTMLInputElement).value);
    return [
      Math.cos(el) * Math.cos(az),
      Math.sin(el),
      Math.cos(el) * Math.sin(az),
    ];
  };

  let painting = false;
  const paintAt = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    const col = ((ev.clientX - rect.left) / rect.width) * normcap.width;
    const row = ((ev.clientY - rect.top) / rect.height) * normcap.height;
    normcap.brush(col, row, 4, brushNormal());
    redraw();
    if (patchTimer === null) {
      patchTimer = window.setTimeout(flushPaintPatch, 60);
    }
  };
  canvas.addEventListener("pointerdown", (e) => {
    if (!normcapActive) return;
    painting = true;
    canvas.setPointerCapture(e.pointerId);
    paintAt(e);
  });
  canvas.addEventListener("pointermove", (e) => painting && paintAt(e));
  canvas.addEventListener("pointerup", () => {
    painting = false;
    flushPaintPatch();
  });
  redraw();
}

// front-hemisphere preview of the painted capture
function drawSpherePreview(): void {
  const canvas = $("sphere-preview") as HTMLCanvasElement;
  const size = canvas.width;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(size, size);
  for (let py = 0; py < size; py++) {
    for (let px = 0; px < size; px++) {
      const x = (2 * px) / size - 1;
      const y = 1 - (2 * py) / size;
      const rr = x * x + y * y;
      const o = 4 * (py * size + px);
      if (rr > 1) {
        img.data[o + 3] = 0;
        continue;
      }
      const d: Vec3 = [x, y, Math.sqrt(1 - rr)];
      // sample the capture at this direction (nearest pixel)
      const lon = Math.atan2(d[2], d[0]);
      const lat = Math.asin(d[1]);
      const c = Math.min(
        normcap.width - 1,
        Math.max(0, Math.round(((lon + Math.PI) / (2 * Math.PI)) * normcap.width - 0.5)),
      );
      const r = Math.min(
        normcap.height - 1,
        Math.max(0, Math.round((0.5 - lat / Math.PI) * normcap.height - 0.5)),
      );
      const [cr, cg, cb] = normcap.getPixel(c, r);
      try {
        const n = decodeNormal(cr, cg, cb);
        const shade = 0.3 + 0.7 * Math.max(0, n[2]);
        img.data[o] = cr * shade;
        img.data[o + 1] = cg * shade;
        img.data[o + 2] = cb * shade;
      } catch {
        img.data[o] = img.data[o + 1] = img.data[o + 2] = 32;
      }
      img.data[o + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
}

function setup(): void {
  viewport = new Viewport($("viewport") as HTMLCanvasElement);
  setupNormcapPainting();

  $("connect").onclick = connect;
  ($("meshfile") as HTMLInputElement).onchange = async (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file || !vm) return;
    const text = await file.text();
    viewport?.setMesh(parseObjFaces(text).faces);
    vm.loadMesh(text);
  };
  $("apply-style").onclick = applyStyle;
  $("start").onclick = () => {
    if (!vm?.start()) toast("load a mesh first");
  };
  $("pause").onclick = () => vm?.pause();
  $("reset").onclick = () => vm?.reset();
  $("export").onclick = () => vm?.requestExport();

  const lambdaSlider = $("lambda") as HTMLInputElement;
  lambdaSlider.oninput = () => {
    // log scale over [1e-2, 1e2]
    const lam = Math.pow(10, parseFloat(lambdaSlider.value));
    $("lambda-label").textContent = `lambda = ${lam.toPrecision(3)}`;
    vm?.setParam("lambda", lam);
  };
  ($("reg") as HTMLSelectElement).onchange = () =>
    vm?.setParam("regularization", ($("reg") as HTMLSelectElement).value as never);
  ($("dynamic") as HTMLInputElement).onchange = () =>
    vm?.setParam("dynamicTargets", ($("dynamic") as HTMLInputElement).checked);
  const crease = $("crease") as HTMLInputElement;
  crease.oninput = () => {
    $("crease-label").textContent = `crease threshold = ${crease.value}`;
    vm?.setParam("creaseThreshold", parseFloat(crease.value));
  };
  ($("heatmap") as HTMLInputElement).onchange = () => {
    if (!viewport) return;
    viewport.heatmap = ($("heatmap") as HTMLInputElement).checked;
    viewport.targetSet = CUBE_AXES;
    viewport.refreshColors();
  };

  const tick = () => {
    vm?.update();
    viewport?.draw();
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

document.addEventListener("DOMContentLoaded", setup);
