// UI-side session state machine.  Keeps the protocol rules in one
// DOM-free place: no start before session_created, and set_params fields
// are debounced last-write-wins (100 ms) with at most one un-acked send
// in flight per field.

import type { ClientMsg, Frame, Regularization, ServerMsg, StyleSpec } from "./protocol.js";

export const PARAM_DEBOUNCE_MS = 100;

export type Phase = "idle" | "awaiting_session" | "ready" | "running" | "paused";

export interface Transport {
  send(msg: ClientMsg): void;
}

type ParamField =
  | "lambda"
  | "regularization"
  | "maxIterations"
  | "convergenceTol"
  | "dynamicTargets"
  | "creaseThreshold";

type ParamValue = number | boolean | Regularization;

export class StudioViewModel {
  phase: Phase = "idle";
  session: string | null = null;
  vertexCount = 0;
  faceCount = 0;
  latestFrame: Frame | null = null;
  energyTrace: number[] = [];
  lastError: string | null = null;
  exportedObj: string | null = null;

  private latest = new Map<ParamField, ParamValue>();
  private sentAt = new Map<ParamField, number>();
  private pendingSends = 0; // un-acked set_params messages
  private dirty = new Set<ParamField>();

  constructor(private transport: Transport, private now: () => number = () => Date.now()) {}

  // -- UI intents ----------------------------------------------------------

  loadMesh(objText: string): void {
    this.transport.send({ type: "load_mesh", obj: objText });
    this.phase = "awaiting_session";
    this.session = null;
    this.energyTrace = [];
    this.latestFrame = null;
  }

  setStyle(style: StyleSpec): void {
    if (!this.session) return;
    this.transport.send({ type: "set_style", style });
  }

  // Marks the field dirty; the actual send happens in update() so that
  // edits landing in one tick travel in one message.
  setParam(field: ParamField, value: ParamValue): void {
    if (!this.session) return;
    this.latest.set(field, value);
    this.dirty.add(field);
  }

  paintPatch(x: number, y: number, width: number, height: number, pixelsBase64: string): void {
    if (!this.session) return;
    this.transport.send({ type: "paint_normcap", x, y, width, height, pixels: pixelsBase64 });
  }

  start(): boolean {
    if (!this.session || this.phase === "awaiting_session" || this.phase === "idle") {
      return false; // never before session_created
    }
    this.transport.send({ type: "start" });
    this.phase = "running";
    return true;
  }

  pause(): void {
    if (!this.session) return;
    this.transport.send({ type: "pause" });
    this.phase = "paused";
  }

  reset(): void {
    if (!this.session) return;
    this.transport.send({ type: "reset" });
    this.energyTrace = [];
  }

  requestExport(): void {
    if (!this.session) return;
    this.transport.send({ type: "export" });
  }

  // Flush debounced parameter edits that are due.  Call regularly (e.g.
  // from requestAnimationFrame); tests drive it with a fake clock.
  update(): void {
    if (this.dirty.size === 0 || this.pendingSends > 0) return;
    const t = this.now();
    const due: Partial<Record<ParamField, ParamValue>> = {};
    let any = false;
    for (const field of [...this.dirty]) {
      const last = this.sentAt.get(field) ?? -Infinity;
      if (t - last >= PARAM_DEBOUNCE_MS) {
        due[field] = this.latest.get(field)!;
        this.sentAt.set(field, t);
        this.dirty.delete(field);
        any = true;
      }
    }
    if (any) {
      this.transport.send({ type: "set_params", ...due } as ClientMsg);
      this.pendingSends += 1;
    }
  }

  // -- server events ---------------------------------------------------

  onServerMessage(msg: ServerMsg): void {
    switch (msg.type) {
      case "session_created":
        this.session = msg.session;
        this.vertexCount = msg.vertices;
        this.faceCount = msg.faces;
        this.phase = "ready";
        break;
      case "ack":
        if (msg.of === "set_params" && this.pendingSends > 0) {
          this.pendingSends -= 1;
          this.update();
        }
        if (msg.of === "pause") this.phase = "paused";
        break;
      case "error":
        this.lastError = `${msg.code}: ${msg.message}`;
        if (msg.code === "BAD_PARAMS" && this.pendingSends > 0) {
          this.pendingSends -= 1;
        }
        break;
      case "exported":
        this.exportedObj = msg.obj;
        break;
    }
  }

  onFrame(frame: Frame): void {
    this.latestFrame = frame;
    this.energyTrace.push(frame.energy);
    if (this.energyTrace.length > 512) this.energyTrace.shift();
  }
}
