import { describe, expect, it } from "vitest";

import type { ClientMsg, ServerMsg } from "../src/protocol.js";
import { PARAM_DEBOUNCE_MS, StudioViewModel } from "../src/state.js";

function makeVm() {
  const sent: ClientMsg[] = [];
  let t = 0;
  const vm = new StudioViewModel({ send: (m) => sent.push(m) }, () => t);
  const clock = {
    advance(ms: number) {
      t += ms;
      vm.update();
    },
  };
  return { vm, sent, clock };
}

const CREATED: ServerMsg = {
  type: "session_created",
  session: "s1",
  vertices: 42,
  faces: 80,
};

describe("session state machine", () => {
  it("never sends start before session_created", () => {
    const { vm, sent } = makeVm();
    expect(vm.start()).toBe(false);
    vm.loadMesh("v 0 0 0\n");
    expect(vm.start()).toBe(false); // still awaiting the ack
    expect(sent.filter((m) => m.type === "start")).toHaveLength(0);
    vm.onServerMessage(CREATED);
    expect(vm.start()).toBe(true);
    expect(sent.filter((m) => m.type === "start")).toHaveLength(1);
  });

  it("ignores style and param edits without a session", () => {
    const { vm, sent } = makeVm();
    vm.setStyle("cube");
    vm.setParam("lambda", 2);
    expect(sent).toHaveLength(0);
  });

  it("tracks counts and phase from session_created", () => {
    const { vm } = makeVm();
    vm.loadMesh("x");
    expect(vm.phase).toBe("awaiting_session");
    vm.onServerMessage(CREATED);
    expect(vm.phase).toBe("ready");
    expect(vm.vertexCount).toBe(42);
    expect(vm.faceCount).toBe(80);
  });
});

describe("set_params debounce", () => {
  it("coalesces rapid slider moves into one send per window", () => {
    const { vm, sent, clock } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    vm.setParam("lambda", 1.0);
    vm.update(); // first send goes out on the next tick
    for (let v = 1.1; v < 2.05; v += 0.1) {
      vm.setParam("lambda", v);
      vm.update();
    }
    const paramSends = () => sent.filter((m) => m.type === "set_params");
    expect(paramSends()).toHaveLength(1);

    vm.onServerMessage({ type: "ack", of: "set_params" });
    clock.advance(PARAM_DEBOUNCE_MS);
    expect(paramSends()).toHaveLength(2);
    // last write wins
    const last = paramSends()[1] as Extract<ClientMsg, { type: "set_params" }>;
    expect(last.lambda).toBeCloseTo(2.0, 5);
  });

  it("holds sends while an ack is pending", () => {
    const { vm, sent, clock } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    vm.setParam("lambda", 1.0);
    clock.advance(PARAM_DEBOUNCE_MS * 5);
    vm.setParam("lambda", 3.0);
    clock.advance(PARAM_DEBOUNCE_MS * 5);
    // no ack yet: only the first send went out
    expect(sent.filter((m) => m.type === "set_params")).toHaveLength(1);
    vm.onServerMessage({ type: "ack", of: "set_params" });
    const all = sent.filter((m) => m.type === "set_params");
    expect(all).toHaveLength(2);
    expect((all[1] as { lambda?: number }).lambda).toBe(3.0);
  });

  it("bundles fields edited in one tick into one message", () => {
    const { vm, sent } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    vm.setParam("lambda", 2.0);
    vm.update();
    vm.onServerMessage({ type: "ack", of: "set_params" });
    vm.setParam("regularization", "farap");
    vm.setParam("dynamicTargets", true);
    vm.update();
    const params = sent.filter((m) => m.type === "set_params");
    expect(params).toHaveLength(2);
    const second = params[1] as Record<string, unknown>;
    expect(second.regularization).toBe("farap");
    expect(second.dynamicTargets).toBe(true);
  });
});

describe("frames and errors", () => {
  it("keeps the latest frame and an energy trace", () => {
    const { vm } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    for (let i = 1; i <= 5; i++) {
      vm.onFrame({ iteration: i, energy: 1 / i, positions: new Float32Array(126) });
    }
    expect(vm.latestFrame?.iteration).toBe(5);
    expect(vm.energyTrace).toHaveLength(5);
    expect(vm.energyTrace[4]).toBeCloseTo(0.2, 6);
  });

  it("surfaces server errors", () => {
    const { vm } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    vm.onServerMessage({ type: "error", code: "BAD_STYLE", message: "nope" });
    expect(vm.lastError).toBe("BAD_STYLE: nope");
  });

  it("stores exported OBJ text", () => {
    const { vm } = makeVm();
    vm.loadMesh("x");
    vm.onServerMessage(CREATED);
    vm.onServerMessage({ type: "exported", obj: "v 0 0 0\n" });
    expect(vm.exportedObj).toBe("v 0 0 0\n");
  });
});
