"""Interactive session service: steer a live optimization over one socket.

Protocol (one session per connection):

* Text frames carry JSON control messages.  Requests:
  ``load_mesh`` (OBJ text payload), ``set_style``, ``set_params``,
  ``paint_normcap``, ``start``, ``pause``, ``reset``, ``export``.
  Responses: ``session_created``, ``ack``, ``error`` (codes BAD_MESH,
  BAD_STYLE, BAD_PARAMS, NO_SESSION), ``exported``.
* Binary frames stream geometry snapshots, little-endian:
  ``[u32 iteration][f32 energy][f32 x 3|V| positions]``.

The solver loop runs on a worker thread per session.  Style and
parameter edits are staged in a mailbox and applied atomically at
iteration boundaries; a lambda or style change rebuilds the targets and a
regularization change re-precomputes the global system.  Edits keep the
current deformed positions (warm start).  One frame is sent per
iteration; iterations here are far faster than the 500 ms streaming
floor, so no separate heartbeat is needed.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import struct
import threading

import numpy as np

from .errors import NormStyleError
from .mesh import (
    dumps_obj,
    loads_obj,
    normalize_mesh,
    surface_centroid,
    total_area,
)
from .solver import (
    SolverParams,
    element_normals,
    energy,
    global_step,
    local_step,
    precompute,
)
from .stylefield import (
    AnalyticSphere,
    NormalCaptureImage,
    axis_normal_set,
    build_target_normals,
    conformalized_mcf,
    encode_normcap,
    primitive_normal_set,
)

DEFAULT_PORT = 7340


def _worker_slots() -> threading.Semaphore | None:
    """NA_THREADS caps how many session loops compute concurrently."""
    cap = os.environ.get("NA_THREADS")
    return threading.Semaphore(max(1, int(cap))) if cap else None


_SLOTS = _worker_slots()

_PARAM_KEYS = {
    "lambda": "lambda_",
    "regularization": "regularization",
    "maxIterations": "max_iterations",
    "convergenceTol": "convergence_tol",
    "dynamicTargets": "dynamic_targets",
}


class ProtocolError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def encode_frame(iteration: int, e: float, positions: np.ndarray) -> bytes:
    return struct.pack("<If", iteration, float(e)) + positions.astype("<f4").tobytes()


def decode_frame(data: bytes):
    """Inverse of encode_frame; returns (iteration, energy, (V,3) float32)."""
    iteration, e = struct.unpack_from("<If", data)
    positions = np.frombuffer(data, dtype="<f4", offset=8).reshape(-1, 3)
    return iteration, e, positions


class Session:
    """One steerable optimization; owns a worker thread while running."""

    def __init__(self, session_id: str, send):
        self.id = session_id
        self._send = send  # thread-safe raw sender for str and bytes
        self._lock = threading.RLock()
        self._worker: threading.Thread | None = None
        self._stop = False

        self.mesh = None
        self.centroid = None
        self.scale = None
        self.params = SolverParams(lambda_=1.0, max_iterations=500, convergence_tol=1e-5)
        self.crease_threshold = 0.1
        self.style = AnalyticSphere()
        self.style_kind = "sphere"
        self.normcap: NormalCaptureImage | None = None
        self.pre = None
        self.targets = None
        self.U = None
        self.R = None
        self.s = None
        self.iteration = 0
        self.energy_history: list[float] = []
        self.loop_state = "idle"  # idle | running | paused | converged
        self._staged: dict = {}

    # -- message dispatch ---------------------------------------------------

    def handle_text(self, text: str) -> None:
        try:
            try:
                msg = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ProtocolError("BAD_PARAMS", f"malformed JSON: {exc}") from exc
            if not isinstance(msg, dict) or "type" not in msg:
                raise ProtocolError("BAD_PARAMS", "message must be an object with a type")
            mtype = msg["type"]
            if mtype != "load_mesh" and self.mesh is None:
                raise ProtocolError("NO_SESSION", "load_mesh first")
            handler = getattr(self, f"_on_{mtype}", None)
            if handler is None:
                raise ProtocolError("BAD_PARAMS", f"unknown message type {mtype!r}")
            handler(msg)
        except ProtocolError as exc:
            self._send(_dumps({"type": "error", "code": exc.code, "message": str(exc)}))

    def shutdown(self) -> None:
        self._halt_worker()

    # -- request handlers ---------------------------------------------------

    def _on_load_mesh(self, msg) -> None:
        obj_text = msg.get("obj")
        if not isinstance(obj_text, str):
            raise ProtocolError("BAD_MESH", "load_mesh needs an 'obj' string payload")
        try:
            raw = loads_obj(obj_text)
            self.centroid = surface_centroid(raw)
            self.scale = float(np.sqrt(total_area(raw)))
            mesh = normalize_mesh(raw)
        except NormStyleError as exc:
            raise ProtocolError("BAD_MESH", str(exc)) from exc
        self._halt_worker()
        with self._lock:
            self.mesh = mesh
            self.U = mesh.positions.copy()
            self.R = None
            self.s = None
            self.iteration = 0
            self.energy_history = []
            self.loop_state = "idle"
            self._staged = {}
            self._prepare_locked()
            e0 = self._energy_locked()
        self._send(
            _dumps(
                {
                    "type": "session_created",
                    "session": self.id,
                    "vertices": mesh.n_vertices,
                    "faces": mesh.n_faces,
                }
            )
        )
        self._send(encode_frame(0, e0, self.U))

    def _on_set_style(self, msg) -> None:
        spec = msg.get("style")
        kind, style, normcap = self._build_style(spec)
        with self._lock:
            self._staged["style"] = (kind, style, normcap)
        self._apply_if_idle()
        self._send(_dumps({"type": "ack", "of": "set_style"}))

    def _on_set_params(self, msg) -> None:
        fields = {}
        for wire, attr in _PARAM_KEYS.items():
            if wire in msg:
                fields[attr] = msg[wire]
        crease = msg.get("creaseThreshold")
        try:
            merged = {
                "lambda_": self.params.lambda_,
                "regularization": self.params.regularization,
                "max_iterations": self.params.max_iterations,
                "convergence_tol": self.params.convergence_tol,
                "dynamic_targets": self.params.dynamic_targets,
                "pinned_vertex": self.params.pinned_vertex,
            }
            merged.update(fields)
            new_params = SolverParams(**merged)
            if crease is not None and not 0.0 < float(crease) < 1.0:
                raise ValueError("creaseThreshold must lie in (0,1)")
        except (ValueError, TypeError) as exc:
            raise ProtocolError("BAD_PARAMS", str(exc)) from exc
        if self.style_kind == "developable" and new_params.regularization != "farap":
            raise ProtocolError("BAD_PARAMS", "developable style requires farap")
        with self._lock:
            self._staged["params"] = new_params
            if crease is not None:
                self._staged["crease_threshold"] = float(crease)
        self._apply_if_idle()
        self._send(_dumps({"type": "ack", "of": "set_params"}))

    def _on_paint_normcap(self, msg) -> None:
        with self._lock:
            staged_style = self._staged.get("style")
            normcap = staged_style[2] if staged_style else self.normcap
            if normcap is None:
                raise ProtocolError("BAD_STYLE", "active style is not a normal capture")
            try:
                x, y = int(msg["x"]), int(msg["y"])
                w, h = int(msg["width"]), int(msg["height"])
                pixels = np.frombuffer(
                    base64.b64decode(msg["pixels"]), dtype=np.uint8
                )
                patch = pixels.reshape(h, w, 3).astype(np.float64)
            except (KeyError, ValueError, TypeError) as exc:
                raise ProtocolError("BAD_PARAMS", f"bad patch: {exc}") from exc
            if not (
                0 <= x and 0 <= y
                and y + h <= normcap.height and x + w <= normcap.width
            ):
                raise ProtocolError("BAD_PARAMS", "patch outside image bounds")
            normcap.rgb[y : y + h, x : x + w] = patch
            self._staged["retarget"] = True
        self._apply_if_idle()
        self._send(_dumps({"type": "ack", "of": "paint_normcap"}))

    def _on_start(self, msg) -> None:
        with self._lock:
            if self.loop_state == "running":
                self._send(_dumps({"type": "ack", "of": "start"}))
                return
            self._stop = False
            self.loop_state = "running"
        self._send(_dumps({"type": "ack", "of": "start"}))
        self._worker = threading.Thread(target=self._loop, daemon=True)
        self._worker.start()

    def _on_pause(self, msg) -> None:
        self._halt_worker()
        with self._lock:
            if self.loop_state == "running":
                self.loop_state = "paused"
        self._send(_dumps({"type": "ack", "of": "pause"}))

    def _on_reset(self, msg) -> None:
        self._halt_worker()
        with self._lock:
            self.U = self.mesh.positions.copy()
            self.R = None
            self.s = None
            self.iteration = 0
            self.energy_history = []
            self.loop_state = "idle"
            self._apply_staged_locked()
            e0 = self._energy_locked()
        self._send(_dumps({"type": "ack", "of": "reset"}))
        self._send(encode_frame(0, e0, self.U))

    def _on_export(self, msg) -> None:
        with self._lock:
            positions = self.U * self.scale + self.centroid
            text = dumps_obj(self.mesh.with_positions(positions))
        self._send(_dumps({"type": "exported", "obj": text}))

    # -- style construction -------------------------------------------------

    def _build_style(self, spec):
        """Returns (kind, lookup-style or None for energy styles, normcap)."""
        if isinstance(spec, str):
            spec = {"kind": spec}
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ProtocolError("BAD_STYLE", "style must be a name or {kind: ...}")
        kind = spec["kind"]
        try:
            if kind == "sphere":
                return kind, AnalyticSphere(), None
            if kind in ("cube", "icosahedron", "tetrahedron"):
                return kind, primitive_normal_set(kind), None
            if kind == "polytope":
                return kind, axis_normal_set(np.asarray(spec["directions"], dtype=float)), None
            if kind == "mesh":
                style_mesh = loads_obj(spec["obj"])
                return kind, conformalized_mcf(style_mesh), None
            if kind == "normcap":
                if "pixels" in spec:
                    pixels = np.frombuffer(
                        base64.b64decode(spec["pixels"]), dtype=np.uint8
                    ).reshape(int(spec["height"]), int(spec["width"]), 3)
                    img = NormalCaptureImage(pixels.astype(np.float64))
                else:
                    img = NormalCaptureImage(
                        encode_normcap(lambda d: d, 128, 64).astype(np.float64)
                    )
                return kind, img, img
            if kind == "developable":
                return kind, None, None
        except ProtocolError:
            raise
        except (NormStyleError, KeyError, ValueError, TypeError) as exc:
            raise ProtocolError("BAD_STYLE", f"{kind}: {exc}") from exc
        raise ProtocolError("BAD_STYLE", f"unknown style {kind!r}")

    # -- internals ------------------------------------------------------

    def _apply_if_idle(self) -> None:
        with self._lock:
            if self.loop_state != "running":
                self._apply_staged_locked()

    def _apply_staged_locked(self) -> None:
        staged, self._staged = self._staged, {}
        if not staged:
            return
        retarget = staged.pop("retarget", False)
        old_mode = self.params.mode
        old_lambda = self.params.lambda_
        if "params" in staged:
            self.params = staged["params"]
        if "crease_threshold" in staged:
            self.crease_threshold = staged["crease_threshold"]
            retarget = retarget or self.style_kind == "developable"
        if "style" in staged:
            self.style_kind, self.style, self.normcap = staged["style"]
            if self.style_kind == "developable":
                # face-mode energy style; force the matching regularizer
                if self.params.regularization != "farap":
                    self.params = SolverParams(
                        lambda_=self.params.lambda_,
                        regularization="farap",
                        max_iterations=self.params.max_iterations,
                        convergence_tol=self.params.convergence_tol,
                        dynamic_targets=True,
                        pinned_vertex=self.params.pinned_vertex,
                    )
            retarget = True
        if self.params.lambda_ != old_lambda:
            retarget = True
        if self.params.mode != old_mode or self.pre is None:
            self._prepare_locked()
        elif retarget:
            self._rebuild_targets_locked()

    def _prepare_locked(self) -> None:
        self.pre = precompute(self.mesh, self.params)
        self.R = None
        self.s = None
        self._rebuild_targets_locked()

    def _rebuild_targets_locked(self) -> None:
        from .energies import developable_targets

        if self.style_kind == "developable":
            self.targets = developable_targets(
                self.U, self.mesh.faces, self.crease_threshold
            )
        else:
            # constant-target paste uses the rest normals; the dynamic loop
            # refreshes from the deformed normals after each iteration
            self.targets = build_target_normals(
                self.style, self.pre.rest_normals, self.pre.mode
            )

    def _energy_locked(self) -> float:
        m = self.pre.n_elements
        R = self.R if self.R is not None else np.broadcast_to(np.eye(3), (m, 3, 3))
        return energy(self.U, R, self.pre, self.targets, self.params, self.s)

    def _dynamic_locked(self) -> bool:
        return self.params.dynamic_targets or self.style_kind == "developable"

    def _halt_worker(self) -> None:
        with self._lock:
            self._stop = True
            worker = self._worker
        if worker is not None and worker.is_alive():
            worker.join()
        self._worker = None
        with self._lock:
            self._stop = False

    def _loop(self) -> None:
        from .energies import developable_targets

        while True:
            with self._lock:
                if self._stop or self.loop_state != "running":
                    break
                self._apply_staged_locked()
                if self.iteration >= self.params.max_iterations:
                    self.loop_state = "converged"
                    break
                pre, targets, params = self.pre, self.targets, self.params
                U, R, s = self.U, self.R, self.s
            try:
                if _SLOTS is not None:
                    with _SLOTS:
                        R, s = local_step(U, pre, targets, params, prev_R=R)
                        U = global_step(R, pre, s)
                        e = energy(U, R, pre, targets, params, s)
                else:
                    R, s = local_step(U, pre, targets, params, prev_R=R)
                    U = global_step(R, pre, s)
                    e = energy(U, R, pre, targets, params, s)
            except NormStyleError as exc:
                self._send(
                    _dumps({"type": "error", "code": "BAD_PARAMS", "message": str(exc)})
                )
                with self._lock:
                    self.loop_state = "paused"
                break
            with self._lock:
                self.U, self.R, self.s = U, R, s
                self.iteration += 1
                it = self.iteration
                prev = self.energy_history[-1] if self.energy_history else None
                self.energy_history.append(e)
                if self._dynamic_locked():
                    if self.style_kind == "developable":
                        self.targets = developable_targets(
                            U, self.mesh.faces, self.crease_threshold
                        )
                    else:
                        self.targets = build_target_normals(
                            self.style,
                            element_normals(U, self.mesh.faces, pre.mode),
                            pre.mode,
                        )
                converged = prev is not None and abs(e - prev) <= (
                    params.convergence_tol * max(abs(prev), 1e-12)
                )
                if converged:
                    self.loop_state = "converged"
            self._send(encode_frame(it, e, U))
            if converged:
                break


# ---------------------------------------------------------------------------
# Server plumbing
# ---------------------------------------------------------------------------

def _connection_handler(ws, session_id: str) -> None:
    send_lock = threading.Lock()

    def send(payload):
        with send_lock:
            ws.send(payload)

    session = Session(session_id, send)
    try:
        for message in ws:
            if isinstance(message, bytes):
                send(
                    _dumps(
                        {
                            "type": "error",
                            "code": "BAD_PARAMS",
                            "message": "binary requests are not part of the protocol",
                        }
                    )
                )
            else:
                session.handle_text(message)
    finally:
        session.shutdown()


def make_server(host: str = "127.0.0.1", port: int = DEFAULT_PORT):
    """Create (without starting) the websocket server; sessions die with
    their connection.  Pass port 0 for an ephemeral port."""
    from websockets.sync.server import serve

    counter = {"n": 0}
    lock = threading.Lock()

    def handler(ws):
        with lock:
            counter["n"] += 1
            sid = f"s{counter['n']}"
        _connection_handler(ws, sid)

    return serve(handler, host, port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stylize-studio", description="Interactive stylization session server."
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    args = parser.parse_args(argv)
    with make_server(args.host, args.port) as server:
        print(f"studio listening on ws://{args.host}:{args.port}")
        server.serve_forever()
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
