#!/usr/bin/env python3
"""Record the protocol-conformance transcript fixture.

Runs a scripted session (load -> set_style -> set_params -> start ->
10 frames -> pause -> export) against a fresh studio server and writes
the exchanged messages to tests/fixtures/.  Binary frames are also
copied to frontend/test/fixtures/ for the UI decoder round-trip test.

Rerun this script to regenerate the fixtures (e.g. on a platform whose
BLAS produces different low-order float bits).
"""

import json
import pathlib
import shutil
import sys
import threading

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from websockets.sync.client import connect

from normstyle import primitives
from normstyle.mesh import dumps_obj
from normstyle.studio import make_server

ROOT = pathlib.Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
UI_FIXTURES = ROOT / "frontend" / "test" / "fixtures"

# each step: request payload, number of expected text responses, number of
# expected binary frames (in whatever interleaving the server produces)
SCRIPT = [
    ({"type": "load_mesh", "obj": dumps_obj(primitives.icosphere(1))}, 1, 1),
    ({"type": "set_style", "style": "cube"}, 1, 0),
    ({"type": "set_params", "lambda": 2.0, "maxIterations": 10,
      "convergenceTol": 1e-12}, 1, 0),
    ({"type": "start"}, 1, 10),
    ({"type": "pause"}, 1, 0),
    ({"type": "export"}, 1, 0),
]


def run_scripted_session(url):
    """Returns the transcript: list of (dir, payload) with payload text or bytes."""
    steps = []
    with connect(url, max_size=None) as ws:
        for request, n_text, n_frames in SCRIPT:
            text = json.dumps(request)
            ws.send(text)
            steps.append(("send", text))
            got_text = got_frames = 0
            while got_text < n_text or got_frames < n_frames:
                msg = ws.recv(timeout=30)
                if isinstance(msg, bytes):
                    steps.append(("recv_frame", msg))
                    got_frames += 1
                else:
                    steps.append(("recv", msg))
                    got_text += 1
    return steps


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    UI_FIXTURES.mkdir(parents=True, exist_ok=True)
    server = make_server("127.0.0.1", 0)
    port = server.socket.getsockname()[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        steps = run_scripted_session(f"ws://127.0.0.1:{port}")
    finally:
        server.shutdown()

    for old in FIXTURES.glob("studio_frame_*.bin"):
        old.unlink()
    manifest = []
    frame_no = 0
    for direction, payload in steps:
        if direction == "recv_frame":
            name = f"studio_frame_{frame_no:02d}.bin"
            (FIXTURES / name).write_bytes(payload)
            manifest.append({"dir": "recv_frame", "file": name})
            frame_no += 1
        else:
            manifest.append({"dir": direction, "text": payload})
    (FIXTURES / "studio_transcript.json").write_text(
        json.dumps(manifest, indent=1) + "\n", encoding="utf-8"
    )
    for frame in FIXTURES.glob("studio_frame_*.bin"):
        shutil.copy(frame, UI_FIXTURES / frame.name)
    print(f"recorded {len(manifest)} steps, {frame_no} frames")


if __name__ == "__main__":
    main()
