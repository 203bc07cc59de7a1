"""The wire protocol, message by message.

Scripts a complete teaching conversation against the WebSocket service:
create a session, add labels and samples, train (streaming progress),
evaluate a frame, pick a saliency class, and save the session. The same
exchange drives the browser UI.

Needs the test extra for the in-process client:
    pip install -e ".[test]" --no-build-isolation
Run:  python3 demos/05_protocol_walkthrough.py
"""

import base64
import json

import numpy as np
from starlette.testclient import TestClient

from salient_teach import create_app, load_backbone
from salient_teach.imgio import frame_to_png_b64
from salient_teach.backbone import Frame


def color_png_b64(rgb) -> str:
    pixels = np.zeros((48, 64, 3), dtype=np.uint8)
    pixels[:] = rgb
    return frame_to_png_b64(Frame.from_array(pixels))


def send(ws, **msg):
    shown = {k: (v[:24] + "..." if isinstance(v, str) and len(v) > 32 else v)
             for k, v in msg.items()}
    print(f"-> {json.dumps(shown)}")
    ws.send_text(json.dumps(msg))


def recv(ws) -> dict:
    msg = json.loads(ws.receive_text())
    shown = json.dumps(msg)
    print(f"<- {shown if len(shown) <= 100 else shown[:97] + '...'}")
    return msg


app = create_app(load_backbone("test:0:16:5:5"))
with TestClient(app) as client:
    print(f"GET /healthz -> {client.get('/healthz').json()}\n")
    with client.websocket_connect("/ws") as ws:
        send(ws, type="create_session", seed=0)
        recv(ws)

        for name in ("red", "blue"):
            send(ws, type="add_label", name=name)
            recv(ws)

        rng = np.random.default_rng(0)
        for label_id, rgb in ((0, (205, 30, 30)), (1, (30, 30, 205))):
            for _ in range(3):
                jitter = np.clip(np.array(rgb) + rng.integers(-25, 26, 3),
                                 0, 255)
                send(ws, type="add_sample", label_id=label_id,
                     frame=color_png_b64(tuple(int(v) for v in jitter)))
                recv(ws)

        print("\n-- training streams one progress message per epoch --")
        send(ws, type="train")
        while recv(ws)["type"] != "trained":
            pass

        print("\n-- a frame comes back as scores + saliency + latency --")
        send(ws, type="frame", frame=color_png_b64((205, 30, 30)))
        prediction = recv(ws)
        sal = prediction["saliency"]
        grid = np.frombuffer(base64.b64decode(sal["q8"]), dtype=np.uint8)
        print(f"   saliency: {sal['h']}x{sal['w']} grid for class "
              f"{sal['class_id']}, 8-bit values {grid.min()}..{grid.max()}, "
              f"crop square {sal['crop']}")

        print("\n-- the client may pin the saliency class --")
        send(ws, type="select_class", class_id=1)
        recv(ws)
        send(ws, type="frame", frame=color_png_b64((205, 30, 30)))
        pinned = recv(ws)
        print(f"   overlay class is now {pinned['saliency']['class_id']} "
              "even though the top score is class 0")

        print("\n-- malformed input costs exactly one error, never the socket --")
        ws.send_text("{broken json")
        print('-> {broken json')
        recv(ws)

        send(ws, type="save")
        blob = recv(ws)["blob"]
        print(f"\nsession snapshot: {len(blob):,} bytes, reloadable via "
              "'load' or the CLI")
