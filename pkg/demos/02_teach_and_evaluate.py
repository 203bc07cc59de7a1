"""Teach a three-class classifier from frames, then assess it live.

The whole loop in one script: create a session, record labeled frames,
train the linear head on frozen backbone features, and score new frames
with per-class confidences. Uses the built-in deterministic test backbone
(``test:<seed>:<channels>:<h>:<w>``), so no model download is needed.

Run:  python3 demos/02_teach_and_evaluate.py
"""

import numpy as np

from salient_teach import (
    create_session,
    dumps_session,
    evaluate_frame,
    load_backbone,
    loads_session,
    Frame,
)

COLORS = {"blue": (30, 30, 205), "green": (30, 205, 30), "red": (205, 30, 30)}


def color_frame(rgb, rng=None) -> Frame:
    pixels = np.zeros((480, 640, 3), dtype=np.uint8)
    jitter = rng.integers(-25, 26, size=3) if rng is not None else np.zeros(3)
    pixels[:] = np.clip(np.array(rgb) + jitter, 0, 255).astype(np.uint8)
    return Frame.from_array(pixels)


backbone = load_backbone("test:0:256:7:7")
print(f"backbone: {backbone.identity} "
      f"({backbone.out_k} channels over a {backbone.out_h}x{backbone.out_w} grid)")

session = create_session(backbone, seed=7)
rng = np.random.default_rng(42)
for name, rgb in COLORS.items():
    label_id = session.add_label(name)
    for _ in range(10):
        session.add_sample(label_id, color_frame(rgb, rng), backbone)
    print(f"recorded 10 frames for label {label_id} ({name!r})")

print("\ntraining the head (10 epochs, Adam, frozen features)...")
report = session.train_now(
    progress=lambda epoch, loss: print(f"  epoch {epoch:2d}  loss {loss:.4f}")
)
print(f"final train accuracy {report.final_accuracy:.0%} "
      f"in {report.train_ms:.0f} ms")

print("\nassessing held-out frames:")
for name, rgb in COLORS.items():
    frame = color_frame(rgb, rng)
    result = evaluate_frame(session, backbone, frame)
    scores = "  ".join(f"{s['name']}={s['p']:.3f}" for s in result.scores)
    top = max(result.scores, key=lambda s: s["p"])
    verdict = "ok" if top["name"] == name else "MISS"
    print(f"  a {name:5s} frame -> {scores}   [{verdict}]")

blob = dumps_session(session)
restored = loads_session(blob, backbone)
print(f"\nsession serializes to {len(blob):,} bytes and restores "
      f"{sum(restored.counts())} samples across {len(restored.labels)} labels")
