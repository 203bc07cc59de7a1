"""Where does the classifier look? Class activation maps as overlays.

Teaches red-vs-blue, then evaluates an image whose left half is red and
right half is blue. The class activation map (CAM) for each class lights
up the half that supports it, and its spatial mean reproduces the class
logit exactly (the CAM/global-average-pooling identity).

Writes overlay PNGs into demos/output/.

Run:  python3 demos/03_saliency_overlay.py
"""

from pathlib import Path

import numpy as np

from salient_teach import (
    create_session,
    compute_cam,
    crop_box,
    composite_overlay,
    load_backbone,
    render_overlay,
    Frame,
)
from salient_teach.imgio import save_png
from salient_teach.tensor_core import softmax
from salient_teach.trainer import forward

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

backbone = load_backbone("test:0:256:7:7")
session = create_session(backbone, seed=3)


def solid(rgb) -> Frame:
    pixels = np.zeros((480, 640, 3), dtype=np.uint8)
    pixels[:] = rgb
    return Frame.from_array(pixels)


rng = np.random.default_rng(5)
for name, rgb in (("red", (205, 30, 30)), ("blue", (30, 30, 205))):
    label_id = session.add_label(name)
    for _ in range(10):
        jitter = np.clip(np.array(rgb) + rng.integers(-25, 26, 3), 0, 255)
        session.add_sample(label_id, solid(tuple(int(v) for v in jitter)), backbone)

session.train_now()
print("trained red-vs-blue on solid frames")

# the probe image: left half red, right half blue
pixels = np.zeros((480, 640, 3), dtype=np.uint8)
pixels[:, :320] = (205, 30, 30)
pixels[:, 320:] = (30, 30, 205)
frame = Frame.from_array(pixels)
save_png(pixels, str(OUT / "probe.png"))

features = backbone.extract_frame(frame)
probs = softmax(forward(session.head, features.gap))
print("confidences on the half-and-half probe: "
      + "  ".join(f"{l.name}={probs[l.id]:.3f}" for l in session.labels))

crop = crop_box(frame.width, frame.height)
for label in session.labels:
    cam = compute_cam(features, session.head, label.id)
    logit = forward(session.head, features.gap)[label.id]
    identity_gap = abs(cam.grid.mean() - (logit - session.head.bias[label.id]))
    print(f"\nCAM for {label.name!r}: grid mean {cam.grid.mean():+.4f} "
          f"= logit {logit:+.4f} - bias "
          f"(identity residual {identity_gap:.2e})")

    # column means show which horizontal strip carries the evidence
    cols = cam.grid.mean(axis=0)
    bar = "".join("#" if v > cols.mean() else "." for v in cols)
    print(f"  column activity (left->right): {bar}")

    overlay = render_overlay(cam, crop[2])
    out_path = OUT / f"overlay_{label.name}.png"
    save_png(composite_overlay(frame.pixels, overlay, crop), str(out_path))
    print(f"  wrote {out_path}")

print("\nThe 'red' overlay warms the left half, 'blue' the right: the map "
      "shows which pixels argue for the class, not merely where the top "
      "class looks.")
