"""Shared fixtures: deterministic backbones and an on-disk image corpus."""

import numpy as np
import pytest
from PIL import Image

from salient_teach import Frame, make_test_backbone

# Three well-separated colors with per-image jitter: easy for a linear head,
# nontrivial for everything upstream of it.
CORPUS_COLORS = {
    "blue": (30, 30, 205),
    "green": (30, 205, 30),
    "red": (205, 30, 30),
}


def solid_frame(r: int, g: int, b: int, width: int = 640,
                height: int = 480) -> Frame:
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:] = (r, g, b)
    return Frame.from_array(pixels)


def jittered_color(base: tuple, rng) -> tuple:
    return tuple(
        int(np.clip(c + rng.integers(-25, 26), 0, 255)) for c in base
    )


@pytest.fixture(scope="session")
def tiny_backbone():
    return make_test_backbone(seed=0, k=16, h=5, w=5)


@pytest.fixture(scope="session")
def wide_backbone():
    return make_test_backbone(seed=0, k=256, h=7, w=7)


def write_corpus(root, per_label: int, size: tuple = (64, 48),
                 seed: int = 123) -> None:
    """Lay out root/<label>/<label>_NN.png for each corpus color."""
    rng = np.random.default_rng(seed)
    for label, base in CORPUS_COLORS.items():
        label_dir = root / label
        label_dir.mkdir(parents=True)
        for i in range(per_label):
            color = jittered_color(base, rng)
            img = Image.new("RGB", size, color)
            img.save(label_dir / f"{label}_{i:02d}.png")


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """3 labels x 10 images on disk."""
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, per_label=10)
    return root


def teach_solid_colors(backbone, per_label: int = 10, seed: int = 7,
                       config=None):
    """A trained session over the three corpus colors, built in memory."""
    from salient_teach import create_session

    session = create_session(backbone, config=config, seed=seed)
    for name in CORPUS_COLORS:
        session.add_label(name)
    rng = np.random.default_rng(123)
    for i in range(per_label):
        for label_id, base in enumerate(CORPUS_COLORS.values()):
            session.add_sample(
                label_id, solid_frame(*jittered_color(base, rng)), backbone
            )
    session.train_now()
    return session
