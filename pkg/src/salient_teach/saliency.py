"""Class activation maps and their rendering into display overlays.

The CAM for class c is the channel-weighted sum of the backbone's spatial
maps, M_c(x, y) = sum_k W[c, k] * F_k(x, y), with the bias excluded. Because
the head consumes exactly the spatial mean of the maps, the spatial mean of
M_c equals the class logit minus its bias; that identity is the module's
central correctness oracle.

Rendering: raw scores (which may be negative - negative evidence is kept,
not clipped) are upsampled, min-max normalized per frame, pushed through a
fixed 256-entry blue->green->yellow->red lookup table, and alpha-scaled so
the strongest region reaches A_MAX.
"""

import base64
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .backbone import FeatureTensor
from .errors import InvalidArgumentError, NotFoundError
from .tensor_core import argmax_class, bilinear_resize, minmax_normalize
from .trainer import LinearHead

# Peak overlay opacity; the normalized maximum renders at this alpha.
A_MAX = 0.6

COLORMAP_ASSET = "colormap_bgyr_256.csv"


@dataclass(frozen=True)
class SaliencyGrid:
    """Raw CAM scores for one class at backbone spatial resolution."""

    class_id: int
    grid: np.ndarray  # (h, w) float64, signed


@dataclass(frozen=True)
class SaliencyOverlay:
    """Colorized RGBA overlay covering the display crop square.

    ``rgba`` is (side, side, 4) float64 with color channels in [0, 1] and
    alpha in [0, A_MAX].
    """

    side: int
    rgba: np.ndarray


@lru_cache(maxsize=1)
def load_colormap() -> np.ndarray:
    """The packaged 256x3 lookup table, as float64 in [0, 255].

    Loaded bit-exactly from the CSV asset; the CSV is the single source of
    truth shared with the browser client.
    """
    text = (
        resources.files("salient_teach")
        .joinpath("assets", COLORMAP_ASSET)
        .read_text(encoding="utf-8")
    )
    rows = [line for line in text.strip().splitlines()[1:]]
    table = np.array(
        [[float(v) for v in row.split(",")] for row in rows], dtype=np.float64
    )
    if table.shape != (256, 3):
        raise InvalidArgumentError(
            f"colormap asset must be 256x3, got {table.shape}"
        )
    return table


def compute_cam(
    features: FeatureTensor, head: LinearHead, class_id: int
) -> SaliencyGrid:
    """Weighted sum of spatial maps by the class's head weights.

    The channel loop accumulates sequentially so the result is bit-identical
    to the per-pixel triple-loop definition.
    """
    if not 0 <= class_id < head.n_classes:
        raise NotFoundError(
            f"class {class_id} out of range for {head.n_classes} classes"
        )
    if features.k != head.n_features:
        raise InvalidArgumentError(
            f"feature channels ({features.k}) do not match head inputs "
            f"({head.n_features})"
        )
    weights = head.weights[class_id]
    maps = features.maps.astype(np.float64)
    grid = np.zeros((features.h, features.w), dtype=np.float64)
    for k in range(features.k):
        grid += weights[k] * maps[k]
    return SaliencyGrid(class_id=int(class_id), grid=grid)


def colorize(normalized: np.ndarray) -> np.ndarray:
    """Map a [0, 1] grid to RGBA via the shared table.

    Values land between table entries and are linearly interpolated; alpha
    is A_MAX times the normalized value, so zero salience is transparent.
    """
    table = load_colormap()
    pos = np.clip(np.asarray(normalized, dtype=np.float64), 0.0, 1.0) * 255.0
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, 255)
    frac = (pos - i0)[..., None]
    rgb = (table[i0] + frac * (table[i1] - table[i0])) / 255.0
    alpha = A_MAX * np.asarray(normalized, dtype=np.float64)
    return np.concatenate([rgb, alpha[..., None]], axis=-1)


def render_overlay(grid: SaliencyGrid, out_side: int,
                   clip_negative: bool = False) -> SaliencyOverlay:
    """Upsample, normalize, and colorize a CAM grid for display.

    By default negative activations participate in normalization (they map
    to the cold end of the colormap); ``clip_negative`` floors them at zero
    first, for viewers who only want positive evidence highlighted.
    """
    values = grid.grid
    if clip_negative:
        values = np.maximum(values, 0.0)
    resized = bilinear_resize(values, out_side, out_side)
    normalized = minmax_normalize(resized)
    return SaliencyOverlay(side=int(out_side), rgba=colorize(normalized))


def select_saliency_class(scores, user_choice: int | None = None) -> int:
    """The user's chosen class if given, else the highest-confidence one."""
    scores = np.asarray(scores, dtype=np.float64)
    if user_choice is None:
        return argmax_class(scores)
    user_choice = int(user_choice)
    if not 0 <= user_choice < scores.size:
        raise NotFoundError(
            f"class {user_choice} out of range for {scores.size} classes"
        )
    return user_choice


def quantize_grid(normalized: np.ndarray) -> bytes:
    """Quantize a [0, 1] grid to row-major 8-bit for the wire."""
    q = np.rint(np.clip(normalized, 0.0, 1.0) * 255.0).astype(np.uint8)
    return q.tobytes()


def encode_grid_b64(normalized: np.ndarray) -> str:
    return base64.b64encode(quantize_grid(normalized)).decode("ascii")


def composite_overlay(
    frame_pixels: np.ndarray,
    overlay: SaliencyOverlay,
    crop: tuple,
) -> np.ndarray:
    """Alpha-blend an overlay onto a full frame inside its crop square.

    Pixels outside the crop square are returned untouched; the CAM carries
    no information there.
    """
    x0, y0, side = crop
    out = frame_pixels.astype(np.float64)
    rgba = overlay.rgba
    if overlay.side != side:
        scaled = np.empty((side, side, 4))
        for c in range(4):
            scaled[:, :, c] = bilinear_resize(rgba[:, :, c], side, side)
        rgba = scaled
    region = out[y0 : y0 + side, x0 : x0 + side, :]
    alpha = rgba[:, :, 3:4]
    out[y0 : y0 + side, x0 : x0 + side, :] = (
        (1.0 - alpha) * region + alpha * (rgba[:, :, :3] * 255.0)
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
