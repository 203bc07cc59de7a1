"""Frames, preprocessing, and pluggable feature-extraction backbones.

A backbone is a frozen convolutional network used purely as a feature
extractor. It exposes the final spatial activation grid (the maps CAM
consumes) plus that grid's global-average-pooled vector (what the linear
head consumes). The GAP vector is always recomputed here from the spatial
maps, never trusted from the model, because the saliency identity
mean(CAM_c) = z_c - b_c only holds when the head sees exactly the spatial
mean of the maps.

Two implementations ship:

* ``TestBackbone`` - hermetic, seeded, needs no model asset. Described by
  the string form ``test:<seed>:<K>:<h>:<w>``.
* ``OnnxBackbone`` (see :mod:`salient_teach.onnx_exec`) - runs a real ONNX
  image classifier and taps the last spatial activation before global
  pooling.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, ModelLoadError
from .tensor_core import bilinear_resize

DEFAULT_INPUT_SIDE = 224
DEFAULT_INPUT_RANGE = (-1.0, 1.0)


@dataclass(frozen=True)
class Frame:
    """A raw RGB image plus its capture timestamp in monotonic ms."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row-major
    timestamp_ms: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("frame dimensions must be positive")
        px = self.pixels
        if px.shape != (self.height, self.width, 3) or px.dtype != np.uint8:
            raise InvalidArgumentError(
                f"pixel buffer must be uint8 with shape "
                f"({self.height}, {self.width}, 3), got {px.dtype} {px.shape}"
            )

    @classmethod
    def from_array(cls, pixels: np.ndarray, timestamp_ms: int = 0) -> "Frame":
        pixels = np.asarray(pixels)
        if pixels.dtype != np.uint8:
            raise InvalidArgumentError(
                f"pixels must be uint8, got {pixels.dtype}"
            )
        pixels = np.ascontiguousarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise InvalidArgumentError("expected an (H, W, 3) RGB array")
        h, w = pixels.shape[:2]
        return cls(width=w, height=h, pixels=pixels, timestamp_ms=timestamp_ms)


@dataclass(frozen=True)
class ModelInput:
    """A square, range-normalized float image ready for a backbone."""

    side: int
    values: np.ndarray  # (side, side, 3) float64 in value_range
    value_range: tuple = DEFAULT_INPUT_RANGE


@dataclass(frozen=True)
class FeatureTensor:
    """Spatial activation maps plus their global-average-pooled vector.

    ``maps`` is (K, h, w) float32 - 32-bit is the backbone boundary and the
    session storage format. ``gap`` is float64, recomputed from ``maps``.
    """

    maps: np.ndarray
    gap: np.ndarray

    @property
    def k(self) -> int:
        return self.maps.shape[0]

    @property
    def h(self) -> int:
        return self.maps.shape[1]

    @property
    def w(self) -> int:
        return self.maps.shape[2]

    @classmethod
    def from_maps(cls, maps: np.ndarray) -> "FeatureTensor":
        maps = np.ascontiguousarray(maps, dtype=np.float32)
        if maps.ndim != 3 or maps.size == 0:
            raise InvalidArgumentError("maps must be a non-empty (K, h, w) array")
        gap = maps.astype(np.float64).mean(axis=(1, 2))
        return cls(maps=maps, gap=gap)


def crop_box(width: int, height: int) -> tuple[int, int, int]:
    """(x0, y0, side) of the largest centered square inside a frame."""
    side = min(width, height)
    return (width - side) // 2, (height - side) // 2, side


def preprocess(
    frame: Frame,
    side: int = DEFAULT_INPUT_SIDE,
    value_range: tuple = DEFAULT_INPUT_RANGE,
) -> ModelInput:
    """Center-crop to a square, bilinear-resize, and range-normalize.

    8-bit channel values map linearly from [0, 255] onto ``value_range``;
    for the default (-1, 1) this is v / 127.5 - 1.
    """
    if frame.width < 1 or frame.height < 1:
        raise InvalidArgumentError("frame dimensions must be positive")
    x0, y0, crop_side = crop_box(frame.width, frame.height)
    square = frame.pixels[y0 : y0 + crop_side, x0 : x0 + crop_side, :]

    resized = np.empty((side, side, 3), dtype=np.float64)
    for c in range(3):
        resized[:, :, c] = bilinear_resize(
            square[:, :, c].astype(np.float64), side, side
        )

    lo, hi = value_range
    if value_range == DEFAULT_INPUT_RANGE:
        values = resized / 127.5 - 1.0
    else:
        values = lo + (hi - lo) * (resized / 255.0)
    return ModelInput(side=side, values=values, value_range=value_range)


class Backbone:
    """Contract shared by all feature extractors.

    Instances are immutable once loaded and safe to share across threads;
    ``extract`` must be a pure function of (identity, input).
    """

    identity: str
    input_side: int
    input_range: tuple
    out_h: int
    out_w: int
    out_k: int

    def extract(self, model_input: ModelInput) -> FeatureTensor:
        raise NotImplementedError

    def preprocess(self, frame: Frame) -> ModelInput:
        return preprocess(frame, self.input_side, self.input_range)

    def extract_frame(self, frame: Frame) -> FeatureTensor:
        return self.extract(self.preprocess(frame))

    def _check_input(self, model_input: ModelInput) -> None:
        if model_input.side != self.input_side:
            raise InvalidArgumentError(
                f"input side {model_input.side} does not match backbone "
                f"side {self.input_side}"
            )
        if tuple(model_input.value_range) != tuple(self.input_range):
            raise InvalidArgumentError(
                f"input range {model_input.value_range} does not match "
                f"backbone range {self.input_range}"
            )


# Per-patch statistics feeding the test backbone's random projections:
# mean and standard deviation of each of the three channels.
_N_PATCH_STATS = 6


class TestBackbone(Backbone):
    """Deterministic, hermetic feature extractor for tests and demos.

    The input square is split into an h x w grid of patches. Each patch
    contributes its per-channel mean and standard deviation (6 numbers);
    channel k of the output is tanh(w_k . stats + b_k) for (w_k, b_k) drawn
    once from a seeded Gaussian. Distinct solid-color inputs therefore map
    to distinct, linearly separable GAP vectors, while textured inputs
    produce spatially varying maps.
    """

    def __init__(self, seed: int, k: int, h: int, w: int,
                 input_side: int = DEFAULT_INPUT_SIDE):
        if min(seed, k, h, w) < 0 or min(k, h, w) < 1:
            raise InvalidArgumentError(
                "seed must be >= 0 and k, h, w must be positive"
            )
        self.seed = int(seed)
        self.identity = f"test:{seed}:{k}:{h}:{w}"
        self.input_side = input_side
        self.input_range = DEFAULT_INPUT_RANGE
        self.out_h, self.out_w, self.out_k = int(h), int(w), int(k)
        rng = np.random.default_rng(self.seed)
        self._projection = rng.normal(size=(self.out_k, _N_PATCH_STATS))
        self._offset = 0.25 * rng.normal(size=self.out_k)
        # Patch boundaries along each axis (h+1 and w+1 cut points).
        self._row_cuts = np.linspace(0, input_side, h + 1).round().astype(int)
        self._col_cuts = np.linspace(0, input_side, w + 1).round().astype(int)

    def extract(self, model_input: ModelInput) -> FeatureTensor:
        self._check_input(model_input)
        values = model_input.values
        stats = np.empty((self.out_h, self.out_w, _N_PATCH_STATS))
        for i in range(self.out_h):
            for j in range(self.out_w):
                patch = values[
                    self._row_cuts[i] : self._row_cuts[i + 1],
                    self._col_cuts[j] : self._col_cuts[j + 1],
                    :,
                ]
                stats[i, j, :3] = patch.mean(axis=(0, 1))
                stats[i, j, 3:] = patch.std(axis=(0, 1))
        pre = np.einsum("ijs,ks->kij", stats, self._projection)
        maps = np.tanh(pre + self._offset[:, None, None])
        return FeatureTensor.from_maps(maps)


def make_test_backbone(seed: int, k: int, h: int, w: int) -> TestBackbone:
    return TestBackbone(seed=seed, k=k, h=h, w=w)


def parse_test_descriptor(descriptor: str) -> TestBackbone:
    parts = descriptor.split(":")
    if len(parts) != 5 or parts[0] != "test":
        raise ModelLoadError(
            f"bad test-backbone descriptor {descriptor!r}; "
            "expected test:<seed>:<K>:<h>:<w>"
        )
    try:
        seed, k, h, w = (int(p) for p in parts[1:])
        return make_test_backbone(seed, k, h, w)
    except (ValueError, InvalidArgumentError) as exc:
        raise ModelLoadError(
            f"bad test-backbone descriptor {descriptor!r}: {exc}"
        ) from exc


def load_backbone(model_source: str) -> Backbone:
    """Load a backbone from a ``test:...`` descriptor or an ONNX file path."""
    if model_source.startswith("test:"):
        return parse_test_descriptor(model_source)
    from .onnx_exec import OnnxBackbone

    return OnnxBackbone.load(model_source)
