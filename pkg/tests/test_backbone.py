"""Frame preprocessing and the deterministic test feature extractor."""

import numpy as np
import pytest

from salient_teach import (
    FeatureTensor,
    Frame,
    ModelInput,
    TrainConfig,
    crop_box,
    load_backbone,
    make_test_backbone,
    preprocess,
    train,
)
from salient_teach.errors import InvalidArgumentError, ModelLoadError

from conftest import solid_frame


# -- Frame ---------------------------------------------------------------------

def test_frame_checks_buffer_shape():
    with pytest.raises(InvalidArgumentError):
        Frame(width=4, height=4, pixels=np.zeros((4, 3, 3), np.uint8),
              timestamp_ms=0)
    with pytest.raises(InvalidArgumentError):
        Frame(width=0, height=4, pixels=np.zeros((4, 0, 3), np.uint8),
              timestamp_ms=0)
    with pytest.raises(InvalidArgumentError):
        Frame.from_array(np.zeros((4, 4, 3), np.float32))


# -- crop and preprocess ---------------------------------------------------------

def test_crop_box_landscape():
    assert crop_box(640, 480) == (80, 0, 480)


def test_crop_box_portrait_and_square():
    assert crop_box(480, 640) == (0, 80, 480)
    assert crop_box(224, 224) == (0, 0, 224)
    assert crop_box(101, 100) == (0, 0, 100)  # offset rounds down


def test_preprocess_output_shape_and_range():
    rng = np.random.default_rng(3)
    frame = Frame.from_array(
        rng.integers(0, 256, size=(480, 640, 3), dtype=np.uint8)
    )
    out = preprocess(frame)
    assert out.side == 224
    assert out.values.shape == (224, 224, 3)
    assert out.values.min() >= -1.0 and out.values.max() <= 1.0


def test_preprocess_square_frame_is_pure_range_scaling():
    rng = np.random.default_rng(4)
    pixels = rng.integers(0, 256, size=(224, 224, 3), dtype=np.uint8)
    out = preprocess(Frame.from_array(pixels))
    np.testing.assert_allclose(out.values, pixels / 127.5 - 1.0,
                               rtol=0, atol=1e-12)


def test_preprocess_black_frame_maps_to_minus_one():
    out = preprocess(solid_frame(0, 0, 0, width=64, height=48))
    np.testing.assert_array_equal(out.values, np.full((224, 224, 3), -1.0))


def test_preprocess_white_frame_maps_to_plus_one():
    out = preprocess(solid_frame(255, 255, 255, width=33, height=57))
    np.testing.assert_allclose(out.values, np.ones((224, 224, 3)),
                               rtol=0, atol=1e-12)


def test_preprocess_crops_center_square():
    # left half black, right half white on a 2:1 frame: the center crop
    # straddles the boundary, so both extremes must survive
    pixels = np.zeros((100, 200, 3), np.uint8)
    pixels[:, 100:, :] = 255
    out = preprocess(Frame.from_array(pixels))
    assert out.values.min() == -1.0
    assert out.values.max() == 1.0


def test_preprocess_custom_range():
    out = preprocess(solid_frame(255, 255, 255, 10, 10), side=8,
                     value_range=(0.0, 1.0))
    np.testing.assert_allclose(out.values, np.ones((8, 8, 3)),
                               rtol=0, atol=1e-12)


# -- FeatureTensor ----------------------------------------------------------------

def test_feature_tensor_recomputes_gap():
    maps = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    ft = FeatureTensor.from_maps(maps)
    np.testing.assert_allclose(
        ft.gap, maps.astype(np.float64).mean(axis=(1, 2)), rtol=0, atol=0
    )
    assert ft.k == 2 and ft.h == 3 and ft.w == 4


def test_feature_tensor_gap_consistency(tiny_backbone):
    rng = np.random.default_rng(11)
    for _ in range(10):
        frame = Frame.from_array(
            rng.integers(0, 256, size=(60, 80, 3), dtype=np.uint8)
        )
        ft = tiny_backbone.extract_frame(frame)
        for k in range(ft.k):
            assert abs(ft.gap[k] - ft.maps[k].astype(np.float64).mean()) <= 1e-5


# -- test backbone ------------------------------------------------------------------

def test_descriptor_round_trip():
    backbone = load_backbone("test:42:8:4:4")
    assert backbone.identity == "test:42:8:4:4"
    assert (backbone.out_k, backbone.out_h, backbone.out_w) == (8, 4, 4)
    assert backbone.input_side == 224


@pytest.mark.parametrize("bad", [
    "test:", "test:1:2:3", "test:a:8:4:4", "test:1:0:4:4", "test:1:8:4:-1",
])
def test_descriptor_rejects_malformed(bad):
    with pytest.raises(ModelLoadError):
        load_backbone(bad)


def test_load_backbone_missing_file():
    with pytest.raises(ModelLoadError) as excinfo:
        load_backbone("/nonexistent/model.onnx")
    assert "/nonexistent/model.onnx" in str(excinfo.value)


def test_extract_is_deterministic(tiny_backbone):
    frame = solid_frame(120, 45, 200)
    a = tiny_backbone.extract_frame(frame)
    b = tiny_backbone.extract_frame(frame)
    np.testing.assert_array_equal(a.maps, b.maps)
    np.testing.assert_array_equal(a.gap, b.gap)


def test_same_seed_same_function():
    x, y = make_test_backbone(1, 8, 4, 4), make_test_backbone(1, 8, 4, 4)
    frame = solid_frame(10, 200, 30)
    np.testing.assert_array_equal(
        x.extract_frame(frame).maps, y.extract_frame(frame).maps
    )


def test_different_seeds_differ_somewhere():
    x, y = make_test_backbone(1, 8, 4, 4), make_test_backbone(2, 8, 4, 4)
    frame = solid_frame(10, 200, 30)
    assert not np.array_equal(
        x.extract_frame(frame).maps, y.extract_frame(frame).maps
    )


def test_extract_rejects_mismatched_input(tiny_backbone):
    bad = ModelInput(side=16, values=np.zeros((16, 16, 3)),
                     value_range=(-1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        tiny_backbone.extract(bad)


def test_solid_colors_are_linearly_separable(tiny_backbone):
    frames = {
        0: solid_frame(220, 30, 30),
        1: solid_frame(30, 220, 30),
        2: solid_frame(30, 30, 220),
    }
    gaps, labels = [], []
    for label, frame in frames.items():
        gaps.append(tiny_backbone.extract_frame(frame).gap)
        labels.append(label)
    head, report = train(
        np.array(gaps), np.array(labels), 3,
        TrainConfig(epochs=200), seed=0,
    )
    assert report.final_accuracy == 1.0
