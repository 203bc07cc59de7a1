"""PNG/JPEG decoding and encoding between image files and Frames."""

import base64
import binascii
from io import BytesIO

import numpy as np
from PIL import Image

from .backbone import Frame
from .errors import InvalidArgumentError


def frame_from_image_bytes(data: bytes, timestamp_ms: int = 0) -> Frame:
    try:
        img = Image.open(BytesIO(data))
        img.load()
    except Exception as exc:
        raise InvalidArgumentError(f"cannot decode image: {exc}") from exc
    rgb = img.convert("RGB")
    return Frame.from_array(np.asarray(rgb, dtype=np.uint8), timestamp_ms)


def frame_from_image_file(path: str, timestamp_ms: int = 0) -> Frame:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read image {path}: {exc}") from exc
    return frame_from_image_bytes(data, timestamp_ms)


def frame_from_b64(text: str, timestamp_ms: int = 0) -> Frame:
    try:
        data = base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError, AttributeError) as exc:
        raise InvalidArgumentError(f"bad base64 image payload: {exc}") from exc
    return frame_from_image_bytes(data, timestamp_ms)


def frame_to_png_b64(frame: Frame) -> str:
    """Inverse of :func:`frame_from_b64`; used by scripted protocol clients."""
    buf = BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def save_png(pixels: np.ndarray, path: str) -> None:
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB").save(
        path, format="PNG"
    )
