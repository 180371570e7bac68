"""PNG and base64 codecs for images and masks.

Masks travel as single-channel 8-bit PNGs with values strictly in {0, 255};
uploads with any other gray level are rejected rather than thresholded.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import ValidationFailure
from .model import BinaryMask, RasterImage


def image_to_png_bytes(image: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def image_from_png_bytes(data: bytes) -> RasterImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise ValidationFailure(f"not a decodable image: {exc}") from exc
    return RasterImage(arr)


def mask_to_png_bytes(mask: BinaryMask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(mask.bits * np.uint8(255), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes) -> BinaryMask:
    try:
        with Image.open(io.BytesIO(data)) as im:
            gray = im.convert("L")
            arr = np.asarray(gray, dtype=np.uint8)
    except Exception as exc:
        raise ValidationFailure(f"not a decodable mask image: {exc}") from exc
    if not np.isin(arr, (0, 255)).all():
        raise ValidationFailure("mask PNG must contain only 0 and 255 values")
    return BinaryMask((arr == 255).astype(np.uint8))


def image_to_b64(image: RasterImage) -> str:
    return base64.b64encode(image_to_png_bytes(image)).decode("ascii")


def image_from_b64(text: str) -> RasterImage:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise ValidationFailure(f"bad base64 image payload: {exc}") from exc
    return image_from_png_bytes(raw)


def mask_to_b64(mask: BinaryMask) -> str:
    return base64.b64encode(mask_to_png_bytes(mask)).decode("ascii")


def mask_from_b64(text: str) -> BinaryMask:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise ValidationFailure(f"bad base64 mask payload: {exc}") from exc
    return mask_from_png_bytes(raw)
