"""Image plumbing: the float [0, 1] HxWx3 contract plus codec delegation."""
from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image


def as_float_image(arr: np.ndarray) -> np.ndarray:
    img = np.ascontiguousarray(arr, dtype=np.float32)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected HxWx3 image, got shape {arr.shape}")
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    return (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return as_float_image(arr.astype(np.float32) / 255.0)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load .npy (lossless float) or any Pillow-decodable raster file."""
    if str(path).endswith(".npy"):
        return as_float_image(np.load(path))
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    if str(path).endswith(".npy"):
        np.save(path, as_float_image(img))
    else:
        Image.fromarray(to_uint8(as_float_image(img))).save(path)


def decode_image_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(as_float_image(img))).save(buf, format="PNG")
    return buf.getvalue()


def encode_gray_png(mask: np.ndarray) -> bytes:
    """Encode an HxW binary/float array as an 8-bit grayscale PNG."""
    arr = (np.clip(np.asarray(mask, dtype=np.float32), 0, 1) * 255 + 0.5)
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def resize_image(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bicubic resize keeping the float [0, 1] contract."""
    from skimage.transform import resize

    out = resize(as_float_image(img), (height, width), order=3,
                 mode="reflect", anti_aliasing=False, preserve_range=True)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def crop(img: np.ndarray, bbox: tuple[int, int, int, int]) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    return img[y0:y1, x0:x1]
