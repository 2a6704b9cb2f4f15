"""PNG encode/decode with fixed quantization rules.

Images quantize as floor(v * 255 + 0.5) after clipping to [0, 1] (renders
can carry +/- 1 ulp of rounding noise outside the range). Label maps store
raw label values in 8-bit grayscale; depth maps store millimeters in 16-bit
grayscale. Encoding the same array always yields the same bytes.
"""

import io

import numpy as np
from PIL import Image

from .core import InvalidInputError

DEPTH_MM_MAX = 65535


def _quantize(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise InvalidInputError(
            f"image must be (H, W) or (H, W, 1|3), got {img.shape}")
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return q[:, :, 0] if q.shape[2] == 1 else q


def image_to_png_bytes(img):
    q = _quantize(img)
    buf = io.BytesIO()
    Image.fromarray(q, mode="L" if q.ndim == 2 else "RGB").save(
        buf, format="PNG")
    return buf.getvalue()


def write_image_png(path, img):
    data = image_to_png_bytes(img)
    with open(path, "wb") as fh:
        fh.write(data)


def read_image_png(path):
    """Load any 8-bit PNG back to float (H, W, C) in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return np.ascontiguousarray(arr)


def labels_to_png_bytes(labels):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InvalidInputError(f"label map must be 2-D, got {labels.shape}")
    if labels.min() < 1 or labels.max() > 255:
        raise InvalidInputError(
            f"labels must be in [1, 255] for 8-bit storage, got "
            f"[{labels.min()}, {labels.max()}]")
    buf = io.BytesIO()
    Image.fromarray(labels.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def write_labels_png(path, labels):
    with open(path, "wb") as fh:
        fh.write(labels_to_png_bytes(labels))


def read_labels_png(path):
    with Image.open(path) as im:
        if im.mode != "L":
            raise InvalidInputError(f"{path}: label map must be 8-bit "
                                    f"grayscale, got mode {im.mode}")
        labels = np.asarray(im, dtype=np.int64)
    if labels.min() < 1:
        raise InvalidInputError(f"{path}: label 0 present; labels start at 1")
    return labels


def depth_to_png_bytes(depth_m):
    """16-bit grayscale, integer millimeters, clipped at 65.535 m."""
    depth_m = np.asarray(depth_m, dtype=np.float64)
    if depth_m.ndim != 2:
        raise InvalidInputError(f"depth map must be 2-D, got {depth_m.shape}")
    mm = np.floor(depth_m * 1000.0 + 0.5)
    mm = np.clip(mm, 0, DEPTH_MM_MAX).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(mm).save(buf, format="PNG")     # uint16 -> mode I;16
    return buf.getvalue()


def write_depth_png(path, depth_m):
    with open(path, "wb") as fh:
        fh.write(depth_to_png_bytes(depth_m))


def read_depth_png(path):
    """Millimeter PNG back to meters (float)."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype not in (np.uint16, np.int32):
        raise InvalidInputError(f"{path}: expected 16-bit depth PNG, got "
                                f"{arr.dtype}")
    return arr.astype(np.float64) / 1000.0
