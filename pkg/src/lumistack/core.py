"""Shared containers for images, stacks, and per-pixel maps.

Images are float64 arrays of shape (H, W, C), C in {1, 3}, values in [0, 1].
Quantization to 8 bits happens only at I/O boundaries; everything in memory
keeps full precision. All containers are treated as immutable once built and
may be shared freely across worker threads.
"""

from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


class LumistackError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(LumistackError, ValueError):
    """Malformed or out-of-contract input."""


class CalibrationError(LumistackError):
    """Calibration table or fit problem."""


class CalibrationRangeError(CalibrationError):
    """Query outside the usable range of a calibration model."""


class NoRealImageError(LumistackError, ValueError):
    """Thin-lens configuration with no real image (object at or inside f')."""


def as_image(data):
    """Validate and normalize an array to image form (H, W, C) float64.

    Accepts (H, W) as shorthand for single-channel. Values must be finite
    and within [0, 1].
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise InvalidInputError(
            f"expected (H, W) or (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"empty image of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidInputError("image intensities must lie in [0, 1]")
    return np.ascontiguousarray(arr)


def to_luma(img):
    """Collapse an image to one channel with the Rec. 709 weights.

    Single-channel input is returned unchanged.
    """
    arr = as_image(img)
    if arr.shape[2] == 1:
        return arr
    w = np.asarray(LUMA_WEIGHTS)
    return np.ascontiguousarray((arr * w).sum(axis=2)[:, :, None])


@dataclass(frozen=True)
class CaptureMeta:
    """Per-image capture metadata: focal length plus at least one of the
    camera focus parameter (raw units) and the calibrated focus distance."""

    focal_length_m: float
    focus_param: float | None = None
    focus_distance_m: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.focal_length_m) and self.focal_length_m > 0):
            raise InvalidInputError(
                f"focal_length_m must be positive, got {self.focal_length_m}")
        if self.focus_param is None and self.focus_distance_m is None:
            raise InvalidInputError(
                "need focus_param or focus_distance_m in capture metadata")
        if self.focus_distance_m is not None:
            if not (np.isfinite(self.focus_distance_m)
                    and self.focus_distance_m > self.focal_length_m):
                raise InvalidInputError(
                    f"focus_distance_m must exceed the focal length, got "
                    f"{self.focus_distance_m}")


@dataclass(frozen=True)
class FocalStack:
    """Co-registered images of one scene focused at different distances.

    ``images`` has shape (K, H, W, C); ``meta[k]`` describes ``images[k]``.
    """

    images: np.ndarray
    meta: tuple[CaptureMeta, ...]

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[3] not in (1, 3):
            raise InvalidInputError(
                f"stack must be (K, H, W, 1|3), got {self.images.shape}")
        if self.images.shape[0] < 1:
            raise InvalidInputError("stack needs at least one image")
        if len(self.meta) != self.images.shape[0]:
            raise InvalidInputError(
                f"{self.images.shape[0]} images but {len(self.meta)} metadata "
                "entries")

    @classmethod
    def from_images(cls, images, meta):
        """Build a stack from a sequence of (H, W[, C]) arrays."""
        imgs = [as_image(im) for im in images]
        shapes = {im.shape for im in imgs}
        if len(shapes) > 1:
            raise InvalidInputError(f"image shapes differ: {sorted(shapes)}")
        return cls(np.ascontiguousarray(np.stack(imgs)), tuple(meta))

    @property
    def num_images(self):
        return self.images.shape[0]

    @property
    def height(self):
        return self.images.shape[1]

    @property
    def width(self):
        return self.images.shape[2]

    @property
    def channels(self):
        return self.images.shape[3]


@dataclass(frozen=True)
class FocusMap:
    """Per-pixel index (1-based) of the stack image in sharpest focus."""

    labels: np.ndarray
    num_labels: int

    def __post_init__(self):
        lab = self.labels
        if lab.ndim != 2 or not np.issubdtype(lab.dtype, np.integer):
            raise InvalidInputError("labels must be a 2D integer array")
        if self.num_labels < 1:
            raise InvalidInputError(f"num_labels must be >= 1, got "
                                    f"{self.num_labels}")
        if lab.size and (lab.min() < 1 or lab.max() > self.num_labels):
            raise InvalidInputError(
                f"labels must lie in [1, {self.num_labels}], got range "
                f"[{lab.min()}, {lab.max()}]")

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel metric depth in meters (positive, finite)."""

    depth_m: np.ndarray

    def __post_init__(self):
        d = self.depth_m
        if d.ndim != 2:
            raise InvalidInputError("depth map must be 2D")
        if not np.all(np.isfinite(d)) or (d.size and d.min() <= 0):
            raise InvalidInputError("depths must be positive and finite")

    @property
    def height(self):
        return self.depth_m.shape[0]

    @property
    def width(self):
        return self.depth_m.shape[1]
