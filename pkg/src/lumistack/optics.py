"""Thin-lens geometry, focus-parameter calibration, and resolution analysis.

Calibration maps the camera's raw focus parameter F to an object distance D
through a line fitted in reciprocal space, 1/D = a*F + b. The fit minimizes
*relative* residuals (weights 1/y^2): the tabulated distances span two
orders of magnitude and a uniform fit would let the near rows dominate,
blowing up the far-field prediction by hundreds of percent.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (CalibrationError, CalibrationRangeError, DepthMap,
                   InvalidInputError, NoRealImageError)


@dataclass(frozen=True)
class CalibrationTable:
    """Measured rows of (focus_param, nearest sharp distance, farthest)."""

    rows: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.rows) < 1:
            raise InvalidInputError("calibration table is empty")
        params = [r[0] for r in self.rows]
        for f, near, far in self.rows:
            if not all(map(math.isfinite, (f, near, far))):
                raise InvalidInputError("non-finite calibration row")
            if near <= 0 or not near < far:
                raise InvalidInputError(
                    f"need 0 < near < far, got ({near}, {far})")
        diffs = np.diff(params)
        if len(params) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise CalibrationError(
                "focus parameters must be strictly monotone across rows")

    @classmethod
    def from_text(cls, text):
        """Parse `focus_param,near_m,far_m` lines; one optional header."""
        rows = []
        may_be_header = True
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise InvalidInputError(
                    f"line {lineno}: expected 3 comma-separated fields, "
                    f"got {len(parts)}")
            try:
                rows.append(tuple(float(p) for p in parts))
            except ValueError:
                if may_be_header:
                    may_be_header = False
                    continue
                raise InvalidInputError(
                    f"line {lineno}: cannot parse {line!r}") from None
            may_be_header = False
        if not rows:
            raise InvalidInputError("no data rows found")
        return cls(tuple(rows))

    def midpoints(self):
        return np.array([0.5 * (near + far) for _, near, far in self.rows])

    def params(self):
        return np.array([f for f, _, _ in self.rows])


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted line 1/D = a*F + b with its usable F range and fit quality."""

    a: float
    b: float
    param_range: tuple[float, float]
    r_squared: float

    def __post_init__(self):
        lo, hi = self.param_range
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise CalibrationError("non-finite fit coefficients")
        if self.a == 0.0:
            raise CalibrationError(
                "flat fit: predicted distance not monotone in focus parameter")
        if self.a * lo + self.b <= 0 or self.a * hi + self.b <= 0:
            raise CalibrationError(
                "fitted line predicts non-positive 1/D inside the validity "
                "range")


def fit_focus_curve(table, last_row_weight=0.25):
    """Weighted least squares of 1/midpoint against the focus parameter.

    Row weights are 1/y^2 (relative error in reciprocal distance); the final
    table row is additionally scaled by ``last_row_weight`` since very far
    rows carry wide, uncertain intervals. R^2 reported is that of the
    weighted regression.
    """
    if len(table.rows) < 2:
        raise CalibrationError("need at least 2 rows to fit")
    if last_row_weight <= 0:
        raise InvalidInputError(
            f"last_row_weight must be positive, got {last_row_weight}")
    x = table.params()
    y = 1.0 / table.midpoints()
    w = 1.0 / y ** 2
    w[-1] *= last_row_weight

    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise CalibrationError("degenerate fit: all focus parameters equal")
    a = (w * (x - xm) * (y - ym)).sum() / sxx
    b = ym - a * xm

    ss_res = (w * (y - (a * x + b)) ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return CalibrationModel(float(a), float(b),
                            (float(x.min()), float(x.max())), float(r2))


def focus_param_to_depth(model, focus_param):
    """Predicted object distance in meters for a raw focus parameter.

    Queries outside the fitted range are clamped (with a warning) rather
    than extrapolated.
    """
    lo, hi = model.param_range
    f = focus_param
    if f < lo or f > hi:
        warnings.warn(
            f"focus parameter {f} outside calibrated range [{lo}, {hi}]; "
            "clamping", stacklevel=2)
        f = min(max(f, lo), hi)
    denom = model.a * f + model.b
    if denom <= 0:
        raise CalibrationRangeError(
            f"model predicts non-positive 1/D at focus parameter {f}")
    return 1.0 / denom


def thin_lens_image_distance(focal_length_m, object_distance_m):
    """Sensor-side conjugate distance for an object at the given distance.

    Distances are positive magnitudes; the object must sit beyond f'.
    """
    if not (math.isfinite(focal_length_m) and focal_length_m > 0):
        raise InvalidInputError(
            f"focal length must be positive, got {focal_length_m}")
    if not (math.isfinite(object_distance_m)
            and object_distance_m > focal_length_m):
        raise NoRealImageError(
            f"object at {object_distance_m} m is not beyond the focal "
            f"length {focal_length_m} m; no real image forms")
    return object_distance_m * focal_length_m / (object_distance_m
                                                 - focal_length_m)


@dataclass(frozen=True)
class LensGeometry:
    """Focal length and the reference focus distance, both in meters."""

    focal_length_m: float
    reference_distance_m: float

    def __post_init__(self):
        if not (0 < self.focal_length_m < self.reference_distance_m
                and math.isfinite(self.reference_distance_m)):
            raise InvalidInputError(
                f"need 0 < f' < D_ref, got f'={self.focal_length_m}, "
                f"D_ref={self.reference_distance_m}")


def projection_angle(object_distance_m, geom):
    """Epipolar-line angle for a point at the given depth.

    Zero at the reference distance, negative nearer, positive farther,
    bounded above by the far-field limit.
    """
    if not (math.isfinite(object_distance_m)
            and object_distance_m > geom.focal_length_m):
        raise NoRealImageError(
            f"object distance {object_distance_m} m must exceed the focal "
            f"length {geom.focal_length_m} m")
    num = 1.0 / geom.reference_distance_m - 1.0 / object_distance_m
    den = 1.0 / geom.focal_length_m - 1.0 / geom.reference_distance_m
    return math.atan(num / den)


def refocus_resolution(spatial_res, angular_res, alpha):
    """Effective sample count of a refocused photograph.

    Two regimes split at alpha* = X/(X + Theta): above it the spatial
    resolution limits, below it the angular resolution does. The branches
    agree at alpha*.
    """
    if not (np.isfinite(spatial_res) and spatial_res > 0
            and np.isfinite(angular_res) and angular_res > 0):
        raise InvalidInputError("resolutions must be positive and finite")
    if not (np.isfinite(alpha) and 0 < alpha <= 1):
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    boundary = spatial_res / (spatial_res + angular_res)
    if alpha >= boundary:
        ratio = (1.0 - alpha) / alpha
        return spatial_res * math.sqrt(1.0 + ratio * ratio)
    ratio = alpha / (1.0 - alpha)
    return angular_res * math.sqrt(1.0 + ratio * ratio)


def resolve_depths(metas, model=None):
    """Focus distance in meters for every stack image.

    Prefers explicit metadata distances; falls back to the calibration
    model applied to the raw focus parameter.
    """
    depths = []
    for k, meta in enumerate(metas):
        if meta.focus_distance_m is not None:
            depths.append(float(meta.focus_distance_m))
        elif meta.focus_param is not None and model is not None:
            depths.append(focus_param_to_depth(model, meta.focus_param))
        else:
            raise CalibrationError(
                f"image {k}: focus_param given but no calibration model to "
                "convert it")
    return tuple(depths)


def focus_map_to_depth_map(fm, metas, model=None):
    """Quantized per-pixel depth: each label takes its image's distance."""
    if len(metas) != fm.num_labels:
        raise InvalidInputError(
            f"{fm.num_labels} labels but {len(metas)} metadata entries")
    depths = np.asarray(resolve_depths(metas, model))
    return DepthMap(depths[fm.labels - 1])
