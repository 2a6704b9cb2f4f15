"""Masked back-projection of focal-stack pixels into epipolar space.

Scene points trace lines in the (x, u) plane whose slope encodes depth; the
reference (farthest) plane traces vertical lines. Reconstruction paints the
farthest layer completely, then overwrites with each nearer layer's in-focus
pixels along its own slope, which reproduces occlusion ordering. The forward
model (averaging along sloped lines) turns a slab back into photographs and
doubles as the refocus kernel.

Slab file format (little-endian): magic ``LFSLAB1\\0``; uint32 X, Y, U, C;
float32 samples in (y, u, x, channel) order; uint32 trailer length; UTF-8
JSON trailer with slopes, depths, lens geometry, and the reference label.
"""

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _kernels
from .core import InvalidInputError, LumistackError
from .optics import LensGeometry

SLAB_MAGIC = b"LFSLAB1\x00"
DEFAULT_U_SAMPLES = 33


def round_half_up(values):
    """Integer splat positions: floor(v + 0.5), identical across backends
    (Python's round() would round halves to even)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(
        np.int32)


def u_offset_range(u_samples):
    if u_samples < 1 or u_samples % 2 == 0:
        raise InvalidInputError(
            f"u sample count must be odd and >= 1, got {u_samples}")
    half = (u_samples - 1) // 2
    return np.arange(-half, half + 1, dtype=np.int32)


@dataclass(frozen=True)
class PlanEntry:
    """One depth layer: the labels painted at this depth and their slope."""

    labels: tuple[int, ...]
    depth_m: float
    slope: float


@dataclass(frozen=True)
class LayerPlan:
    """Painting order for back-projection: farthest entry first, slope 0."""

    entries: tuple[PlanEntry, ...]
    geometry: LensGeometry
    aperture_scale: float

    def __post_init__(self):
        if not self.entries:
            raise InvalidInputError("layer plan has no entries")
        depths = [e.depth_m for e in self.entries]
        if any(d2 >= d1 for d1, d2 in zip(depths, depths[1:])):
            raise InvalidInputError(
                "plan entries must have strictly decreasing depth")
        if self.entries[0].slope != 0.0:
            raise InvalidInputError(
                f"background slope must be 0, got {self.entries[0].slope}")
        seen = set()
        for e in self.entries:
            for label in e.labels:
                if not isinstance(label, (int, np.integer)) or label < 1:
                    raise InvalidInputError(f"bad label {label!r}")
                if label in seen:
                    raise InvalidInputError(f"label {label} appears twice")
                seen.add(label)

    @property
    def labels(self):
        return tuple(l for e in self.entries for l in e.labels)

    @property
    def reference_label(self):
        return self.entries[0].labels[0]

    def entry_for(self, label):
        for e in self.entries:
            if label in e.labels:
                return e
        raise InvalidInputError(f"label {label} not in plan")

    def slope_for(self, label):
        return self.entry_for(label).slope

    def depth_for(self, label):
        return self.entry_for(label).depth_m


def slopes_from_depths(depths_by_label, focal_length_m, aperture_scale):
    """Build the painting plan from calibrated per-label depths.

    The farthest label becomes the reference plane (slope exactly 0);
    every other slope is the aperture-scaled tangent of its projection
    angle, negative for nearer layers. Labels at exactly equal depth are
    merged into one entry. ``depths_by_label`` maps label -> meters, or is
    a sequence where position k-1 holds label k's depth.
    """
    if isinstance(depths_by_label, Mapping):
        mapping = {int(k): float(v) for k, v in depths_by_label.items()}
    else:
        mapping = {k + 1: float(d) for k, d in enumerate(depths_by_label)}
    if not mapping:
        raise InvalidInputError("no label depths given")
    if any(k < 1 for k in mapping):
        raise InvalidInputError("labels must be >= 1")
    if not (np.isfinite(aperture_scale) and aperture_scale > 0):
        raise InvalidInputError(
            f"aperture scale must be positive, got {aperture_scale}")
    for k, d in mapping.items():
        if not (np.isfinite(d) and d > 0):
            raise InvalidInputError(f"label {k}: bad depth {d}")

    d_ref = max(mapping.values())
    geom = LensGeometry(focal_length_m, d_ref)
    den = 1.0 / geom.focal_length_m - 1.0 / d_ref
    by_depth = {}
    for label, d in sorted(mapping.items()):
        if d <= focal_length_m:
            raise InvalidInputError(
                f"label {label}: depth {d} m not beyond the focal length")
        by_depth.setdefault(d, []).append(label)
    entries = tuple(
        PlanEntry(tuple(labels), d,
                  aperture_scale * (1.0 / d_ref - 1.0 / d) / den)
        for d, labels in sorted(by_depth.items(), reverse=True))
    return LayerPlan(entries, geom, float(aperture_scale))


@dataclass(frozen=True)
class PaintProgram:
    """Flattened per-label paint ops in execution order (arrays sized O)."""

    src: np.ndarray       # image index per op
    masked: np.ndarray    # 0 for the full background fill
    shift: np.ndarray     # (O, U) integer x-translations
    label: np.ndarray     # label painted by each op


def build_paint_program(plan, u_offsets):
    src, masked, label, shifts = [], [], [], []
    for e_idx, entry in enumerate(plan.entries):
        for l_idx, lab in enumerate(entry.labels):
            src.append(lab - 1)
            masked.append(0 if (e_idx == 0 and l_idx == 0) else 1)
            label.append(lab)
            shifts.append(round_half_up(entry.slope * u_offsets))
    return PaintProgram(np.asarray(src, np.int32),
                        np.asarray(masked, np.uint8),
                        np.asarray(shifts, np.int32),
                        np.asarray(label, np.int32))


@dataclass(frozen=True)
class EpipolarImage:
    """One scanline's (x, u) slice: data (U, X, C), u=0 row in the middle."""

    data: np.ndarray
    u_offsets: np.ndarray
    written: np.ndarray       # (U, X) bool
    provenance: np.ndarray    # (U, X) label that painted each cell

    def __post_init__(self):
        u, x = self.data.shape[:2]
        if u % 2 == 0:
            raise InvalidInputError(f"u sample count must be odd, got {u}")
        if self.u_offsets.shape != (u,) or self.written.shape != (u, x) \
                or self.provenance.shape != (u, x):
            raise InvalidInputError("inconsistent epipolar image arrays")

    @property
    def num_u(self):
        return self.data.shape[0]

    @property
    def x_len(self):
        return self.data.shape[1]


def _check_masks_partition(masks):
    counts = masks.sum(axis=0)
    if counts.min() < 1 or counts.max() > 1:
        raise InvalidInputError(
            "in-focus masks must partition the pixels (each pixel in "
            "exactly one mask)")


def backproject_row(rows, masks, plan, u_samples=DEFAULT_U_SAMPLES):
    """Reconstruct one scanline's epipolar image from stack rows.

    ``rows`` is (K, X[, C]) image data indexed by label-1; ``masks`` is the
    (K, X) in-focus partition. The background mask is ignored (that layer
    paints every pixel).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 2:
        rows = rows[:, :, None]
    if rows.ndim != 3:
        raise InvalidInputError(f"rows must be (K, X[, C]), got {rows.shape}")
    masks = np.asarray(masks)
    if masks.shape != rows.shape[:2]:
        raise InvalidInputError(
            f"mask shape {masks.shape} does not match rows "
            f"{rows.shape[:2]}")
    labels = plan.labels
    if rows.shape[0] != len(labels) or max(labels) > rows.shape[0]:
        raise InvalidInputError(
            f"plan covers labels {sorted(labels)} but {rows.shape[0]} rows "
            "given")
    _check_masks_partition(masks)

    u_offsets = u_offset_range(u_samples)
    program = build_paint_program(plan, u_offsets)
    k, x_len, channels = rows.shape
    images = np.ascontiguousarray(rows[:, None, :, :])       # (K, 1, X, C)
    op_masks = np.zeros((len(program.label), 1, x_len), dtype=np.uint8)
    for o, lab in enumerate(program.label):
        if program.masked[o]:
            op_masks[o, 0] = masks[lab - 1]
    data = np.empty((1, u_samples, x_len, channels))
    written = np.zeros((1, u_samples, x_len), dtype=np.uint8)
    prov = np.full((1, u_samples, x_len), -1, dtype=np.int16)
    _kernels.paint_rows(images, op_masks, program.src, program.masked,
                        program.shift, data, written, prov, 0, 1)
    assert written.all(), "background fill must cover every cell"
    prov_labels = program.label.astype(np.int16)[prov[0]]
    return EpipolarImage(data[0], u_offsets, written[0].astype(bool),
                         prov_labels)


@dataclass(frozen=True)
class LightFieldSlab:
    """The reconstructed LF(x, y, u, 0) volume plus its painting plan.

    ``data`` is (Y, U, X, C) float64; ``provenance`` records the label that
    painted each cell (None for slabs loaded from disk).
    """

    data: np.ndarray
    u_offsets: np.ndarray
    plan: LayerPlan
    provenance: np.ndarray | None = None

    def __post_init__(self):
        if self.data.ndim != 4:
            raise InvalidInputError(
                f"slab data must be (Y, U, X, C), got {self.data.shape}")
        u = self.data.shape[1]
        if u % 2 == 0:
            raise InvalidInputError(f"u sample count must be odd, got {u}")
        if self.u_offsets.shape != (u,):
            raise InvalidInputError("u_offsets inconsistent with data")
        if self.provenance is not None \
                and self.provenance.shape != self.data.shape[:3]:
            raise InvalidInputError("provenance inconsistent with data")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def num_u(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def channels(self):
        return self.data.shape[3]

    @property
    def u_min(self):
        return int(self.u_offsets[0])

    @property
    def u_max(self):
        return int(self.u_offsets[-1])

    def u_index(self, u0):
        if not self.u_min <= u0 <= self.u_max:
            raise InvalidInputError(
                f"u={u0} outside [{self.u_min}, {self.u_max}]")
        return int(u0) - self.u_min


def _row_spans(height, workers):
    bounds = np.linspace(0, height, max(1, workers) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_rows(fn, height, workers):
    spans = _row_spans(height, workers)
    if len(spans) == 1:
        fn(*spans[0])
        return
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        for fut in [pool.submit(fn, a, b) for a, b in spans]:
            fut.result()


def reconstruct_slab(stack, fm, depths_by_label, aperture_scale,
                     u_samples=DEFAULT_U_SAMPLES, workers=1):
    """Back-project the whole stack into the LF(x, y, u, 0) slab.

    ``depths_by_label`` maps each focus-map label to its calibrated depth
    (a DepthMap is a pure function of it). Scanlines are independent;
    ``workers`` threads split them (the compiled kernels release the GIL).
    """
    if fm.labels.shape != (stack.height, stack.width):
        raise InvalidInputError("focus map does not match stack dimensions")
    if fm.num_labels != stack.num_images:
        raise InvalidInputError(
            f"focus map has {fm.num_labels} labels for {stack.num_images} "
            "images")
    focals = {m.focal_length_m for m in stack.meta}
    if len(focals) > 1:
        raise InvalidInputError(
            f"stack images disagree on focal length: {sorted(focals)}")

    plan = slopes_from_depths(depths_by_label, focals.pop(), aperture_scale)
    if sorted(plan.labels) != list(range(1, stack.num_images + 1)):
        raise InvalidInputError(
            "label depths must cover every stack image exactly once")
    u_offsets = u_offset_range(u_samples)
    program = build_paint_program(plan, u_offsets)

    height, width = stack.height, stack.width
    op_masks = np.zeros((len(program.label), height, width), dtype=np.uint8)
    for o, lab in enumerate(program.label):
        if program.masked[o]:
            op_masks[o] = fm.labels == lab
    images = np.ascontiguousarray(stack.images)
    data = np.empty((height, u_samples, width, stack.channels))
    written = np.zeros((height, u_samples, width), dtype=np.uint8)
    prov = np.full((height, u_samples, width), -1, dtype=np.int16)

    _run_rows(
        lambda y0, y1: _kernels.paint_rows(images, op_masks, program.src,
                                           program.masked, program.shift,
                                           data, written, prov, y0, y1),
        height, workers)
    assert written.all(), "background fill must cover every cell"
    prov_labels = program.label.astype(np.int16)[prov]
    return LightFieldSlab(data, u_offsets, plan, prov_labels)


def _fill_empty_columns(out):
    """Replace all-NaN columns (no in-range sample) with the nearest valid
    column; ties resolve to the left."""
    bad = np.isnan(out[0, :, 0])
    if not bad.any():
        return out
    good = np.flatnonzero(~bad)
    if good.size == 0:
        raise LumistackError("projection line misses the slab everywhere")
    bad_idx = np.flatnonzero(bad)
    pos = np.searchsorted(good, bad_idx)
    left = good[np.clip(pos - 1, 0, good.size - 1)]
    right = good[np.clip(pos, 0, good.size - 1)]
    nearest = np.where(np.abs(bad_idx - left) <= np.abs(right - bad_idx),
                       left, right)
    out[:, bad_idx] = out[:, nearest]
    return out


def integrate_slab(data, u_offsets, slope, workers=1):
    """Average a (Y, U, X, C) volume along lines of the given slope."""
    height, _, width, channels = data.shape
    out = np.empty((height, width, channels))
    src = np.ascontiguousarray(data)
    offs = np.ascontiguousarray(u_offsets, dtype=np.int32)
    _run_rows(
        lambda y0, y1: _kernels.integrate_rows(src, offs, float(slope), out,
                                               y0, y1),
        height, workers)
    return _fill_empty_columns(out)


def forward_project(epi, slope):
    """One scanline of the forward model: photograph row from an epipolar
    image at the given integration slope."""
    return integrate_slab(epi.data[None], epi.u_offsets, slope)[0]


@dataclass(frozen=True)
class SyntheticScene:
    """Ground-truth scene: a plan plus per-label textures and the visibility
    partition at u = 0. ``textures`` is (K, H, W, C), ``masks`` (K, H, W)."""

    plan: LayerPlan
    textures: np.ndarray
    masks: np.ndarray

    def __post_init__(self):
        if self.textures.ndim != 4 or self.masks.ndim != 3:
            raise InvalidInputError("textures must be (K, H, W, C), masks "
                                    "(K, H, W)")
        if self.textures.shape[:3] != self.masks.shape:
            raise InvalidInputError("textures and masks disagree in shape")
        if sorted(self.plan.labels) != list(
                range(1, self.textures.shape[0] + 1)):
            raise InvalidInputError(
                "plan labels must be 1..K matching the texture count")
        _check_masks_partition(self.masks)


def synthesize_stack(scene, u_samples=DEFAULT_U_SAMPLES, workers=1):
    """Render a focal stack from a known scene, plus its ground truth.

    Paints the true light-field slab from the per-label textures, then
    integrates it at each label's slope to produce that label's photograph
    (sharp where the label is in focus, parallax-blurred elsewhere).
    Returns (stack, truth) where truth is the painted LightFieldSlab.
    """
    from .core import CaptureMeta, FocalStack      # cycle-free local import

    k, height, width, channels = scene.textures.shape
    u_offsets = u_offset_range(u_samples)
    program = build_paint_program(scene.plan, u_offsets)
    op_masks = np.zeros((len(program.label), height, width), dtype=np.uint8)
    for o, lab in enumerate(program.label):
        if program.masked[o]:
            op_masks[o] = scene.masks[lab - 1]
    textures = np.ascontiguousarray(scene.textures, dtype=np.float64)
    data = np.empty((height, u_samples, width, channels))
    written = np.zeros((height, u_samples, width), dtype=np.uint8)
    prov = np.full((height, u_samples, width), -1, dtype=np.int16)
    _run_rows(
        lambda y0, y1: _kernels.paint_rows(textures, op_masks, program.src,
                                           program.masked, program.shift,
                                           data, written, prov, y0, y1),
        height, workers)
    assert written.all()
    truth = LightFieldSlab(data, u_offsets, scene.plan,
                           program.label.astype(np.int16)[prov])

    images = []
    metas = []
    for label in range(1, k + 1):
        img = integrate_slab(truth.data, u_offsets,
                             scene.plan.slope_for(label), workers)
        images.append(np.clip(img, 0.0, 1.0))
        metas.append(CaptureMeta(
            focal_length_m=scene.plan.geometry.focal_length_m,
            focus_distance_m=scene.plan.depth_for(label)))
    return FocalStack(np.ascontiguousarray(np.stack(images)),
                      tuple(metas)), truth


def save_slab(slab, path):
    """Write the binary slab format; see the module docstring."""
    height, num_u, width, channels = slab.data.shape
    plan = slab.plan
    meta = {
        "aperture_scale": plan.aperture_scale,
        "depths_m": {str(l): e.depth_m for e in plan.entries
                     for l in e.labels},
        "focal_length_m": plan.geometry.focal_length_m,
        "reference_distance_m": plan.geometry.reference_distance_m,
        "reference_label": plan.reference_label,
        "slopes": {str(l): e.slope for e in plan.entries for l in e.labels},
    }
    payload = json.dumps(meta, sort_keys=True,
                         separators=(",", ":")).encode("utf-8")
    blob = b"".join([
        SLAB_MAGIC,
        struct.pack("<4I", width, height, num_u, channels),
        slab.data.astype("<f4").tobytes(),
        struct.pack("<I", len(payload)),
        payload,
    ])
    Path(path).write_bytes(blob)


def load_slab(path):
    """Read a slab file back; provenance is not stored on disk."""
    blob = Path(path).read_bytes()
    if len(blob) < len(SLAB_MAGIC) + 16 or not blob.startswith(SLAB_MAGIC):
        raise InvalidInputError(f"{path}: not a slab file")
    off = len(SLAB_MAGIC)
    width, height, num_u, channels = struct.unpack_from("<4I", blob, off)
    off += 16
    if num_u % 2 == 0 or num_u == 0 or channels not in (1, 3) \
            or width == 0 or height == 0:
        raise InvalidInputError(f"{path}: implausible slab dimensions "
                                f"{(width, height, num_u, channels)}")
    count = height * num_u * width * channels
    end = off + 4 * count
    if len(blob) < end + 4:
        raise InvalidInputError(f"{path}: truncated slab data")
    data = np.frombuffer(blob[off:end], dtype="<f4").reshape(
        height, num_u, width, channels).astype(np.float64)
    (meta_len,) = struct.unpack_from("<I", blob, end)
    meta_start = end + 4
    if len(blob) != meta_start + meta_len:
        raise InvalidInputError(f"{path}: bad trailer length")
    try:
        meta = json.loads(blob[meta_start:].decode("utf-8"))
        depths = {int(k): float(v) for k, v in meta["depths_m"].items()}
        slopes = {int(k): float(v) for k, v in meta["slopes"].items()}
        geom = LensGeometry(float(meta["focal_length_m"]),
                            float(meta["reference_distance_m"]))
        aperture = float(meta["aperture_scale"])
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"{path}: bad slab trailer: {exc}") from exc

    by_depth = {}
    for label in sorted(depths):
        by_depth.setdefault(depths[label], []).append(label)
    entries = tuple(
        PlanEntry(tuple(labels), d, slopes[labels[0]])
        for d, labels in sorted(by_depth.items(), reverse=True))
    plan = LayerPlan(entries, geom, aperture)
    return LightFieldSlab(data, u_offset_range(num_u), plan)
