"""Renders derived from a reconstructed slab.

All outputs are plain (H, W, C) float arrays in [0, 1] up to rounding noise;
encoding to files happens in :mod:`lumistack.pngio`.
"""

import numpy as np

from .core import InvalidInputError
from .tomography import integrate_slab, round_half_up


def view_at(slab, u0):
    """The synthetic pinhole photograph at integer aperture position u0."""
    j = slab.u_index(u0)
    return np.ascontiguousarray(slab.data[:, j])


def extended_focus(slab):
    """The all-in-focus image: the u = 0 slice, where every layer was
    painted unshifted."""
    return view_at(slab, 0)


def refocus(slab, slope, workers=1):
    """Average the slab along lines of the given slope: the synthetic
    photograph focused at whatever depth maps to that slope."""
    if not np.isfinite(slope):
        raise InvalidInputError(f"slope must be finite, got {slope}")
    return integrate_slab(slab.data, slab.u_offsets, float(slope), workers)


def refocus_at_depth(slab, depth_m, workers=1):
    """Refocus at a metric depth using the slab's own lens geometry."""
    geom = slab.plan.geometry
    if not (np.isfinite(depth_m) and depth_m > geom.focal_length_m):
        raise InvalidInputError(
            f"depth {depth_m} m must be finite and beyond the focal length")
    den = 1.0 / geom.focal_length_m - 1.0 / geom.reference_distance_m
    slope = slab.plan.aperture_scale * (
        1.0 / geom.reference_distance_m - 1.0 / depth_m) / den
    return refocus(slab, slope, workers), slope


def refocus_at_point(slab, fm, click, workers=1):
    """Click-to-focus: look up the label under (x, y), refocus at that
    label's depth. Returns (image, chosen_depth_m)."""
    x, y = click
    height, width = fm.labels.shape
    if not (0 <= x < width and 0 <= y < height):
        raise InvalidInputError(
            f"click ({x}, {y}) outside image {width}x{height}")
    label = int(fm.labels[y, x])
    slope = slab.plan.slope_for(label)
    return refocus(slab, slope, workers), slab.plan.depth_for(label)


def perspective_sweep(slab, num_frames, u_min=None, u_max=None):
    """Evenly spaced viewpoints across the aperture: round-half-up integer
    positions over [u_min, u_max] (default: the slab's full range),
    deduplicated preserving order.

    Returns a list of (u, frame) pairs; may be shorter than ``num_frames``
    when rounding collapses neighbours.
    """
    if num_frames < 1:
        raise InvalidInputError(f"need at least one frame, got {num_frames}")
    u_min = slab.u_min if u_min is None else int(u_min)
    u_max = slab.u_max if u_max is None else int(u_max)
    if u_min > u_max:
        raise InvalidInputError(f"empty sweep range [{u_min}, {u_max}]")
    slab.u_index(u_min)
    slab.u_index(u_max)
    targets = np.linspace(u_min, u_max, num_frames)
    out = []
    seen = set()
    for u0 in round_half_up(targets):
        u0 = int(u0)
        if u0 not in seen:
            seen.add(u0)
            out.append((u0, view_at(slab, u0)))
    return out
