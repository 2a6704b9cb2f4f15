"""Shared synthetic scenes and small brute-force oracles for the tests."""

import math

import numpy as np

from lumistack.core import CaptureMeta, FocalStack
from lumistack.tomography import (SyntheticScene, slopes_from_depths,
                                  synthesize_stack, u_offset_range)

# Three-layer reference scene: 256x192, f' = 50 mm, reference plane at 1 m.
# Depths 1, 2/3, and 1/2 m give projection-angle tangents 0, -1/38, -2/38,
# so aperture scale 38 makes the slopes exactly 0, -1, -2 px per u step.
# The two foreground rectangles share one row band and touch at x = 104:
# each rect's parallax ghost margin there is overpainted by its neighbour,
# which keeps the painter-model mismatch well under 1% of slab cells.
SCENE_WIDTH = 256
SCENE_HEIGHT = 192
SCENE_FOCAL_M = 0.05
SCENE_DEPTHS = {1: 1.0, 2: 2.0 / 3.0, 3: 0.5}
SCENE_APERTURE_SCALE = 38.0
SCENE_U_SAMPLES = 9
SCENE_SMOOTHNESS = 2.0
SCENE_MEDIAN_RADIUS = 1
RECT2 = (slice(58, 70), slice(40, 104))      # (y, x) of the mid layer
RECT3 = (slice(58, 70), slice(104, 168))     # (y, x) of the near layer

# Bench measurements: focus parameter vs. interval of sharp distances (m).
CALIBRATION_ROWS = (
    (0.0, 0.24, 0.25),
    (-500.0, 0.27, 0.28),
    (-1000.0, 0.30, 0.32),
    (-1500.0, 0.35, 0.37),
    (-2000.0, 0.41, 0.43),
    (-2500.0, 0.49, 0.51),
    (-3000.0, 0.60, 0.63),
    (-3500.0, 0.79, 0.82),
    (-4000.0, 1.20, 1.27),
    (-4500.0, 2.0, 2.7),
    (-5000.0, 15.0, 25.0),
)



def trig_texture(height, width, base, amp, period_x, period_y, phase):
    """Smooth, everywhere-textured closed-form layer in (0, 1)."""
    x = np.arange(width)[None, :, None]
    y = np.arange(height)[:, None, None]
    chan = np.array([0.0, 0.21, 0.42])[None, None, :]
    return base + amp * (np.sin(2 * np.pi * x / period_x + phase + chan)
                         * np.cos(2 * np.pi * y / period_y + 0.6 * phase))


def scene_textures(height=SCENE_HEIGHT, width=SCENE_WIDTH):
    return np.ascontiguousarray(np.stack([
        trig_texture(height, width, 0.55, 0.25, 11, 13, 1.2),
        trig_texture(height, width, 0.40, 0.28, 13, 7, 0.2),
        trig_texture(height, width, 0.62, 0.26, 7, 11, 2.0),
    ]))


def scene_masks(height=SCENE_HEIGHT, width=SCENE_WIDTH):
    masks = np.zeros((3, height, width), dtype=bool)
    masks[1][RECT2] = True
    masks[2][RECT3] = True
    masks[0] = ~(masks[1] | masks[2])
    return masks


def make_scene():
    plan = slopes_from_depths(SCENE_DEPTHS, SCENE_FOCAL_M,
                              SCENE_APERTURE_SCALE)
    return SyntheticScene(plan, scene_textures(), scene_masks())


def make_stack_and_truth(u_samples=SCENE_U_SAMPLES):
    return synthesize_stack(make_scene(), u_samples)


def truth_labels():
    masks = scene_masks()
    labels = np.ones((SCENE_HEIGHT, SCENE_WIDTH), dtype=np.int64)
    labels[masks[1]] = 2
    labels[masks[2]] = 3
    return labels


def flat_stack(value=0.5, k=3, height=8, width=8, channels=1):
    """Textureless stack with distinct metadata per image."""
    images = np.full((k, height, width, channels), value)
    metas = tuple(CaptureMeta(0.05, focus_distance_m=1.0 + 0.5 * i)
                  for i in range(k))
    return FocalStack(images, metas)


def paint_oracle(images, masks, plan, u_offsets):
    """Scalar reimplementation of the painter model (overwrite semantics)."""
    k, height, width, channels = images.shape
    num_u = len(u_offsets)
    slab = np.zeros((height, num_u, width, channels))
    written = np.zeros((height, num_u, width), dtype=bool)
    prov = np.full((height, num_u, width), -1, dtype=np.int16)
    first = True
    for entry in plan.entries:
        for label in entry.labels:
            for j, u in enumerate(u_offsets):
                shift = math.floor(entry.slope * u + 0.5)
                for y in range(height):
                    for x in range(width):
                        if not first and not masks[label - 1, y, x]:
                            continue
                        tx = x + shift
                        if 0 <= tx < width:
                            slab[y, j, tx] = images[label - 1, y, x]
                            written[y, j, tx] = True
                            prov[y, j, tx] = label
            first = False
    return slab, written, prov


def integrate_oracle(data, u_offsets, slope):
    """Scalar reimplementation of sloped-line averaging with linear
    interpolation and dropped out-of-range samples."""
    height, num_u, width, channels = data.shape
    out = np.full((height, width, channels), np.nan)
    for y in range(height):
        for x in range(width):
            for c in range(channels):
                total, count = 0.0, 0
                for j, u in enumerate(u_offsets):
                    pos = x + slope * u
                    i0 = math.floor(pos)
                    w1 = pos - i0
                    if i0 < 0 or i0 + (1 if w1 > 0 else 0) >= width:
                        continue
                    v = data[y, j, i0, c] * (1 - w1)
                    if w1 > 0:
                        v += data[y, j, i0 + 1, c] * w1
                    total += v
                    count += 1
                if count:
                    out[y, x, c] = total / count
    return out


def slab_agreement(recon, truth, tol=1e-6):
    """Fraction of (y, u, x) cells where every channel matches within tol."""
    same = (np.abs(recon - truth) <= tol).all(axis=-1)
    return float(same.mean())


def brute_force_min_cut(num_nodes, source, sink, arcs):
    """Minimum s-t cut capacity by enumerating every source-side subset.

    ``arcs`` is a list of directed (tail, head, capacity) triples.
    """
    free = [v for v in range(num_nodes) if v not in (source, sink)]
    best = math.inf
    for bits in range(1 << len(free)):
        side = {source}
        side.update(v for i, v in enumerate(free) if bits >> i & 1)
        cut = sum(c for t, h, c in arcs if t in side and h not in side)
        best = min(best, cut)
    return best


def random_flow_network(rng, max_free_nodes=8):
    """Small random network plus its directed arc list for oracles."""
    from lumistack.graphcut import FlowNetwork

    n = 2 + int(rng.integers(1, max_free_nodes + 1))
    net = FlowNetwork(n, source=0, sink=1)
    arcs = []
    for tail in range(n):
        for head in range(n):
            if tail == head or rng.random() > 0.45:
                continue
            cap = float(np.round(rng.uniform(0.0, 5.0) * 4) / 4)
            rev = float(np.round(rng.uniform(0.0, 5.0) * 4) / 4) \
                if rng.random() < 0.5 else 0.0
            net.add_arc(tail, head, cap, rev)
            arcs.append((tail, head, cap))
            if rev:
                arcs.append((head, tail, rev))
    return net, arcs


def cut_capacity(arcs, source_side):
    """Capacity of the cut induced by a boolean source-side mask."""
    return sum(c for t, h, c in arcs if source_side[t] and not source_side[h])


def exhaustive_min_energy(prob):
    """Global minimum energy of a small grid problem by full enumeration.

    Vectorized over every labeling at once; keep height*width and K small
    (K ** (H*W) labelings are materialized).
    """
    from lumistack.graphcut import smoothness_table

    cells = prob.height * prob.width
    k = prob.num_labels
    grids = np.meshgrid(*([np.arange(1, k + 1)] * cells), indexing="ij")
    labelings = np.stack([g.ravel() for g in grids], axis=1)
    data = prob.data_cost.reshape(cells, k)
    total = data[np.arange(cells), labelings - 1].sum(axis=1)
    if prob.smoothness_weight > 0:
        table = smoothness_table(k)
        idx = np.arange(cells).reshape(prob.height, prob.width)
        pairs = np.concatenate(
            (np.stack((idx[:, :-1].ravel(), idx[:, 1:].ravel()), axis=1),
             np.stack((idx[:-1, :].ravel(), idx[1:, :].ravel()), axis=1)))
        for p, q in pairs:
            total = total + prob.smoothness_weight * table[
                labelings[:, p], labelings[:, q]]
    best = int(np.argmin(total))
    return float(total[best]), labelings[best].reshape(
        prob.height, prob.width).astype(np.int32)
