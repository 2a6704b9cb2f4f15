"""Focus-map assembly: sharpness layers in, cleaned label map out.

The data term prefers the sharpest image per pixel; the smoothness term
grows regions across texture gaps, so pixels with no gradient anywhere
inherit labels from their textured surroundings instead of being arbitrary.
"""

import numpy as np
from scipy import ndimage

from .core import FocusMap, InvalidInputError
from .graphcut import EnergyProblem, alpha_expansion
from .sharpness import ScoreConfig, score_stack


def build_data_costs(layers, cfg=None):
    """Stack per-image score layers into a (H, W, K) cost table.

    Cost is max_score minus the score: zero exactly where a pixel attains
    the maximum possible sharpness.
    """
    if cfg is None:
        cfg = ScoreConfig()
    arrs = [np.asarray(l, dtype=np.float64) for l in layers]
    if not arrs:
        raise InvalidInputError("no sharpness layers given")
    if len({a.shape for a in arrs}) > 1:
        raise InvalidInputError("sharpness layers differ in shape")
    if arrs[0].ndim != 2:
        raise InvalidInputError("sharpness layers must be 2D")
    costs = cfg.max_score - np.stack(arrs, axis=2)
    if costs.min() < 0:
        raise InvalidInputError("scores exceed the configured maximum")
    return costs


def compute_focus_map(stack, cfg=None, smoothness_weight=1.0, scores=None,
                      sweep_energies=None):
    """Jointly label every pixel with its sharpest image index.

    ``scores`` may carry precomputed ``score_stack`` output to avoid
    duplicate work. A single-image stack short-circuits to the constant
    map.
    """
    if cfg is None:
        cfg = ScoreConfig()
    k = stack.num_images
    shape = (stack.height, stack.width)
    if k == 1:
        return FocusMap(np.ones(shape, dtype=np.int32), 1)
    if scores is None:
        scores = score_stack(stack, cfg)
    costs = build_data_costs(list(scores.scores), cfg)
    prob = EnergyProblem(stack.width, stack.height, k, costs,
                         smoothness_weight)
    labels = alpha_expansion(prob, sweep_energies=sweep_energies)
    return FocusMap(labels.astype(np.int32), k)


def median_filter_labels(fm, radius=2):
    """Clean small label artifacts with a (2r+1) square median.

    The window has odd size, so the median is always an existing label.
    """
    if radius < 0:
        raise InvalidInputError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return fm
    filtered = ndimage.median_filter(fm.labels, size=2 * radius + 1,
                                     mode="nearest")
    return FocusMap(filtered.astype(fm.labels.dtype), fm.num_labels)


def in_focus_mask(fm, label):
    """Boolean mask of the pixels assigned to one stack image."""
    if not 1 <= label <= fm.num_labels:
        raise InvalidInputError(
            f"label {label} outside [1, {fm.num_labels}]")
    return fm.labels == label
