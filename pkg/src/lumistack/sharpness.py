"""Per-image sharpness scoring from thresholded gradient magnitudes.

A pixel's score counts how many of the increasing thresholds delta, 2*delta,
..., M*delta its gradient magnitude reaches, each step weighted by alpha_m.
With the default unit weights the score is simply the number of thresholds
passed, an integer in [0, M].
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import InvalidInputError, to_luma

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ScoreConfig:
    """Threshold ladder: M = len(alphas) steps with weights alpha_1..alpha_M."""

    alphas: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.alphas) < 1:
            raise InvalidInputError("need at least one threshold step")
        a = np.asarray(self.alphas, dtype=np.float64)
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise InvalidInputError(
                f"step weights must be positive and finite, got {self.alphas}")

    @property
    def steps(self):
        return len(self.alphas)

    @property
    def max_score(self):
        """Upper bound of the score, sum of the weights."""
        return float(sum(self.alphas))


class ThresholdResult(NamedTuple):
    delta: float
    textureless: bool


def gradient_magnitude(img):
    """L2 magnitude of the 3x3 Sobel gradient, replicate-padded borders.

    Input must be single-channel ((H, W) or (H, W, 1)) and at least 3x3.
    """
    field = np.asarray(img, dtype=np.float64)
    if field.ndim == 3:
        if field.shape[2] != 1:
            raise InvalidInputError("gradient_magnitude wants a luma image; "
                                    "use to_luma first")
        field = field[:, :, 0]
    if field.ndim != 2:
        raise InvalidInputError(f"expected 2D field, got shape {field.shape}")
    if field.shape[0] < 3 or field.shape[1] < 3:
        raise InvalidInputError(
            f"image {field.shape} too small for a 3x3 gradient operator")
    gx = ndimage.correlate(field, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(field, SOBEL_X.T, mode="nearest")
    return np.hypot(gx, gy)


def auto_threshold(grad):
    """Otsu's threshold over a 256-bin histogram of gradient magnitudes.

    Returns (delta, textureless). A constant field has no usable threshold;
    it yields the smallest positive float64 and the textureless flag, which
    downstream scoring turns into an all-zero layer.
    """
    g = np.asarray(grad, dtype=np.float64).ravel()
    if g.size == 0:
        raise InvalidInputError("empty gradient field")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("gradient field contains non-finite values")
    lo = float(g.min())
    hi = float(g.max())
    if hi == lo:
        return ThresholdResult(float(np.finfo(np.float64).tiny), True)

    hist, edges = np.histogram(g, bins=256, range=(lo, hi))
    p = hist / g.size
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(p)[:-1]
    w1 = 1.0 - w0
    m = np.cumsum(p * centers)
    mu_total = m[-1]
    # between-class variance for every split; undefined splits count as 0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m[:-1] / w0
        mu1 = (mu_total - m[:-1]) / w1
        sigma_b = w0 * w1 * (mu0 - mu1) ** 2
    sigma_b = np.where((w0 > 0) & (w1 > 0), sigma_b, 0.0)
    best = int(np.argmax(sigma_b))
    return ThresholdResult(float(edges[best + 1]), False)


def sharpness_scores(grad, delta, cfg=None):
    """Score each pixel against the ladder of thresholds m*delta, m=1..M.

    The comparison is >= (the step function counts equality as passed).
    """
    if cfg is None:
        cfg = ScoreConfig()
    if not (np.isfinite(delta) and delta > 0):
        raise InvalidInputError(f"threshold must be positive, got {delta}")
    g = np.asarray(grad, dtype=np.float64)
    scores = np.zeros_like(g)
    for m, alpha in enumerate(cfg.alphas, start=1):
        scores += alpha * (g >= m * delta)
    return scores


@dataclass(frozen=True)
class StackScores:
    """Sharpness layers for a whole stack plus per-image threshold info."""

    scores: np.ndarray            # (K, H, W)
    deltas: tuple[float, ...]
    textureless: tuple[bool, ...]


def score_stack(stack, cfg=None):
    """Run luma -> gradient -> threshold -> score over every stack image."""
    if cfg is None:
        cfg = ScoreConfig()
    layers = []
    deltas = []
    flat = []
    for k in range(stack.num_images):
        grad = gradient_magnitude(to_luma(stack.images[k]))
        thr = auto_threshold(grad)
        layers.append(sharpness_scores(grad, thr.delta, cfg))
        deltas.append(thr.delta)
        flat.append(thr.textureless)
    return StackScores(np.stack(layers), tuple(deltas), tuple(flat))
