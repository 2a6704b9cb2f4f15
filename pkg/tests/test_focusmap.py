"""Focus-map assembly from sharpness layers."""

import numpy as np
import pytest

from helpers import flat_stack
from lumistack.core import (CaptureMeta, FocalStack, FocusMap,
                            InvalidInputError)
from lumistack.focusmap import (build_data_costs, compute_focus_map,
                                in_focus_mask, median_filter_labels)
from lumistack.sharpness import ScoreConfig


def checker_stack(height=24, width=32, split=16, noise=0.0, rng=None):
    """Two-image stack: left half sharp in image 1, right half in image 2."""
    # Width-2 vertical stripes: every column sees different left/right
    # neighbors, so the gradient filter responds across the whole texture.
    base = ((np.arange(width) // 2) % 2 * np.ones((height, 1)))
    img1 = np.full((height, width), 0.5)
    img2 = np.full((height, width), 0.5)
    img1[:, :split] = base[:, :split]
    img2[:, split:] = base[:, split:]
    if noise and rng is not None:
        img1 = np.clip(img1 + rng.normal(0, noise, img1.shape), 0, 1)
        img2 = np.clip(img2 + rng.normal(0, noise, img2.shape), 0, 1)
    metas = [CaptureMeta(0.05, focus_distance_m=1.0),
             CaptureMeta(0.05, focus_distance_m=0.5)]
    return FocalStack.from_images([img1[..., None], img2[..., None]], metas)


class TestBuildDataCosts:
    def test_cost_is_max_score_minus_score(self):
        cfg = ScoreConfig(alphas=(1.0, 2.0))
        layers = [np.array([[0.0, 3.0], [1.0, 2.0]]),
                  np.array([[3.0, 0.0], [2.0, 1.0]])]
        costs = build_data_costs(layers, cfg)
        assert costs.shape == (2, 2, 2)
        np.testing.assert_array_equal(costs[:, :, 0],
                                      cfg.max_score - layers[0])
        np.testing.assert_array_equal(costs[:, :, 1],
                                      cfg.max_score - layers[1])

    def test_zero_cost_exactly_at_max_score(self):
        cfg = ScoreConfig()
        layers = [np.full((2, 2), cfg.max_score)]
        assert build_data_costs(layers, cfg).min() == 0.0

    def test_rejects_empty_and_mismatched_layers(self):
        with pytest.raises(InvalidInputError, match="no sharpness"):
            build_data_costs([])
        with pytest.raises(InvalidInputError, match="differ in shape"):
            build_data_costs([np.zeros((2, 2)), np.zeros((2, 3))])
        with pytest.raises(InvalidInputError, match="2D"):
            build_data_costs([np.zeros((2, 2, 1))])

    def test_rejects_scores_above_maximum(self):
        cfg = ScoreConfig(alphas=(1.0,))
        with pytest.raises(InvalidInputError, match="exceed"):
            build_data_costs([np.full((2, 2), 1.5)], cfg)


class TestComputeFocusMap:
    def test_single_image_short_circuits(self):
        stack = flat_stack(k=1, height=5, width=7)
        fm = compute_focus_map(stack)
        assert fm.num_labels == 1
        np.testing.assert_array_equal(fm.labels, np.ones((5, 7)))

    def test_two_layer_split_recovered(self):
        stack = checker_stack()
        fm = compute_focus_map(stack, smoothness_weight=1.0)
        assert fm.num_labels == 2
        want = np.ones((24, 32), dtype=np.int32)
        want[:, 16:] = 2
        assert np.mean(fm.labels == want) > 0.95

    def test_textureless_stack_is_uniformly_labeled(self):
        # No gradients anywhere: smoothness must produce one flat region.
        fm = compute_focus_map(flat_stack(k=3, height=8, width=8),
                               smoothness_weight=1.0)
        assert len(np.unique(fm.labels)) == 1

    def test_precomputed_scores_match_internal_path(self):
        from lumistack.sharpness import score_stack
        stack = checker_stack()
        cfg = ScoreConfig()
        direct = compute_focus_map(stack, cfg, smoothness_weight=1.5)
        via_scores = compute_focus_map(stack, cfg, smoothness_weight=1.5,
                                       scores=score_stack(stack, cfg))
        np.testing.assert_array_equal(direct.labels, via_scores.labels)

    def test_sweep_energies_recorded_and_non_increasing(self):
        sweeps = []
        compute_focus_map(checker_stack(), smoothness_weight=1.0,
                          sweep_energies=sweeps)
        assert len(sweeps) >= 2
        assert all(b <= a for a, b in zip(sweeps, sweeps[1:]))

    def test_zero_smoothness_is_pointwise_argmin(self):
        from lumistack.focusmap import build_data_costs as costs_of
        from lumistack.sharpness import score_stack
        stack = checker_stack()
        cfg = ScoreConfig()
        fm = compute_focus_map(stack, cfg, smoothness_weight=0.0)
        costs = costs_of(list(score_stack(stack, cfg).scores), cfg)
        np.testing.assert_array_equal(fm.labels,
                                      np.argmin(costs, axis=2) + 1)


class TestMedianFilterLabels:
    def test_radius_zero_is_identity(self):
        fm = FocusMap(np.array([[1, 2], [2, 1]], dtype=np.int32), 2)
        assert median_filter_labels(fm, radius=0) is fm

    def test_removes_single_speckle(self):
        labels = np.ones((5, 5), dtype=np.int32)
        labels[2, 2] = 2
        fm = median_filter_labels(FocusMap(labels, 2), radius=1)
        assert np.all(fm.labels == 1)

    def test_keeps_majority_region(self):
        labels = np.ones((6, 6), dtype=np.int32)
        labels[:, 3:] = 2
        fm = median_filter_labels(FocusMap(labels, 2), radius=1)
        np.testing.assert_array_equal(fm.labels, labels)

    def test_hand_computed_window(self):
        # 3x3 window at the center holds five 2s and four 1s.
        labels = np.array([[1, 2, 2],
                           [1, 2, 2],
                           [1, 1, 2]], dtype=np.int32)
        fm = median_filter_labels(FocusMap(labels, 2), radius=1)
        assert fm.labels[1, 1] == 2

    def test_output_labels_stay_in_range(self, rng):
        labels = rng.integers(1, 5, size=(16, 16)).astype(np.int32)
        fm = median_filter_labels(FocusMap(labels, 4), radius=2)
        assert fm.labels.min() >= 1 and fm.labels.max() <= 4
        assert fm.num_labels == 4

    def test_rejects_negative_radius(self):
        fm = FocusMap(np.ones((2, 2), dtype=np.int32), 1)
        with pytest.raises(InvalidInputError):
            median_filter_labels(fm, radius=-1)


class TestInFocusMask:
    def test_masks_partition_the_image(self):
        labels = np.array([[1, 2, 3], [3, 2, 1]], dtype=np.int32)
        fm = FocusMap(labels, 3)
        masks = [in_focus_mask(fm, k) for k in (1, 2, 3)]
        total = np.sum(masks, axis=0)
        assert np.all(total == 1)
        np.testing.assert_array_equal(masks[1],
                                      [[False, True, False],
                                       [False, True, False]])

    @pytest.mark.parametrize("label", [0, 4, -1])
    def test_rejects_out_of_range_label(self, label):
        fm = FocusMap(np.ones((2, 2), dtype=np.int32), 3)
        with pytest.raises(InvalidInputError):
            in_focus_mask(fm, label)
