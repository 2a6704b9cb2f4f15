import numpy as np
import pytest

from lumistack.core import (CaptureMeta, DepthMap, FocalStack, FocusMap,
                            InvalidInputError, LUMA_WEIGHTS, as_image,
                            to_luma)


def test_as_image_accepts_2d_and_adds_channel():
    img = as_image(np.zeros((4, 5)))
    assert img.shape == (4, 5, 1)
    assert img.dtype == np.float64
    assert img.flags.c_contiguous


def test_as_image_accepts_rgb():
    assert as_image(np.zeros((2, 3, 3))).shape == (2, 3, 3)


@pytest.mark.parametrize("bad", [
    np.zeros((2, 2, 2)),            # 2 channels
    np.zeros((2, 2, 3, 1)),         # 4-D
    np.zeros((0, 3)),               # empty
    np.full((2, 2), 1.5),           # above range
    np.full((2, 2), -0.1),          # below range
    np.full((2, 2), np.nan),        # non-finite
])
def test_as_image_rejects(bad):
    with pytest.raises(InvalidInputError):
        as_image(bad)


def test_to_luma_weights():
    img = np.zeros((1, 2, 3))
    img[0, 0] = (1.0, 0.0, 0.0)
    img[0, 1] = (0.25, 0.5, 0.75)
    out = to_luma(img)
    assert out.shape == (1, 2, 1)
    assert out[0, 0, 0] == LUMA_WEIGHTS[0]
    expected = (0.25 * LUMA_WEIGHTS[0] + 0.5 * LUMA_WEIGHTS[1]
                + 0.75 * LUMA_WEIGHTS[2])
    assert out[0, 1, 0] == pytest.approx(expected, abs=1e-15)


def test_to_luma_single_channel_passthrough():
    img = np.linspace(0, 1, 6).reshape(2, 3, 1)
    assert np.array_equal(to_luma(img), img)


def test_capture_meta_needs_focus_information():
    with pytest.raises(InvalidInputError):
        CaptureMeta(0.05)
    meta = CaptureMeta(0.05, focus_param=-2000.0)
    assert meta.focus_distance_m is None
    with pytest.raises(InvalidInputError):
        CaptureMeta(0.05, focus_distance_m=0.04)   # inside focal length
    with pytest.raises(InvalidInputError):
        CaptureMeta(-1.0, focus_distance_m=1.0)


def test_focal_stack_from_images_validates_shapes():
    metas = (CaptureMeta(0.05, focus_distance_m=1.0),
             CaptureMeta(0.05, focus_distance_m=2.0))
    stack = FocalStack.from_images([np.zeros((3, 4)), np.ones((3, 4))],
                                   metas)
    assert stack.images.shape == (2, 3, 4, 1)
    assert (stack.num_images, stack.height, stack.width,
            stack.channels) == (2, 3, 4, 1)
    with pytest.raises(InvalidInputError):
        FocalStack.from_images([np.zeros((3, 4)), np.zeros((4, 3))], metas)
    with pytest.raises(InvalidInputError):
        FocalStack(np.zeros((2, 3, 4, 1)), metas[:1])


def test_focus_map_label_range():
    fm = FocusMap(np.ones((2, 2), dtype=np.int64), 3)
    assert (fm.height, fm.width) == (2, 2)
    with pytest.raises(InvalidInputError):
        FocusMap(np.zeros((2, 2), dtype=np.int64), 3)       # label 0
    with pytest.raises(InvalidInputError):
        FocusMap(np.full((2, 2), 4, dtype=np.int64), 3)     # label > K
    with pytest.raises(InvalidInputError):
        FocusMap(np.ones((2, 2)), 3)                        # float labels


def test_depth_map_positive_finite():
    DepthMap(np.full((2, 2), 1.5))
    with pytest.raises(InvalidInputError):
        DepthMap(np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        DepthMap(np.full((2, 2), np.inf))
