"""Light-field reconstruction from fixed-camera focal stacks.

Pipeline: per-pixel sharpness scoring -> focus-map labeling by graph cuts
-> thin-lens depth calibration -> masked back-projection into an
LF(x, y, u, 0) slab -> extended-focus, refocused, and perspective-shifted
renders, served interactively over HTTP.
"""

from ._kernels import BACKEND
from .core import (CalibrationError, CalibrationRangeError, CaptureMeta,
                   DepthMap, FocalStack, FocusMap, InvalidInputError,
                   LumistackError, NoRealImageError)
from .focusmap import (compute_focus_map, in_focus_mask,
                       median_filter_labels)
from .optics import (CalibrationModel, CalibrationTable, LensGeometry,
                     fit_focus_curve, focus_map_to_depth_map,
                     focus_param_to_depth, projection_angle,
                     refocus_resolution, resolve_depths,
                     thin_lens_image_distance)
from .render import (extended_focus, perspective_sweep, refocus,
                     refocus_at_depth, refocus_at_point, view_at)
from .sharpness import (ScoreConfig, auto_threshold, gradient_magnitude,
                        score_stack, sharpness_scores)
from .tomography import (EpipolarImage, LayerPlan, LightFieldSlab,
                         PlanEntry, SyntheticScene, backproject_row,
                         forward_project, load_slab, reconstruct_slab,
                         save_slab, slopes_from_depths, synthesize_stack)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CalibrationError", "CalibrationModel",
    "CalibrationRangeError", "CalibrationTable", "CaptureMeta", "DepthMap",
    "EpipolarImage", "FocalStack", "FocusMap", "InvalidInputError",
    "LayerPlan", "LensGeometry", "LightFieldSlab", "LumistackError",
    "NoRealImageError", "PlanEntry", "ScoreConfig", "SyntheticScene",
    "auto_threshold", "backproject_row", "compute_focus_map",
    "extended_focus", "fit_focus_curve", "focus_map_to_depth_map",
    "focus_param_to_depth", "forward_project", "gradient_magnitude",
    "in_focus_mask", "load_slab", "median_filter_labels",
    "perspective_sweep", "projection_angle", "reconstruct_slab", "refocus",
    "refocus_at_depth", "refocus_at_point", "refocus_resolution",
    "resolve_depths", "save_slab", "score_stack", "sharpness_scores",
    "slopes_from_depths", "synthesize_stack", "thin_lens_image_distance",
    "view_at",
]
