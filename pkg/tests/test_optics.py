"""Thin-lens geometry, focus calibration, and refocus resolution."""

import math
import warnings

import numpy as np
import pytest

from lumistack.core import (CalibrationError, CaptureMeta, FocusMap,
                            InvalidInputError, NoRealImageError)
from lumistack.optics import (CalibrationModel, CalibrationTable, LensGeometry,
                              fit_focus_curve, focus_map_to_depth_map,
                              focus_param_to_depth, projection_angle,
                              refocus_resolution, resolve_depths,
                              thin_lens_image_distance)

from helpers import CALIBRATION_ROWS

CALIBRATION_TEXT = "\n".join(
    ["focus_param,near_m,far_m"]
    + [f"{int(f)},{near},{far}" for f, near, far in CALIBRATION_ROWS])


@pytest.fixture(scope="module")
def table():
    return CalibrationTable(CALIBRATION_ROWS)


@pytest.fixture(scope="module")
def model(table):
    return fit_focus_curve(table)


class TestCalibrationTable:
    def test_from_text_skips_header_comments_and_blanks(self):
        text = ("# bench session\n\nparam,near,far\n0,0.24,0.25\n"
                "  # trailing comment\n-500, 0.27 ,0.28\n")
        t = CalibrationTable.from_text(text)
        assert t.rows == ((0.0, 0.24, 0.25), (-500.0, 0.27, 0.28))

    def test_from_text_full_table(self, table):
        assert CalibrationTable.from_text(CALIBRATION_TEXT).rows == table.rows

    def test_from_text_accepts_headerless_input(self):
        t = CalibrationTable.from_text("0,0.24,0.25\n-500,0.27,0.28")
        assert t.rows == ((0.0, 0.24, 0.25), (-500.0, 0.27, 0.28))

    def test_from_text_rejects_second_unparseable_line(self):
        with pytest.raises(InvalidInputError, match="line 3"):
            CalibrationTable.from_text("a,b,c\n0,0.24,0.25\nx,y,z")

    def test_from_text_rejects_wrong_field_count(self):
        with pytest.raises(InvalidInputError, match="line 2.*3 comma"):
            CalibrationTable.from_text("0,0.24,0.25\n-500,0.27")

    def test_from_text_rejects_empty_input(self):
        with pytest.raises(InvalidInputError, match="no data rows"):
            CalibrationTable.from_text("# nothing\n\n")

    def test_rejects_empty_rows(self):
        with pytest.raises(InvalidInputError):
            CalibrationTable(())

    @pytest.mark.parametrize("row", [
        (0.0, -0.1, 0.25),
        (0.0, 0.0, 0.25),
        (0.0, 0.25, 0.25),
        (0.0, 0.30, 0.25),
        (float("nan"), 0.24, 0.25),
        (0.0, 0.24, float("inf")),
    ])
    def test_rejects_bad_interval(self, row):
        with pytest.raises(InvalidInputError):
            CalibrationTable((row,))

    def test_rejects_non_monotone_params(self):
        rows = ((0.0, 0.24, 0.25), (-500.0, 0.27, 0.28), (-250.0, 0.3, 0.31))
        with pytest.raises(CalibrationError, match="monotone"):
            CalibrationTable(rows)

    def test_midpoints_and_params(self, table):
        np.testing.assert_array_equal(
            table.params(), [r[0] for r in CALIBRATION_ROWS])
        np.testing.assert_allclose(
            table.midpoints(),
            [0.5 * (near + far) for _, near, far in CALIBRATION_ROWS],
            rtol=0, atol=0)


class TestFitFocusCurve:
    def test_fit_matches_frozen_coefficients(self, model):
        # Oracle: solved the weighted normal equations independently and
        # froze the result.
        assert model.a == 0.0007834357414345065
        assert model.b == 3.9662332401809977
        assert model.r_squared == 0.9995758137776752
        assert model.param_range == (-5000.0, 0.0)

    def test_fit_matches_normal_equations_oracle(self, table):
        x = table.params()
        y = 1.0 / table.midpoints()
        w = 1.0 / y ** 2
        w[-1] *= 0.25
        # Solve the 2x2 weighted normal equations directly.
        lhs = np.array([[(w * x * x).sum(), (w * x).sum()],
                        [(w * x).sum(), w.sum()]])
        rhs = np.array([(w * x * y).sum(), (w * y).sum()])
        a_ref, b_ref = np.linalg.solve(lhs, rhs)
        model = fit_focus_curve(table)
        assert math.isclose(model.a, a_ref, rel_tol=1e-12)
        assert math.isclose(model.b, b_ref, rel_tol=1e-12)

    def test_fit_quality_bounds(self, model, table):
        assert model.r_squared >= 0.99
        mids = table.midpoints()
        fitted = np.array([focus_param_to_depth(model, f)
                           for f in table.params()])
        rel = np.abs(fitted - mids) / mids
        assert np.all(rel[:-1] < 0.15)
        assert rel[-1] < 0.40

    def test_two_rows_fit_exactly(self):
        t = CalibrationTable(((0.0, 0.24, 0.26), (-1000.0, 0.49, 0.51)))
        m = fit_focus_curve(t)
        assert m.r_squared == 1.0
        assert math.isclose(focus_param_to_depth(m, 0.0), 0.25,
                            rel_tol=1e-12)
        assert math.isclose(focus_param_to_depth(m, -1000.0), 0.50,
                            rel_tol=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(CalibrationError, match="at least 2"):
            fit_focus_curve(CalibrationTable(((0.0, 0.24, 0.25),)))

    @pytest.mark.parametrize("weight", [0.0, -1.0])
    def test_rejects_non_positive_last_row_weight(self, table, weight):
        with pytest.raises(InvalidInputError, match="last_row_weight"):
            fit_focus_curve(table, last_row_weight=weight)


class TestCalibrationModel:
    def test_rejects_flat_fit(self):
        with pytest.raises(CalibrationError, match="flat"):
            CalibrationModel(0.0, 2.0, (-5000.0, 0.0), 1.0)

    def test_rejects_non_positive_reciprocal_inside_range(self):
        # 1/D = a*F + b crosses zero at F = 2000 < hi.
        with pytest.raises(CalibrationError, match="non-positive"):
            CalibrationModel(-0.001, 2.0, (0.0, 5000.0), 1.0)

    def test_rejects_non_finite_coefficients(self):
        with pytest.raises(CalibrationError):
            CalibrationModel(float("nan"), 2.0, (0.0, 1.0), 1.0)


class TestFocusParamToDepth:
    def test_inverts_fitted_line(self, model):
        for f in (-4321.0, -2500.0, -1.0):
            assert focus_param_to_depth(model, f) == \
                1.0 / (model.a * f + model.b)

    def test_clamps_below_range_with_warning(self, model):
        with pytest.warns(UserWarning, match="clamping"):
            d = focus_param_to_depth(model, -6000.0)
        assert d == 1.0 / (model.a * -5000.0 + model.b)

    def test_clamps_above_range_with_warning(self, model):
        with pytest.warns(UserWarning, match="clamping"):
            d = focus_param_to_depth(model, 100.0)
        assert d == 1.0 / model.b

    def test_in_range_query_does_not_warn(self, model):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            focus_param_to_depth(model, -2500.0)

    def test_positive_everywhere_inside_validated_range(self, model):
        # Endpoint positivity is checked at construction; linearity plus
        # clamping then keeps every query positive.
        for f in np.linspace(*model.param_range, 50):
            assert focus_param_to_depth(model, float(f)) > 0


class TestThinLens:
    def test_frozen_value(self):
        # 1.0 * 0.05 / 0.95, frozen.
        assert thin_lens_image_distance(0.05, 1.0) == 0.052631578947368425

    def test_satisfies_lens_equation(self, rng):
        for _ in range(100):
            f = float(rng.uniform(0.01, 0.2))
            d = float(rng.uniform(1.5, 100.0)) * f
            v = thin_lens_image_distance(f, d)
            assert math.isclose(1.0 / v, 1.0 / f - 1.0 / d, rel_tol=1e-12)

    def test_image_distance_approaches_focal_length_far_away(self):
        assert math.isclose(thin_lens_image_distance(0.05, 1e9), 0.05,
                            rel_tol=1e-9)

    @pytest.mark.parametrize("distance", [0.05, 0.049, 0.0, -1.0])
    def test_rejects_object_at_or_inside_focal_length(self, distance):
        with pytest.raises(NoRealImageError):
            thin_lens_image_distance(0.05, distance)

    @pytest.mark.parametrize("focal", [0.0, -0.05, float("nan")])
    def test_rejects_bad_focal_length(self, focal):
        with pytest.raises(InvalidInputError):
            thin_lens_image_distance(focal, 1.0)


class TestProjectionAngle:
    GEOM = LensGeometry(focal_length_m=0.05, reference_distance_m=1.0)

    def test_zero_at_reference_distance(self):
        assert projection_angle(1.0, self.GEOM) == 0.0

    def test_frozen_angles(self):
        # Oracle: atan((1/D_ref - 1/D) / (1/f' - 1/D_ref)) evaluated by
        # hand for the fixture geometry, frozen.
        assert projection_angle(2.0 / 3.0, self.GEOM) == \
            -0.02630971725292219
        assert projection_angle(0.5, self.GEOM) == -0.052583061610941714
        assert projection_angle(3.0, self.GEOM) == 0.03507333053322537

    def test_sign_convention(self):
        assert projection_angle(0.8, self.GEOM) < 0
        assert projection_angle(1.25, self.GEOM) > 0

    def test_monotone_in_distance(self):
        depths = np.linspace(0.06, 50.0, 400)
        angles = [projection_angle(float(d), self.GEOM) for d in depths]
        assert np.all(np.diff(angles) > 0)

    def test_bounded_by_far_field_limit(self):
        limit = math.atan((1.0 / self.GEOM.reference_distance_m)
                          / (1.0 / self.GEOM.focal_length_m
                             - 1.0 / self.GEOM.reference_distance_m))
        assert projection_angle(1e12, self.GEOM) < limit
        assert math.isclose(projection_angle(1e12, self.GEOM), limit,
                            rel_tol=1e-9)

    def test_agrees_with_image_plane_displacement(self, rng):
        # Independent route: tan(angle) equals the relative change of the
        # image-side conjugate, v_ref/v(D) - 1.
        for _ in range(200):
            f = float(rng.uniform(0.01, 0.15))
            d_ref = float(rng.uniform(4.0, 50.0)) * f
            d = float(rng.uniform(1.5, 80.0)) * f
            geom = LensGeometry(f, d_ref)
            v_ref = thin_lens_image_distance(f, d_ref)
            v = thin_lens_image_distance(f, d)
            lhs = math.tan(projection_angle(d, geom))
            rhs = v_ref / v - 1.0
            assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-12)

    @pytest.mark.parametrize("distance", [0.05, 0.01, 0.0, -2.0])
    def test_rejects_unfocusable_distance(self, distance):
        with pytest.raises(NoRealImageError):
            projection_angle(distance, self.GEOM)

    def test_geometry_validation(self):
        with pytest.raises(InvalidInputError):
            LensGeometry(focal_length_m=1.0, reference_distance_m=0.5)
        with pytest.raises(InvalidInputError):
            LensGeometry(focal_length_m=0.0, reference_distance_m=1.0)
        with pytest.raises(InvalidInputError):
            LensGeometry(focal_length_m=0.05,
                         reference_distance_m=float("inf"))


class TestRefocusResolution:
    def test_frozen_angular_branch_value(self):
        # alpha = 0.5 sits below the branch point for X=325, Theta=10, so
        # the angular branch applies: 10 * sqrt(1 + 1) = 10*sqrt(2).
        assert refocus_resolution(325, 10, 0.5) == 14.142135623730951
        assert refocus_resolution(325, 10, 0.5) == 10 * math.sqrt(2.0)

    def test_spatial_branch_at_unit_alpha(self):
        assert refocus_resolution(325, 10, 1.0) == 325.0

    def test_branches_agree_at_boundary(self):
        x, theta = 325.0, 10.0
        alpha_star = x / (x + theta)
        assert alpha_star == 0.9701492537313433
        at = refocus_resolution(x, theta, alpha_star)
        assert at == 325.15380975778214
        eps = 1e-12
        below = refocus_resolution(x, theta, alpha_star - eps)
        above = refocus_resolution(x, theta, alpha_star + eps)
        assert math.isclose(below, at, rel_tol=1e-9)
        assert math.isclose(above, at, rel_tol=1e-9)

    def test_resolution_peaks_at_branch_point(self):
        x, theta = 325.0, 10.0
        alpha_star = x / (x + theta)
        alphas = np.linspace(0.01, 1.0, 500)
        values = [refocus_resolution(x, theta, float(a)) for a in alphas]
        assert max(values) <= refocus_resolution(x, theta, alpha_star)

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.0001, float("nan")])
    def test_rejects_alpha_outside_unit_interval(self, alpha):
        with pytest.raises(InvalidInputError):
            refocus_resolution(325, 10, alpha)

    @pytest.mark.parametrize("spatial,angular", [
        (0, 10), (-5, 10), (325, 0), (325, -1), (float("inf"), 10),
    ])
    def test_rejects_bad_resolutions(self, spatial, angular):
        with pytest.raises(InvalidInputError):
            refocus_resolution(spatial, angular, 0.5)


class TestResolveDepths:
    def test_prefers_explicit_distance(self, model):
        metas = [CaptureMeta(0.05, focus_param=-2500.0,
                             focus_distance_m=0.77)]
        assert resolve_depths(metas, model) == (0.77,)

    def test_converts_params_through_model(self, model):
        metas = [CaptureMeta(0.05, focus_param=-2500.0),
                 CaptureMeta(0.05, focus_param=-4000.0)]
        expected = (focus_param_to_depth(model, -2500.0),
                    focus_param_to_depth(model, -4000.0))
        assert resolve_depths(metas, model) == expected

    def test_param_without_model_names_the_image(self):
        metas = [CaptureMeta(0.05, focus_distance_m=1.0),
                 CaptureMeta(0.05, focus_param=-2500.0)]
        with pytest.raises(CalibrationError, match="image 1"):
            resolve_depths(metas, None)


class TestFocusMapToDepthMap:
    def test_labels_take_their_image_distance(self):
        labels = np.array([[1, 2], [3, 1]], dtype=np.int32)
        fm = FocusMap(labels, 3)
        metas = [CaptureMeta(0.05, focus_distance_m=d)
                 for d in (1.0, 2.0, 4.0)]
        dm = focus_map_to_depth_map(fm, metas)
        np.testing.assert_array_equal(dm.depth_m,
                                      [[1.0, 2.0], [4.0, 1.0]])

    def test_rejects_meta_count_mismatch(self):
        fm = FocusMap(np.ones((2, 2), dtype=np.int32), 1)
        metas = [CaptureMeta(0.05, focus_distance_m=1.0)] * 2
        with pytest.raises(InvalidInputError):
            focus_map_to_depth_map(fm, metas)
