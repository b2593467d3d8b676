import math

import numpy as np
import pytest

import hystlab as hl
from hystlab.core import (
    AffineCurve,
    BoundaryCurvePair,
    CompactBox,
    DomainError,
    EvaluationError,
    FastSlowSystem,
    PiecewiseLinearCurve,
    Region,
    SampledPath,
    band_distance,
    band_distance_many,
    classify_region,
    estimate_bounds,
    find_working_box,
    validate_curves,
    validate_system,
)

BOX3 = CompactBox((-3.0, 3.0), (-3.0, 3.0))


def band_pm1():
    return BoundaryCurvePair(AffineCurve(1.0, -1.0), AffineCurve(1.0, 1.0))


class TestSampledPath:
    def test_rejects_nonincreasing_times(self):
        with pytest.raises(ValueError):
            SampledPath(np.array([0.0, 1.0, 1.0]), np.zeros(3))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            SampledPath(np.array([0.0, 1.0]), np.zeros(3))

    def test_linear_interpolation(self):
        p = SampledPath(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        assert p(0.5) == 1.0
        assert p(1.5) == 1.0

    def test_restrict_interpolates_endpoints(self):
        p = SampledPath(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        r = p.restrict(0.5, 1.5)
        assert r.times[0] == 0.5 and r.times[-1] == 1.5
        assert r.values[0] == 1.0 and r.values[-1] == 1.0


class TestCurves:
    def test_affine_lipschitz_is_abs_slope(self):
        assert AffineCurve(-2.0, 0.3).lipschitz == 2.0

    def test_piecewise_linear_lipschitz_is_max_slope(self):
        c = PiecewiseLinearCurve(np.array([0.0, 1.0, 3.0]), np.array([0.0, 2.0, 3.0]))
        assert c.lipschitz == 2.0

    def test_piecewise_rejects_decreasing(self):
        with pytest.raises(ValueError):
            PiecewiseLinearCurve(np.array([0.0, 1.0]), np.array([1.0, 0.0]))

    def test_validate_detects_ordering_violation(self):
        bad = BoundaryCurvePair(AffineCurve(1.0, 1.0), AffineCurve(1.0, -1.0))
        with pytest.raises(ValueError, match="ordering"):
            validate_curves(bad, (-2.0, 2.0))

    def test_validate_passes_for_band(self):
        validate_curves(band_pm1(), (-3.0, 3.0))

    def test_combined_constant(self):
        pair = BoundaryCurvePair(AffineCurve(0.5, -1.0), AffineCurve(2.0, 1.0))
        assert pair.combined == 2.0


class TestClassifyRegion:
    def test_band_center(self, system5):
        assert classify_region(system5, (0.0, 0.0)) is Region.M_ZERO

    def test_above_band(self, system5):
        assert classify_region(system5, (3.0, 0.0)) is Region.M_PLUS

    def test_boundary_point_closed_band(self, system5):
        assert classify_region(system5, (1.0, 0.0)) is Region.M_ZERO

    def test_out_of_domain(self):
        system = hl.make_system(hl.preset("netushil-oscillator"), box=BOX3)
        with pytest.raises(DomainError):
            classify_region(system, (10.0, 0.0))


class TestBandDistance:
    def test_above_band_exact(self, system5):
        # minimize ||(2,0) - (s+1,s)|| over s: 1/sqrt(2)
        assert band_distance(system5, (2.0, 0.0)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_inside_band_zero(self, system5):
        assert band_distance(system5, (0.0, 0.0)) == 0.0

    def test_below_band_symmetric(self, system5):
        assert band_distance(system5, (-2.0, 0.0)) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_region_consistency(self, system5):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-2.5, 2.5, size=(200, 2))
        for x, y in pts:
            d = band_distance(system5, (x, y))
            r = classify_region(system5, (x, y))
            assert (r is Region.M_ZERO) == (d == 0.0)

    def test_band_midline_is_m0(self, system5):
        for y in np.linspace(-2.0, 2.0, 11):
            mid = 0.5 * (float(system5.curves.lower(y)) + float(system5.curves.upper(y)))
            assert classify_region(system5, (mid, y)) is Region.M_ZERO

    def test_piecewise_linear_distance_matches_bruteforce(self):
        curves = BoundaryCurvePair(
            PiecewiseLinearCurve(np.array([-2.0, 0.0, 2.0]), np.array([-2.0, -1.0, 1.0])),
            PiecewiseLinearCurve(np.array([-2.0, 0.0, 2.0]), np.array([0.0, 1.0, 3.0])),
        )
        rng = np.random.default_rng(3)
        ys_dense = np.linspace(-4.0, 4.0, 40001)
        lo_dense = np.asarray(curves.lower(ys_dense))
        hi_dense = np.asarray(curves.upper(ys_dense))
        for x, y in rng.uniform(-3.5, 3.5, size=(50, 2)):
            got = float(band_distance_many(curves, np.array([x]), np.array([y]))[0])
            lo, hi = float(curves.lower(y)), float(curves.upper(y))
            if lo <= x <= hi:
                assert got == 0.0
            elif x > hi:
                brute = np.min(np.hypot(x - hi_dense, y - ys_dense))
                assert got == pytest.approx(brute, abs=1e-6)
            else:
                brute = np.min(np.hypot(x - lo_dense, y - ys_dense))
                assert got == pytest.approx(brute, abs=1e-6)


class TestEstimateBounds:
    def test_zero_system(self):
        curves = band_pm1()
        zero = FastSlowSystem(
            fast=lambda x, y: 0.0, slow=lambda x, y, t: 0.0, curves=curves,
            fast_jacobian=lambda x, y: (0.0, 0.0),
            slow_jacobian=lambda x, y, t: ((0.0, 0.0), 0.0),
        )
        b = estimate_bounds(zero, BOX3, grid_resolution=11)
        assert b.c_f == 0.0 and b.c_g == 0.0 and b.c_df == 0.0 and b.c_fg == 0.0
        assert b.c_m == pytest.approx(1.1 * math.hypot(3.0, 3.0))

    def test_showcase_slow_bound(self, system5):
        # sup over [-3,3]^2 of |a sin + b x + c y| = 1 + 3 + 0.6 = 4.6
        b = estimate_bounds(system5, BOX3, grid_resolution=41)
        assert b.c_g >= 4.6
        assert b.c_g <= 1.1 * 4.6 + 1e-9

    def test_linear_fast_gradient(self):
        curves = band_pm1()
        sys_lin = FastSlowSystem(
            fast=lambda x, y: y - x if abs(y - x) > 1 else 0.0,
            slow=lambda x, y, t: 0.0,
            curves=curves,
        )
        b = estimate_bounds(sys_lin, BOX3, grid_resolution=21)
        assert b.c_df >= math.sqrt(2) - 1e-6

    def test_nonfinite_raises_with_point(self):
        curves = band_pm1()
        bad = FastSlowSystem(
            fast=lambda x, y: math.inf if x > 2.9 else 0.0,
            slow=lambda x, y, t: 0.0,
            curves=curves,
        )
        with pytest.raises(EvaluationError, match="non-finite"):
            estimate_bounds(bad, BOX3, grid_resolution=11)

    def test_refinement_bounded_by_inflation(self, system5):
        coarse = estimate_bounds(system5, BOX3, grid_resolution=21)
        fine = estimate_bounds(system5, BOX3, grid_resolution=81)
        for name in ("c_f", "c_g", "c_df", "c_dg", "c_m", "lipschitz"):
            lo, hi = getattr(coarse, name), getattr(fine, name)
            if lo > 0:
                assert hi <= lo * coarse.inflation * 1.0000001

    def test_grid_resolution_validated(self, system5):
        with pytest.raises(ValueError):
            estimate_bounds(system5, BOX3, grid_resolution=1)


class TestWorkingBoxAndValidation:
    def test_find_working_box_contains_run(self, system5):
        box = find_working_box(system5, 0.1, (2.0, 0.3), 3.0)
        assert box.contains(2.0, 0.3)

    def test_validate_system_passes_showcase(self, system5):
        validate_system(system5, BOX3)

    def test_validate_system_catches_bad_jacobian(self):
        params = hl.preset("netushil-oscillator")
        good = hl.make_system(params)
        bad = FastSlowSystem(
            fast=good.fast,
            slow=good.slow,
            curves=good.curves,
            fast_jacobian=lambda x, y: (1.0, 1.0),  # wrong sign off band
            slow_jacobian=good.slow_jacobian,
        )
        with pytest.raises(ValueError, match="jacobian"):
            validate_system(bad, BOX3)

    def test_validate_system_catches_sign_violation(self):
        curves = band_pm1()
        bad = FastSlowSystem(
            fast=lambda x, y: 1.0, slow=lambda x, y, t: 0.0, curves=curves
        )
        with pytest.raises(ValueError, match="band"):
            validate_system(bad, BOX3)
