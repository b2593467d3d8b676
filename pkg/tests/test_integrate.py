import math

import numpy as np
import pytest

import hystlab as hl
from hystlab.core import CompactBox, band_distance_many
from hystlab.integrate import (
    BoxEscapeError,
    IntegratorConfig,
    StiffnessError,
    integrate,
    residual_check,
)
from hystlab.projection import project_run, sign_condition_max


def relaxation_system():
    """g = 0, showcase fast field; closed form off the band."""
    return hl.make_system(hl.OscillatorParams(0.0, 0.0, 0.0, 1.0, 0.1))


class TestConfig:
    def test_tolerances_positive(self):
        with pytest.raises(ValueError):
            IntegratorConfig(rel_tol=0.0)

    def test_step_ordering(self):
        with pytest.raises(ValueError):
            IntegratorConfig(min_step=1.0, max_step=0.1)

    def test_method_names(self):
        with pytest.raises(ValueError):
            IntegratorConfig(method="rk4")


class TestIntegrate:
    def test_all_fields_zero_constant_trajectory(self):
        system = hl.make_system(hl.OscillatorParams(0.0, 0.0, 0.0, 1.0, 0.1))
        run = integrate(system, 0.1, (0.2, 0.1), 0.0, 5.0, IntegratorConfig())
        assert np.all(run.x.values == 0.2)
        assert np.all(run.y.values == 0.1)

    def test_linear_relaxation_closed_form(self):
        # compare at the accepted grid points nearest 10 checkpoints: the
        # solution there carries integrator error only, not the O(h^2)
        # interpolation error of the linear dense output
        system = relaxation_system()
        eps = 0.1
        x0, y0 = 3.0, 0.0
        run = integrate(system, eps, (x0, y0), 0.0, 1.0, IntegratorConfig())
        for t_check in np.linspace(0.1, 1.0, 10):
            k = int(np.argmin(np.abs(run.times - t_check)))
            t = float(run.times[k])
            expect = (y0 + 1) + (x0 - y0 - 1) * math.exp(-t / eps)
            assert abs(run.x.values[k] - expect) <= 1e-6 * abs(expect)
        assert np.all(run.y.values == y0)

    def test_showcase_band_attraction(self, system5):
        run = integrate(
            system5, 0.01, (2.5, 0.5), 0.0, 1.0, IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8)
        )
        d_end = band_distance_many(system5.curves, run.x.values[-1:], run.y.values[-1:])[0]
        assert d_end < 1e-2
        # agreement with a 10x tighter reference at checkpoints (tolerance
        # covers the linear-interpolation error of both dense outputs)
        ref = integrate(
            system5, 0.01, (2.5, 0.5), 0.0, 1.0, IntegratorConfig(rel_tol=1e-9, abs_tol=1e-9)
        )
        for t in np.linspace(0.2, 1.0, 5):
            assert abs(float(run.x(t)) - float(ref.x(t))) < 1e-4
            assert abs(float(run.y(t)) - float(ref.y(t))) < 1e-4

    def test_fast_step_cap_off_band(self, system5):
        run = integrate(
            system5, 0.01, (2.5, 0.5), 0.0, 5.0, IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6)
        )
        h = np.diff(run.times)
        lo = np.asarray(system5.curves.lower(run.y.values))
        hi = np.asarray(system5.curves.upper(run.y.values))
        off = (run.x.values > hi) | (run.x.values < lo)
        assert np.all(h[off[:-1]] <= 0.005 + 1e-12)

    def test_stiffness_error_advises_implicit(self):
        system = relaxation_system()
        cfg = IntegratorConfig(min_step=0.2, max_step=0.5)
        with pytest.raises(StiffnessError, match="implicit"):
            integrate(system, 1e-4, (3.0, 0.0), 0.0, 1.0, cfg)

    def test_box_escape_error(self):
        box = CompactBox((-1.0, 1.0), (-1.0, 1.0))
        system = hl.make_system(hl.OscillatorParams(1.0, 0.0, 0.5, 1.0, 0.1), box=box)
        with pytest.raises(BoxEscapeError):
            integrate(system, 0.1, (0.0, 0.9), 0.0, 20.0, IntegratorConfig())

    def test_implicit_trapezoid_matches_closed_form(self):
        system = relaxation_system()
        eps = 1e-3
        cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8, method="implicit-trapezoid")
        run = integrate(system, eps, (3.0, 0.0), 0.0, 0.05, cfg)
        t = 0.05
        expect = 1.0 + 2.0 * math.exp(-t / eps)
        assert abs(float(run.x(t)) - expect) < 1e-6

    def test_invalid_time_interval(self, system5):
        with pytest.raises(ValueError):
            integrate(system5, 0.1, (0.0, 0.0), 1.0, 1.0, IntegratorConfig())
        with pytest.raises(ValueError):
            integrate(system5, -0.1, (0.0, 0.0), 0.0, 1.0, IntegratorConfig())


class TestResidualCheck:
    def test_constant_run_zero_defect(self):
        system = hl.make_system(hl.OscillatorParams(0.0, 0.0, 0.0, 1.0, 0.1))
        run = integrate(system, 0.1, (0.0, 0.0), 0.0, 2.0, IntegratorConfig())
        rep = residual_check(run, system, 0.1)
        assert rep.fast_defect == 0.0 and rep.slow_defect == 0.0

    def test_relaxation_defect_matches_analytic_prediction(self):
        # the midpoint defect of the linear interpolant of x(t) = 1 + D e^{-t/eps}
        # over a cell [t, t+h] is D e^{-t/eps} |(e^{-u}-1)/u + (1+e^{-u})/2| with
        # u = h/eps; compare the measured maximum against that prediction
        system = relaxation_system()
        eps = 0.1
        run = integrate(system, eps, (3.0, 0.0), 0.0, 1.0, IntegratorConfig())
        rep = residual_check(run, system, eps)
        t = run.times
        h = np.diff(t)
        u = h / eps
        pred = 2.0 * np.exp(-t[:-1] / eps) * np.abs(
            eps * (np.exp(-u) - 1.0) / h + 0.5 * (1.0 + np.exp(-u))
        )
        assert rep.fast_defect <= np.max(pred) * 1.05
        assert rep.fast_defect >= np.max(pred) * 0.5

    def test_defect_scales_down_with_tolerance(self):
        system = relaxation_system()
        eps = 0.1
        r1 = residual_check(
            integrate(system, eps, (3.0, 0.0), 0.0, 1.0, IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6)),
            system,
            eps,
        )
        r2 = residual_check(
            integrate(system, eps, (3.0, 0.0), 0.0, 1.0, IntegratorConfig(rel_tol=5e-7, abs_tol=5e-7)),
            system,
            eps,
        )
        ratio = r2.fast_defect / r1.fast_defect
        # halving the tolerance halves the defect within a factor of 4
        assert 0.5 / 4.0 <= ratio <= 0.5 * 4.0


class TestRunInvariants:
    def test_sign_condition_along_trajectory(self, system5, sweep_runs):
        for run in sweep_runs.values():
            assert sign_condition_max(run, system5) <= 0.0

    def test_boundedness_proxy_over_decade(self, system5, sweep_runs):
        # one decade of eps: sup|y| and sup|x - p| vary by less than 20%
        decade = [0.1, 0.05, 0.02, 0.01]
        sup_y = []
        sup_gap = []
        for eps in decade:
            run = sweep_runs[eps]
            p = project_run(run, system5.curves)
            sup_y.append(np.max(np.abs(run.y.values)))
            sup_gap.append(np.max(np.abs(run.x.values - p.values)))
        assert max(sup_y) <= 1.2 * min(sup_y)
        assert max(sup_gap) <= 1.2 * min(sup_gap)

    def test_monotone_attraction_without_forcing(self):
        system = relaxation_system()
        run = integrate(system, 0.05, (2.5, 0.3), 0.0, 2.0, IntegratorConfig())
        d = band_distance_many(system.curves, run.x.values, run.y.values)
        assert np.all(np.diff(d) <= 1e-12)
