import numpy as np
import pytest

import hystlab as hl
from hystlab.core import SampledPath
from hystlab.integrate import EpsRun
from hystlab.play import play_evaluate
from hystlab.projection import gap_norms, project_run, projection_lipschitz_estimate


def fake_run(times, xs, ys, eps=0.1):
    return EpsRun(eps, SampledPath(times, xs), SampledPath(times, ys), len(times), 0, 0.0)


class TestProjectRun:
    def test_inside_band_identity(self, system5):
        t = np.linspace(0, 1, 20)
        run = fake_run(t, 0.3 * np.ones(20), np.zeros(20))
        p = project_run(run, system5.curves)
        assert np.array_equal(p.values, run.x.values)

    def test_clamp_constant(self, system5):
        t = np.linspace(0, 1, 20)
        run = fake_run(t, 3.0 * np.ones(20), np.zeros(20))
        p = project_run(run, system5.curves)
        assert np.all(p.values == 1.0)

    def test_sup_gap_decreases_along_sweep(self, system5, sweep_runs):
        # the initial-layer spike is t=0 only; compare after the first unit
        sups = []
        for eps in (0.5, 0.2, 0.1, 0.05, 0.02, 0.01):
            run = sweep_runs[eps]
            p = project_run(run, system5.curves)
            m = run.times >= 1.0
            sups.append(np.max(np.abs(run.x.values[m] - p.values[m])))
        assert all(b <= a * 1.05 for a, b in zip(sups, sups[1:]))

    def test_projection_always_band_confined(self, system5, sweep_runs):
        for run in sweep_runs.values():
            p = project_run(run, system5.curves)
            lo = np.asarray(system5.curves.lower(run.y.values))
            hi = np.asarray(system5.curves.upper(run.y.values))
            assert np.all(p.values >= lo) and np.all(p.values <= hi)

    def test_gap_zero_iff_in_band(self, system5, sweep_runs):
        run = sweep_runs[0.1]
        p = project_run(run, system5.curves)
        lo = np.asarray(system5.curves.lower(run.y.values))
        hi = np.asarray(system5.curves.upper(run.y.values))
        in_band = (run.x.values >= lo) & (run.x.values <= hi)
        assert np.array_equal(run.x.values == p.values, in_band)


class TestLipschitzEstimate:
    def test_constant(self):
        p = SampledPath(np.linspace(0, 1, 10), np.ones(10))
        assert projection_lipschitz_estimate(p) == 0.0

    def test_unit_ramp(self):
        t = np.linspace(0, 1, 11)
        assert projection_lipschitz_estimate(SampledPath(t, t)) == pytest.approx(1.0)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            projection_lipschitz_estimate(SampledPath(np.array([0.0]), np.array([1.0])))

    def test_eps_uniformity_proxy(self, system5, sweep_runs):
        ests = []
        for eps in (0.1, 0.05, 0.02, 0.01):
            p = project_run(sweep_runs[eps], system5.curves)
            ests.append(projection_lipschitz_estimate(p))
        assert max(ests) <= 1.2 * min(ests)


class TestGapNorms:
    def test_inside_band_zero(self, system5):
        t = np.linspace(0, 1, 30)
        run = fake_run(t, np.zeros(30), np.zeros(30))
        g = gap_norms(run, project_run(run, system5.curves))
        assert g.sup_gap == 0.0 and g.lq_gap == 0.0

    def test_constant_gap_analytic(self, system5):
        t = np.linspace(0.0, 2.0, 400)
        run = fake_run(t, 1.5 * np.ones_like(t), np.zeros_like(t))
        p = project_run(run, system5.curves)  # p = 1, gap d = 0.5 on [0, 2]
        g = gap_norms(run, p, q=2.0)
        assert g.sup_gap == pytest.approx(0.5)
        assert g.lq_gap == pytest.approx(0.5 * 2.0 ** 0.5, rel=1e-9)

    def test_l2_gap_shrinks_with_eps(self, system5, sweep_runs):
        g_big = gap_norms(sweep_runs[0.1], project_run(sweep_runs[0.1], system5.curves))
        g_small = gap_norms(sweep_runs[0.01], project_run(sweep_runs[0.01], system5.curves))
        assert g_small.lq_gap < g_big.lq_gap

    def test_grid_mismatch_rejected(self, system5):
        t = np.linspace(0, 1, 30)
        run = fake_run(t, np.zeros(30), np.zeros(30))
        with pytest.raises(ValueError):
            gap_norms(run, SampledPath(np.linspace(0, 1, 31), np.zeros(31)))


class TestPlayVsProjection:
    def test_mutual_l2_distance_decreases(self, system5, sweep_runs):
        """The discrete play of y_eps and the projection p_eps approach each
        other in L2 along the sweep (both converge to the same limit)."""
        dists = []
        for eps in (0.1, 0.02, 0.01):
            run = sweep_runs[eps]
            p = project_run(run, system5.curves)
            play = play_evaluate(run.y, run.x.values[0], system5.curves)
            diff = SampledPath(run.times, play.values - p.values)
            dists.append(hl.norm_Lq(diff, 2.0))
        assert dists[-1] < dists[0]
