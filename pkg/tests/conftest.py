"""Shared fixtures: the showcase system, reference runs, sweep products.

Everything expensive is session-scoped so the acceptance criteria and the
module tests share one set of runs.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import pytest

import hystlab as hl
from hystlab import patched as pt
from hystlab.core import CompactBox, estimate_bounds
from hystlab.integrate import IntegratorConfig, integrate
from hystlab.limit import solve_limit

PRESET = hl.preset("netushil-oscillator")
W0 = (2.5, 0.5)
T_SWEEP = 20.0
SWEEP_EPS = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)
STUDY_BOX = CompactBox((-3.0, 3.0), (-3.0, 3.0))

PATCHED_EPS = (0.2, 0.3, 0.4)
PATCHED_T = 1.5
PATCHED_DELTA = 0.25
PATCHED_W0 = (2.0, 0.3)


@pytest.fixture(scope="session")
def system5():
    return hl.make_system(PRESET)


@pytest.fixture(scope="session")
def run200(system5):
    """T=200 eps=0.01 reference run (acceptance criterion 1)."""
    return integrate(
        system5, PRESET.epsilon, W0, 0.0, 200.0, IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8)
    )


@pytest.fixture(scope="session")
def sweep_runs(system5):
    """Per-epsilon runs of the T=20 sweep, keyed by epsilon."""
    cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8)
    return {
        eps: integrate(system5, eps, W0, 0.0, T_SWEEP, cfg) for eps in SWEEP_EPS
    }


@pytest.fixture(scope="session")
def limit_ref(system5):
    return solve_limit(system5.slow, system5.curves, W0[0], W0[1], T_SWEEP, 1e-4 * T_SWEEP)


@pytest.fixture(scope="session")
def sweep_table(system5, limit_ref):
    return hl.epsilon_sweep(
        system5,
        system5.curves,
        W0,
        T_SWEEP,
        list(SWEEP_EPS),
        2.0,
        run_config=IntegratorConfig(rel_tol=1e-8, abs_tol=1e-8),
        limit_reference=limit_ref,
    )


@pytest.fixture(scope="session")
def patched_cases():
    """Patched builds + exact references + bound reports at moderate eps."""
    cases = {}
    for eps in PATCHED_EPS:
        params = dataclasses.replace(PRESET, epsilon=eps)
        system = hl.make_system(params, box=STUDY_BOX)
        bounds = estimate_bounds(system, STUDY_BOX, t_horizon=PATCHED_T)
        collar = pt.compute_collar_constants(system, STUDY_BOX, PATCHED_DELTA)
        sched = pt.theta_schedule(eps, PATCHED_T, bounds.lipschitz)
        assert not sched.floored
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            solution = pt.build_patched_solution(
                system,
                eps,
                PATCHED_W0,
                PATCHED_DELTA,
                sched.value,
                PATCHED_T,
                bounds=bounds,
                collar=collar,
                admissibility="warn",
            )
        exact = integrate(
            system, eps, PATCHED_W0, 0.0, PATCHED_T,
            IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10),
        )
        report = pt.evaluate_lemma45_bounds(
            solution.schedule,
            bounds,
            system.curves,
            collar.f_m,
            eps,
            t_final=PATCHED_T,
            exact_run=(solution, exact),
        )
        cases[eps] = {
            "system": system,
            "bounds": bounds,
            "collar": collar,
            "theta": sched,
            "solution": solution,
            "exact": exact,
            "report": report,
        }
    return cases


@pytest.fixture(scope="session")
def bifurcation_rows():
    """The c = -0.1 / +0.1 amplitude comparison (acceptance criterion 6).

    Settle/measure windows derived from the reference run: the c=+0.1
    relaxation cycle has half-period ~80 time units, so the measure window
    must cover a full cycle.
    """
    from hystlab.analysis import bifurcation_sweep

    return bifurcation_sweep(
        PRESET,
        [-0.1, 0.1],
        t_settle=100.0,
        t_measure=160.0,
        w0=(2.0, 0.5),
        run_config=IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6),
    )


@pytest.fixture(scope="session")
def bifurcation_runs():
    """The raw runs behind criterion 6, for the cross-cutting invariants."""
    runs = {}
    for c in (-0.1, 0.1):
        params = PRESET.with_c(c)
        system = hl.make_system(params)
        runs[c] = (
            system,
            integrate(
                system, params.epsilon, (2.0, 0.5), 0.0, 260.0,
                IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6),
            ),
        )
    return runs
