"""Vertical projection of a run onto the band and the norms built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundaryCurvePair, FastSlowSystem, SampledPath
from .integrate import EpsRun

__all__ = [
    "project_run",
    "projection_lipschitz_estimate",
    "GapNorms",
    "gap_norms",
    "sign_condition_max",
]


def project_run(run: EpsRun, curves: BoundaryCurvePair) -> SampledPath:
    """Pointwise clamp of the fast coordinate into [F_-(y), F_+(y)]."""
    lo = np.asarray(curves.lower(run.y.values), dtype=float)
    hi = np.asarray(curves.upper(run.y.values), dtype=float)
    return SampledPath(run.times, np.minimum(np.maximum(run.x.values, lo), hi))


def projection_lipschitz_estimate(p: SampledPath) -> float:
    """Max raw difference quotient |dp/dt| over grid cells; spikes unfiltered."""
    if len(p) < 2:
        raise ValueError("need at least two samples")
    return float(np.max(np.abs(np.diff(p.values) / np.diff(p.times))))


@dataclass(frozen=True)
class GapNorms:
    sup_gap: float
    lq_gap: float
    q: float


def gap_norms(run: EpsRun, p: SampledPath, q: float = 2.0) -> GapNorms:
    """Sup and trapezoid L^q norms of x_eps - p_eps on the run's own grid."""
    if run.x.times.shape != p.times.shape:
        raise ValueError("run and projection grids must coincide")
    gap = np.abs(run.x.values - p.values)
    lq = float(np.trapezoid(gap**q, run.times) ** (1.0 / q))
    return GapNorms(float(np.max(gap)), lq, q)


def sign_condition_max(run: EpsRun, system: FastSlowSystem) -> float:
    """Largest value of f(x, y) * sign(x - p) along the run; <= 0 means the
    attraction sign condition holds at every accepted grid point."""
    p = project_run(run, system.curves)
    worst = -np.inf
    for x, y, pv in zip(run.x.values, run.y.values, p.values):
        s = 0.0 if x == pv else (1.0 if x > pv else -1.0)
        worst = max(worst, system.fast(float(x), float(y)) * s)
    return float(worst)
