"""Singular-limit coupled system: dy/dt = g(x, y, t) with x the generalized
play of y.

Time stepping is a frozen-x splitting: one classical Runge-Kutta step for y
with x held at its current value, then one exact play update of x from the
new y. The play update solves the variational inequality exactly given
y[k+1], so the splitting is first-order accurate overall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoundaryCurvePair, SampledPath
from .play import play_init, play_step

__all__ = ["LimitRun", "solve_limit", "UniquenessProbe", "uniqueness_probe"]


@dataclass(frozen=True)
class LimitRun:
    x: SampledPath
    y: SampledPath


def solve_limit(
    system_g,
    curves: BoundaryCurvePair,
    x0: float,
    y0: float,
    t_final: float,
    dt: float,
) -> LimitRun:
    """March the play-coupled limit system on a uniform grid of step dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = max(1, int(round(t_final / dt)))
    times = np.linspace(0.0, n * dt, n + 1)
    ys = np.empty(n + 1)
    xs = np.empty(n + 1)
    state = play_init(x0, y0, curves)
    y = float(y0)
    ys[0] = y
    xs[0] = state.current
    for k in range(n):
        t = times[k]
        x = state.current
        k1 = system_g(x, y, t)
        k2 = system_g(x, y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = system_g(x, y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = system_g(x, y + dt * k3, t + dt)
        for v in (k1, k4):
            if not math.isfinite(v):
                raise ValueError(f"g returned a non-finite value near t={t:.6g}")
        y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        state = play_step(state, y)
        ys[k + 1] = y
        xs[k + 1] = state.current
    return LimitRun(SampledPath(times, xs), SampledPath(times, ys))


@dataclass(frozen=True)
class UniquenessProbe:
    times: np.ndarray
    deviation: np.ndarray
    fitted_rate: float


def uniqueness_probe(
    system_g,
    curves: BoundaryCurvePair,
    x0: float,
    y0: float,
    t_final: float,
    dt: float,
    perturbation: float,
) -> UniquenessProbe:
    """Deviation growth between the limit run and a perturbed-initial-data run.

    The Gronwall contraction behind uniqueness allows at most exponential
    growth; the probe reports the deviation profile and the fitted
    exponential rate of its envelope (0 when the deviation never grows).
    """
    if abs(perturbation) > 1e-6:
        raise ValueError("perturbation must be small (|p| <= 1e-6)")
    base = solve_limit(system_g, curves, x0, y0, t_final, dt)
    pert = solve_limit(system_g, curves, x0 + perturbation, y0 + perturbation, t_final, dt)
    dev = np.maximum(
        np.abs(base.x.values - pert.x.values), np.abs(base.y.values - pert.y.values)
    )
    # envelope fit: slope of log deviation where it is strictly positive
    t = base.x.times
    pos = dev > 0
    if np.count_nonzero(pos) >= 2 and dev[pos].max() > dev[pos].min():
        coeffs = np.polyfit(t[pos], np.log(dev[pos]), 1)
        rate = float(max(coeffs[0], 0.0))
    else:
        rate = 0.0
    return UniquenessProbe(t, dev, rate)
