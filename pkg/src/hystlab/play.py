"""Discrete generalized play operator and its defining property checks.

The discrete operator is the incremental clamp recursion

    x[0]   = min{max{F_-(y[0]), x0}, F_+(y[0])}
    x[k+1] = min{max{x[k], F_-(y[k+1])}, F_+(y[k+1])}

which is the exact play of the piecewise-affine interpolant of the input, so
the variational inequality, the Volterra property and rate-independence hold
at machine precision rather than up to a discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundaryCurvePair, SampledPath

__all__ = [
    "PlayState",
    "play_init",
    "play_step",
    "play_evaluate",
    "VIReport",
    "check_variational_inequality",
    "check_rate_independence",
    "check_volterra",
]


@dataclass(frozen=True)
class PlayState:
    """Current output value plus the curve pair; the operator's whole memory."""

    current: float
    curves: BoundaryCurvePair


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def play_init(x0: float, y0: float, curves: BoundaryCurvePair) -> PlayState:
    lo = float(curves.lower(y0))
    hi = float(curves.upper(y0))
    return PlayState(_clamp(float(x0), lo, hi), curves)


def play_step(state: PlayState, y_new: float) -> PlayState:
    lo = float(state.curves.lower(y_new))
    hi = float(state.curves.upper(y_new))
    return PlayState(_clamp(state.current, lo, hi), state.curves)


def play_evaluate(input: SampledPath, x0: float, curves: BoundaryCurvePair) -> SampledPath:
    """Run the clamp recursion along the whole input path."""
    ys = input.values
    if ys.size == 0:
        raise ValueError("empty input path")
    lo = np.asarray(curves.lower(ys), dtype=float)
    hi = np.asarray(curves.upper(ys), dtype=float)
    out = np.empty_like(ys)
    cur = _clamp(float(x0), float(lo[0]), float(hi[0]))
    out[0] = cur
    for k in range(1, ys.size):
        cur = _clamp(cur, float(lo[k]), float(hi[k]))
        out[k] = cur
    return SampledPath(input.times, out)


@dataclass(frozen=True)
class VIReport:
    max_band_violation: float
    max_vi_violation: float


def check_variational_inequality(
    x: SampledPath,
    y: SampledPath,
    curves: BoundaryCurvePair,
    tol: float = 0.0,
) -> VIReport:
    """Quantify how badly (x, y) violates the play variational inequality.

    Band violation is the pointwise distance of x[k] to [F_-(y[k]), F_+(y[k])].
    The VI over a grid cell reduces to its two extreme test points, so with
    forward differences a positive increment is admissible only while x sits on
    the lower curve (within ``tol``) and a negative one only on the upper
    curve; the violation rate is |dx| * (distance from the active curve) / dt,
    evaluated at the cell's forward endpoint.
    """
    if x.times.shape != y.times.shape or not np.allclose(x.times, y.times, rtol=0, atol=0):
        raise ValueError("x and y must share one grid")
    lo = np.asarray(curves.lower(y.values), dtype=float)
    hi = np.asarray(curves.upper(y.values), dtype=float)
    xv = x.values
    band = np.maximum(np.maximum(lo - xv, xv - hi), 0.0)
    max_band = float(np.max(band))

    if len(x) < 2:
        return VIReport(max_band, 0.0)
    dt = np.diff(x.times)
    dx = np.diff(xv)
    dist_lower = xv[1:] - lo[1:]
    dist_upper = hi[1:] - xv[1:]
    up = np.maximum(dx, 0.0) * np.maximum(dist_lower - tol, 0.0)
    down = np.maximum(-dx, 0.0) * np.maximum(dist_upper - tol, 0.0)
    max_vi = float(np.max(np.maximum(up, down) / dt))
    return VIReport(max_band, max_vi)


def _invert_monotone(phi, target: float, lo: float, hi: float) -> float:
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if phi(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_rate_independence(
    input: SampledPath,
    x0: float,
    curves: BoundaryCurvePair,
    reparam,
) -> float:
    """Max deviation |play(y o phi)(t_k) - play(y)(phi(t_k))| over the warped
    path's grid; exactly zero for the discrete operator, which depends only on
    the value sequence.

    ``reparam`` is either a strictly monotone callable phi fixing the
    endpoints -- the warped path is then evaluated on the grid phi^{-1}(t_k),
    where the composition reproduces the original sample sequence -- or a
    non-decreasing integer index map onto {0, .., n-1} (stutters allowed,
    skips rejected: a reparametrization traverses every intermediate sample).
    """
    t = input.times
    n = t.size
    if callable(reparam):
        lo_v, hi_v = float(reparam(t[0])), float(reparam(t[-1]))
        if abs(lo_v - t[0]) > 1e-9 * (1 + abs(t[0])) or abs(hi_v - t[-1]) > 1e-9 * (
            1 + abs(t[-1])
        ):
            raise ValueError("reparam must fix the endpoints")
        u = np.array(
            [t[0]]
            + [_invert_monotone(reparam, float(tk), float(t[0]), float(t[-1])) for tk in t[1:-1]]
            + [t[-1]]
        )
        if np.any(np.diff(u) <= 0):
            raise ValueError("reparam must be strictly monotone")
        idx = np.arange(n)
        warped_input = SampledPath(u, input.values)
    else:
        idx = np.asarray(reparam, dtype=int)
        if idx.ndim != 1 or idx.size < n:
            raise ValueError("index reparam must cover the grid")
        if np.any(np.diff(idx) < 0):
            raise ValueError("reparam must be monotone")
        if not np.array_equal(np.unique(idx), np.arange(n)):
            raise ValueError("reparam must map onto the whole grid (no skips)")
        u = np.linspace(t[0], t[-1], idx.size)
        warped_input = SampledPath(u, input.values[idx])

    base = play_evaluate(input, x0, curves)
    warped = play_evaluate(warped_input, x0, curves)
    return float(np.max(np.abs(warped.values - base.values[idx])))


def check_volterra(
    input: SampledPath,
    x0: float,
    curves: BoundaryCurvePair,
    cut_index: int,
    alteration: float = 10.0,
) -> float:
    """Max output deviation on [0, t_cut] after altering the input beyond the cut."""
    n = len(input)
    if not 0 <= cut_index < n:
        raise ValueError("cut_index out of range")
    altered = input.values.copy()
    altered[cut_index + 1 :] = altered[cut_index + 1 :] + alteration
    a = play_evaluate(input, x0, curves)
    b = play_evaluate(SampledPath(input.times, altered), x0, curves)
    return float(np.max(np.abs(a.values[: cut_index + 1] - b.values[: cut_index + 1])))
