"""Piecewise-linear forced oscillator: the packaged showcase system.

Fast field (band curves F_pm(y) = y +- 1):

    f(x, y) = y - x - 1   if x < y - 1
            = y - x + 1   if x > y + 1
            = 0           otherwise

Slow field, written on the simulation clock with the forcing frequency as the
single source of truth:

    g(x, y, t) = a sin(2 pi omega t) + b x + c y

so omega = 1 recovers the plain sin(2 pi t) form. The slow subsystem obtained
by restricting x to one boundary curve is solved in closed form; its mean
value Y_pm is the averaged equilibrium the long-run dynamics oscillates
around. Solutions stay bounded iff b + c < 0 (the borderline b + c = 0 is
excluded).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    AffineCurve,
    BoundaryCurvePair,
    CompactBox,
    FastSlowSystem,
    SampledPath,
)
from .integrate import EpsRun

__all__ = [
    "BoundednessError",
    "OscillatorParams",
    "PRESETS",
    "preset",
    "make_system",
    "oscillator_curves",
    "SlowBranchSolution",
    "slow_subsystem_exact",
    "verify_slow_closed_form",
    "AveragedEquilibria",
    "averaged_equilibria",
    "DwellSegment",
    "dwell_segments",
    "dwell_time_average",
]

logger = logging.getLogger(__name__)


class BoundednessError(ValueError):
    """b + c >= 0: the slow subsystem is unbounded (borderline excluded)."""


@dataclass(frozen=True)
class OscillatorParams:
    a: float        # forcing amplitude
    b: float        # x-coupling
    c: float        # y-feedback
    omega: float    # forcing frequency on the simulation clock
    epsilon: float  # time-scale ratio

    @property
    def bounded(self) -> bool:
        return self.b + self.c < 0

    def with_c(self, c: float) -> "OscillatorParams":
        return replace(self, c=c)


PRESETS: dict[str, OscillatorParams] = {
    "netushil-oscillator": OscillatorParams(a=1.0, b=-1.0, c=0.2, omega=4.0, epsilon=0.01),
}


def preset(name: str) -> OscillatorParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def oscillator_curves() -> BoundaryCurvePair:
    return BoundaryCurvePair(lower=AffineCurve(1.0, -1.0), upper=AffineCurve(1.0, 1.0))


def make_system(
    params: OscillatorParams,
    x_clamp: float | None = None,
    box: CompactBox | None = None,
) -> FastSlowSystem:
    """Build the FastSlowSystem, with jacobians.

    ``x_clamp`` realizes the growth cutoff of the x-coupling: inside g the
    fast coordinate is clipped to [-x_clamp, x_clamp]. The clamp should never
    activate on a well-chosen working box; if it does, a warning is logged
    once.
    """
    a, b, c, omega = params.a, params.b, params.c, params.omega
    w = 2.0 * math.pi * omega
    clamp_seen = [False]

    def fast(x: float, y: float) -> float:
        if x > y + 1.0:
            return y - x + 1.0
        if x < y - 1.0:
            return y - x - 1.0
        return 0.0

    def fast_jacobian(x: float, y: float) -> tuple[float, float]:
        if x > y + 1.0 or x < y - 1.0:
            return (-1.0, 1.0)
        return (0.0, 0.0)

    if x_clamp is None:

        def slow(x: float, y: float, t: float) -> float:
            return a * math.sin(w * t) + b * x + c * y

    else:
        lim = float(x_clamp)

        def slow(x: float, y: float, t: float) -> float:
            if x > lim or x < -lim:
                if not clamp_seen[0]:
                    clamp_seen[0] = True
                    logger.warning(
                        "x-coupling clamp activated at |x|=%g (limit %g)", abs(x), lim
                    )
                x = lim if x > lim else -lim
            return a * math.sin(w * t) + b * x + c * y

    def slow_jacobian(x: float, y: float, t: float):
        return ((b, c), a * w * math.cos(w * t))

    return FastSlowSystem(
        fast=fast,
        slow=slow,
        curves=oscillator_curves(),
        fast_jacobian=fast_jacobian,
        slow_jacobian=slow_jacobian,
        box=box,
    )


# ---------------------------------------------------------------------------
# closed-form slow subsystem on one boundary curve
# ---------------------------------------------------------------------------


def _branch_sign(branch: str) -> float:
    # restriction to x = F_pm(y) = y +- 1 turns b x into (b + c) y +- b
    if branch == "plus":
        return 1.0
    if branch == "minus":
        return -1.0
    raise ValueError("branch must be 'plus' or 'minus'")


@dataclass(frozen=True)
class SlowBranchSolution:
    """y(t) = y_mean + y_exp * e^{(b+c)(t - t0)} + harmonic(t) on one branch.

    With t0 = 0 the prefactor y_exp is the classical one built from y(0) = y0;
    a nonzero t0 anchors the same closed form at y(t0) = y0, which is what
    dwell-segment comparisons against a running simulation need.
    """

    params: OscillatorParams
    branch: str
    y0: float
    t0: float
    y_mean: float   # Y_pm = -+ b / (b+c)
    y_exp: float    # exponential prefactor Y_e

    def harmonic(self, t):
        p = self.params
        s = p.b + p.c
        w = 2.0 * math.pi * p.omega
        denom = s * s + w * w
        t = np.asarray(t, dtype=float)
        out = -(p.a * s * np.sin(w * t) + p.a * w * np.cos(w * t)) / denom
        return out if out.ndim else float(out)

    def value(self, t):
        p = self.params
        t_arr = np.asarray(t, dtype=float)
        out = self.y_mean + self.y_exp * np.exp((p.b + p.c) * (t_arr - self.t0)) + self.harmonic(t_arr)
        return out if out.ndim else float(out)

    def derivative(self, t):
        p = self.params
        s = p.b + p.c
        w = 2.0 * math.pi * p.omega
        denom = s * s + w * w
        t = np.asarray(t, dtype=float)
        dharm = -(p.a * s * w * np.cos(w * t) - p.a * w * w * np.sin(w * t)) / denom
        out = s * self.y_exp * np.exp(s * (t - self.t0)) + dharm
        return out if out.ndim else float(out)

    def ode_rhs(self, y, t):
        p = self.params
        w = 2.0 * math.pi * p.omega
        sign = _branch_sign(self.branch)
        return p.a * np.sin(w * t) + (p.b + p.c) * y + sign * p.b

    def residual(self, t):
        """Pointwise defect of the closed form in its own ODE."""
        return self.derivative(t) - self.ode_rhs(self.value(t), t)


def slow_subsystem_exact(
    params: OscillatorParams, y0: float, branch: str, t0: float = 0.0
) -> SlowBranchSolution:
    s = params.b + params.c
    if s == 0:
        raise BoundednessError("borderline case b + c = 0 is excluded")
    sign = _branch_sign(branch)
    w = 2.0 * math.pi * params.omega
    denom = s * s + w * w
    y_mean = -sign * params.b / s
    if t0 == 0.0:
        y_exp = sign * params.b / s + params.a * w / denom + y0
    else:
        sol0 = SlowBranchSolution(params, branch, y0, t0, y_mean, 0.0)
        y_exp = y0 - y_mean - sol0.harmonic(t0)
    return SlowBranchSolution(params, branch, y0, t0, y_mean, y_exp)


def verify_slow_closed_form(
    params: OscillatorParams,
    y0: float,
    branch: str,
    t_final: float,
    dt: float,
) -> float:
    """Sup deviation between the closed form and a fixed-step RK4 integration
    of the branch ODE."""
    sol = slow_subsystem_exact(params, y0, branch)
    n = max(1, int(round(t_final / dt)))
    h = t_final / n
    a, s = params.a, params.b + params.c
    w = 2.0 * math.pi * params.omega
    const = _branch_sign(branch) * params.b

    def rhs(y, t):
        return a * math.sin(w * t) + s * y + const

    y = float(y0)
    worst = 0.0
    t = 0.0
    for k in range(n):
        k1 = rhs(y, t)
        k2 = rhs(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(y + h * k3, t + h)
        y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t = (k + 1) * h
        worst = max(worst, abs(y - sol.value(t)))
    return worst


@dataclass(frozen=True)
class AveragedEquilibria:
    point_minus: tuple[float, float]  # (Y_-, F_-(Y_-))
    point_plus: tuple[float, float]   # (Y_+, F_+(Y_+))
    time_average_minus: float
    time_average_plus: float


def averaged_equilibria(params: OscillatorParams) -> AveragedEquilibria:
    """The two averaged equilibrium points and the long-time mean of each branch."""
    if not params.bounded:
        raise BoundednessError(f"b + c = {params.b + params.c:g} >= 0: unbounded dynamics")
    s = params.b + params.c
    y_minus = params.b / s       # branch 'minus': Y_- = +b/(b+c)
    y_plus = -params.b / s
    curves = oscillator_curves()
    return AveragedEquilibria(
        point_minus=(y_minus, float(curves.lower(y_minus))),
        point_plus=(y_plus, float(curves.upper(y_plus))),
        time_average_minus=y_minus,
        time_average_plus=y_plus,
    )


# ---------------------------------------------------------------------------
# dwell-segment detection for the averaged-equilibrium comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DwellSegment:
    i_start: int
    i_end: int  # inclusive
    side: str   # "lower" | "upper"
    t_start: float
    t_end: float
    sao_count: int  # sign changes of dy within the segment


def dwell_segments(run: EpsRun, curves: BoundaryCurvePair, tol: float = 0.05) -> list[DwellSegment]:
    """Maximal intervals hugging one boundary curve: Euclidean distance to the
    nearest curve <= tol with the nearest-curve identity constant."""
    xs, ys = run.x.values, run.y.values
    d_lo = np.asarray(curves.lower.distance_to_graph(xs, ys))
    d_hi = np.asarray(curves.upper.distance_to_graph(xs, ys))
    near = np.minimum(d_lo, d_hi) <= tol
    side = np.where(d_lo <= d_hi, 0, 1)
    segments: list[DwellSegment] = []
    n = len(xs)
    i = 0
    while i < n:
        if not near[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and near[j + 1] and side[j + 1] == side[i]:
            j += 1
        dy = np.diff(ys[i : j + 1])
        dy = dy[dy != 0]
        sao = int(np.count_nonzero(np.diff(np.sign(dy)) != 0)) if dy.size > 1 else 0
        segments.append(
            DwellSegment(
                i_start=i,
                i_end=j,
                side="lower" if side[i] == 0 else "upper",
                t_start=float(run.times[i]),
                t_end=float(run.times[j]),
                sao_count=sao,
            )
        )
        i = j + 1
    return segments


def dwell_time_average(run: EpsRun, segments: list[DwellSegment], side: str) -> float:
    """Time-weighted mean of y pooled over all dwell segments of one side."""
    num = 0.0
    den = 0.0
    for seg in segments:
        if seg.side != side or seg.i_end <= seg.i_start:
            continue
        sl = slice(seg.i_start, seg.i_end + 1)
        t = run.times[sl]
        y = run.y.values[sl]
        num += float(np.trapezoid(y, t))
        den += float(t[-1] - t[0])
    if den == 0.0:
        raise ValueError(f"no {side}-side dwell segments with positive duration")
    return num / den
