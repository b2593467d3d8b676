"""Adaptive integration of the full epsilon-system

    eps * dx/dt = f(x, y),    dy/dt = g(x, y, t).

Default method is an explicit Dormand-Prince 4(5) embedded pair with one
extra rule: while the state is outside the critical band (f != 0) the step is
capped at max(eps/2, min_step), which keeps the explicit method stable on the
stiff fast equation at desk-scale eps. Inside the band f vanishes identically
and no cap applies. An adaptive implicit trapezoid is provided for smaller
eps. Dense output is the linear interpolant of the accepted grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CompactBox, FastSlowSystem, SampledPath

__all__ = [
    "IntegratorConfig",
    "EpsRun",
    "ResidualReport",
    "StiffnessError",
    "BoxEscapeError",
    "integrate",
    "residual_check",
]


class StiffnessError(RuntimeError):
    """Step size underflow; the problem is too stiff for the chosen method."""


class BoxEscapeError(RuntimeError):
    """The trajectory left the compact working box."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-8
    max_step: float = math.inf
    min_step: float = 1e-14
    method: str = "adaptive-embedded-45"  # or "implicit-trapezoid"

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.min_step > self.max_step:
            raise ValueError("min_step must not exceed max_step")
        if self.method not in ("adaptive-embedded-45", "implicit-trapezoid"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class EpsRun:
    epsilon: float
    x: SampledPath
    y: SampledPath
    accepted: int
    rejected: int
    max_error_estimate: float

    @property
    def times(self) -> np.ndarray:
        return self.x.times


# Dormand-Prince 4(5) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _off_band(system: FastSlowSystem, x: float, y: float) -> bool:
    return x > float(system.curves.upper(y)) or x < float(system.curves.lower(y))


def integrate(
    system: FastSlowSystem,
    epsilon: float,
    w0: tuple[float, float],
    t0: float,
    t1: float,
    config: IntegratorConfig = IntegratorConfig(),
) -> EpsRun:
    """Integrate the coupled system from w0 on [t0, t1]."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    if config.method == "implicit-trapezoid":
        return _integrate_trapezoid(system, epsilon, w0, t0, t1, config)
    return _integrate_dp45(system, epsilon, w0, t0, t1, config)


def _integrate_dp45(system, epsilon, w0, t0, t1, config) -> EpsRun:
    f, g = system.fast, system.slow
    box: CompactBox | None = system.box
    inv_eps = 1.0 / epsilon
    fast_cap = max(epsilon / 2.0, config.min_step)

    t = float(t0)
    x, y = float(w0[0]), float(w0[1])
    ts = [t]
    xs = [x]
    ys = [y]
    accepted = 0
    rejected = 0
    max_est = 0.0

    kx1 = f(x, y) * inv_eps
    ky1 = g(x, y, t)
    h = min(config.max_step, (t1 - t0) * 1e-3)
    if _off_band(system, x, y):
        h = min(h, fast_cap)
    h = max(h, config.min_step)

    kx = [0.0] * 7
    ky = [0.0] * 7
    while t < t1:
        cap = config.max_step
        if _off_band(system, x, y):
            cap = min(cap, fast_cap)
        h = min(h, cap, t1 - t)
        if h < config.min_step and t1 - t > config.min_step:
            raise StiffnessError(
                f"step underflow at t={t:.6g} (h={h:.3g} < min_step); "
                "consider method='implicit-trapezoid'"
            )

        kx[0] = kx1
        ky[0] = ky1
        for i in range(1, 7):
            ai = _DP_A[i]
            sx = 0.0
            sy = 0.0
            for j in range(i):
                sx += ai[j] * kx[j]
                sy += ai[j] * ky[j]
            xi = x + h * sx
            yi = y + h * sy
            ti = t + _DP_C[i] * h
            kx[i] = f(xi, yi) * inv_eps
            ky[i] = g(xi, yi, ti)

        x5 = x
        y5 = y
        ex = 0.0
        ey = 0.0
        for i in range(7):
            x5 += h * _DP_B5[i] * kx[i]
            y5 += h * _DP_B5[i] * ky[i]
            ex += h * _DP_E[i] * kx[i]
            ey += h * _DP_E[i] * ky[i]

        scale_x = config.abs_tol + config.rel_tol * max(abs(x), abs(x5))
        scale_y = config.abs_tol + config.rel_tol * max(abs(y), abs(y5))
        err = max(abs(ex) / scale_x, abs(ey) / scale_y)

        if err <= 1.0:
            t += h
            x, y = x5, y5
            # stage 7 was evaluated at (t+h, x5, y5): FSAL
            kx1 = kx[6]
            ky1 = ky[6]
            ts.append(t)
            xs.append(x)
            ys.append(y)
            accepted += 1
            max_est = max(max_est, abs(ex), abs(ey))
            if box is not None and not box.contains(x, y, slack=1e-9):
                raise BoxEscapeError(f"trajectory left the working box at t={t:.6g}: ({x}, {y})")
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            if h <= config.min_step:
                raise StiffnessError(
                    f"error control rejects the minimum step at t={t:.6g}; "
                    "consider method='implicit-trapezoid'"
                )
            rejected += 1
            factor = max(0.2, 0.9 * err ** -0.2)
        h = max(h * factor, config.min_step)

    times = np.asarray(ts)
    return EpsRun(
        epsilon=epsilon,
        x=SampledPath(times, np.asarray(xs)),
        y=SampledPath(times, np.asarray(ys)),
        accepted=accepted,
        rejected=rejected,
        max_error_estimate=max_est,
    )


def _trapezoid_step(system, epsilon, t, x, y, h):
    """One implicit trapezoid step via Newton on the 2x2 residual."""
    f, g = system.fast, system.slow
    inv_eps = 1.0 / epsilon
    fx0 = f(x, y) * inv_eps
    gy0 = g(x, y, t)
    t1 = t + h
    x1, y1 = x + h * fx0, y + h * gy0  # explicit Euler predictor
    fd_h = 1e-7 * (1.0 + abs(x) + abs(y))
    for _ in range(25):
        fx1 = f(x1, y1) * inv_eps
        gy1 = g(x1, y1, t1)
        rx = x1 - x - 0.5 * h * (fx0 + fx1)
        ry = y1 - y - 0.5 * h * (gy0 + gy1)
        if abs(rx) + abs(ry) < 1e-13 * (1.0 + abs(x1) + abs(y1)):
            break
        if system.fast_jacobian is not None and system.slow_jacobian is not None:
            dfx, dfy = system.fast_jacobian(x1, y1)
            (dgx, dgy), _ = system.slow_jacobian(x1, y1, t1)
        else:
            dfx = (f(x1 + fd_h, y1) - f(x1 - fd_h, y1)) / (2 * fd_h)
            dfy = (f(x1, y1 + fd_h) - f(x1, y1 - fd_h)) / (2 * fd_h)
            dgx = (g(x1 + fd_h, y1, t1) - g(x1 - fd_h, y1, t1)) / (2 * fd_h)
            dgy = (g(x1, y1 + fd_h, t1) - g(x1, y1 - fd_h, t1)) / (2 * fd_h)
        j11 = 1.0 - 0.5 * h * dfx * inv_eps
        j12 = -0.5 * h * dfy * inv_eps
        j21 = -0.5 * h * dgx
        j22 = 1.0 - 0.5 * h * dgy
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            break
        x1 -= (rx * j22 - ry * j12) / det
        y1 -= (ry * j11 - rx * j21) / det
    return x1, y1


def _integrate_trapezoid(system, epsilon, w0, t0, t1, config) -> EpsRun:
    box: CompactBox | None = system.box
    t = float(t0)
    x, y = float(w0[0]), float(w0[1])
    ts, xs, ys = [t], [x], [y]
    accepted = 0
    rejected = 0
    max_est = 0.0
    h = min(config.max_step, (t1 - t0) * 1e-3)
    while t < t1:
        h = min(h, config.max_step, t1 - t)
        if h < config.min_step and t1 - t > config.min_step:
            raise StiffnessError(f"trapezoid step underflow at t={t:.6g}")
        xa, ya = _trapezoid_step(system, epsilon, t, x, y, h)
        xh, yh = _trapezoid_step(system, epsilon, t, x, y, 0.5 * h)
        xb, yb = _trapezoid_step(system, epsilon, t + 0.5 * h, xh, yh, 0.5 * h)
        ex = (xb - xa) / 3.0
        ey = (yb - ya) / 3.0
        scale_x = config.abs_tol + config.rel_tol * max(abs(x), abs(xb))
        scale_y = config.abs_tol + config.rel_tol * max(abs(y), abs(yb))
        err = max(abs(ex) / scale_x, abs(ey) / scale_y)
        if err <= 1.0:
            t += h
            x, y = xb, yb
            ts.append(t)
            xs.append(x)
            ys.append(y)
            accepted += 1
            max_est = max(max_est, abs(ex), abs(ey))
            if box is not None and not box.contains(x, y, slack=1e-9):
                raise BoxEscapeError(f"trajectory left the working box at t={t:.6g}")
            factor = 4.0 if err == 0.0 else min(4.0, max(0.2, 0.9 * err ** (-1 / 3)))
        else:
            if h <= config.min_step:
                raise StiffnessError(f"trapezoid error control rejects the minimum step at t={t:.6g}")
            rejected += 1
            factor = max(0.2, 0.9 * err ** (-1 / 3))
        h = max(h * factor, config.min_step)
    times = np.asarray(ts)
    return EpsRun(
        epsilon=epsilon,
        x=SampledPath(times, np.asarray(xs)),
        y=SampledPath(times, np.asarray(ys)),
        accepted=accepted,
        rejected=rejected,
        max_error_estimate=max_est,
    )


@dataclass(frozen=True)
class ResidualReport:
    fast_defect: float
    slow_defect: float


def residual_check(run: EpsRun, system: FastSlowSystem, epsilon: float) -> ResidualReport:
    """Midpoint defect of the linear dense output against the vector field.

    Evaluates |eps * dx/dt - f| and |dy/dt - g| at cell midpoints of the
    accepted grid. This measures how well the piecewise-linear interpolant
    solves the ODE; it shrinks with the step sizes the tolerance induced, not
    with the tolerance itself.
    """
    t = run.times
    if t.size < 2:
        return ResidualReport(0.0, 0.0)
    xv, yv = run.x.values, run.y.values
    dt = np.diff(t)
    tm = t[:-1] + 0.5 * dt
    xm = 0.5 * (xv[:-1] + xv[1:])
    ym = 0.5 * (yv[:-1] + yv[1:])
    f_mid = np.array([system.fast(float(a), float(b)) for a, b in zip(xm, ym)])
    g_mid = np.array([system.slow(float(a), float(b), float(c)) for a, b, c in zip(xm, ym, tm)])
    fast = np.max(np.abs(epsilon * np.diff(xv) / dt - f_mid))
    slow = np.max(np.abs(np.diff(yv) / dt - g_mid))
    return ResidualReport(float(fast), float(slow))
