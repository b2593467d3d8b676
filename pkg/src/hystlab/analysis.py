"""Norms on sampled paths, epsilon sweeps with convergence-rate fitting, and
bifurcation amplitude sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BoundaryCurvePair, FastSlowSystem, SampledPath, band_distance_many
from .integrate import EpsRun, IntegratorConfig, integrate
from .limit import LimitRun, solve_limit

__all__ = [
    "resample_to_common_grid",
    "norm_sup",
    "norm_Lq",
    "norm_W1q",
    "ConvergenceRow",
    "ConvergenceTable",
    "epsilon_sweep",
    "BifurcationRow",
    "bifurcation_sweep",
    "first_band_arrival",
]


def resample_to_common_grid(a: SampledPath, b: SampledPath) -> tuple[SampledPath, SampledPath]:
    """Restrict both paths to the overlap and linearly interpolate onto the
    union grid."""
    t_lo = max(a.t0, b.t0)
    t_hi = min(a.t1, b.t1)
    if not t_lo < t_hi:
        raise ValueError("paths have disjoint time ranges")
    grid = np.union1d(a.times, b.times)
    grid = grid[(grid >= t_lo) & (grid <= t_hi)]
    return SampledPath(grid, a(grid)), SampledPath(grid, b(grid))


def norm_sup(diff: SampledPath) -> float:
    return float(np.max(np.abs(diff.values)))


def norm_Lq(diff: SampledPath, q: float) -> float:
    """Trapezoid-quadrature L^q norm of the sampled difference."""
    if q <= 1:
        raise ValueError("q must lie in (1, inf)")
    return float(np.trapezoid(np.abs(diff.values) ** q, diff.times) ** (1.0 / q))


def norm_W1q(diff: SampledPath, q: float) -> float:
    """L^q norm plus the L^q norm of the forward-difference derivative.

    The derivative of the linear interpolant is piecewise constant, so its
    L^q integral is evaluated exactly cell by cell.
    """
    if q <= 1:
        raise ValueError("q must lie in (1, inf)")
    base = norm_Lq(diff, q)
    dt = np.diff(diff.times)
    slopes = np.diff(diff.values) / dt
    deriv = float(np.sum(np.abs(slopes) ** q * dt) ** (1.0 / q))
    return base + deriv


def first_band_arrival(run: EpsRun, curves: BoundaryCurvePair, threshold: float) -> float:
    """First grid time with band distance <= threshold (t(eps)); final time if never."""
    dist = band_distance_many(curves, run.x.values, run.y.values)
    idx = np.flatnonzero(dist <= threshold)
    return float(run.times[idx[0]]) if idx.size else float(run.times[-1])


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    sup_y_err: float
    sup_x_err_tail: float
    t_eps: float
    l2_x_err: float
    w12_y_err: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    q: float
    fitted_orders: dict[str, float] | None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _fit_orders(rows: list[ConvergenceRow]) -> dict[str, float] | None:
    if len(rows) < 2:
        return None
    eps = np.log([r.epsilon for r in rows])
    out = {}
    for name in ("sup_y_err", "sup_x_err_tail", "l2_x_err", "w12_y_err"):
        vals = np.array([getattr(r, name) for r in rows])
        if np.any(vals <= 0):
            out[name] = math.nan
            continue
        out[name] = float(np.polyfit(eps, np.log(vals), 1)[0])
    return out


def epsilon_sweep(
    system: FastSlowSystem,
    curves: BoundaryCurvePair,
    w0: tuple[float, float],
    t_final: float,
    eps_list,
    q: float = 2.0,
    *,
    run_config: IntegratorConfig | None = None,
    limit_dt: float | None = None,
    arrival_threshold: float = 0.1,
    limit_reference: LimitRun | None = None,
) -> ConvergenceTable:
    """One epsilon-run per entry against a shared limit reference.

    Columns: sup-norm of y error, sup-norm of x error on the tail window
    [t(eps), T], L^q of the x error, W^{1,q} of the y error, plus a
    least-squares slope of log(err) against log(eps) per column.

    t(eps) drops the initial layer constructively: first grid time with band
    distance <= ``arrival_threshold``, plus a 5*eps margin so the fast
    contraction (rate 1/eps) has completed the crossing sample's residual
    gap; both terms are O(eps), matching the theory's t(eps) <= eps * C.
    """
    eps_arr = [float(e) for e in eps_list]
    if not eps_arr:
        raise ValueError("eps_list must be non-empty")
    if any(e <= 0 for e in eps_arr):
        raise ValueError("all epsilon values must be positive")
    if not all(b < a for a, b in zip(eps_arr, eps_arr[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    cfg = run_config or IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6)
    if limit_reference is None:
        dt = limit_dt if limit_dt is not None else 1e-4 * t_final
        limit_reference = solve_limit(system.slow, curves, w0[0], w0[1], t_final, dt)

    rows = []
    for eps in eps_arr:
        try:
            run = integrate(system, eps, w0, 0.0, t_final, cfg)
        except Exception as exc:
            raise RuntimeError(f"epsilon-sweep entry eps={eps} failed: {exc}") from exc
        t_eps = min(first_band_arrival(run, curves, arrival_threshold) + 5.0 * eps, t_final)
        ye, yl = resample_to_common_grid(run.y, limit_reference.y)
        xe, xl = resample_to_common_grid(run.x, limit_reference.x)
        dy = SampledPath(ye.times, ye.values - yl.values)
        dx = SampledPath(xe.times, xe.values - xl.values)
        if t_eps < dx.t1:
            dx_tail = dx.restrict(t_eps, dx.t1)
            sup_x_tail = norm_sup(dx_tail)
        else:
            sup_x_tail = abs(float(dx.values[-1]))
        rows.append(
            ConvergenceRow(
                epsilon=eps,
                sup_y_err=norm_sup(dy),
                sup_x_err_tail=sup_x_tail,
                t_eps=t_eps,
                l2_x_err=norm_Lq(dx, q),
                w12_y_err=norm_W1q(dy, q),
            )
        )
    return ConvergenceTable(tuple(rows), q, _fit_orders(rows))


@dataclass(frozen=True)
class BifurcationRow:
    c: float
    y_max: float
    y_min: float
    amplitude: float
    rejected: bool


def bifurcation_sweep(
    params_base,
    c_values,
    t_settle: float,
    t_measure: float,
    *,
    w0: tuple[float, float] = (2.0, 0.5),
    run_config: IntegratorConfig | None = None,
) -> list[BifurcationRow]:
    """Attractor amplitude of y for each feedback value c.

    Entries with b + c >= 0 are rejected (unbounded slow subsystem) and
    marked instead of integrated.
    """
    from .oscillator import make_system  # deferred to avoid a module cycle

    if t_settle <= 0 or t_measure <= 0:
        raise ValueError("settle and measure windows must be positive")
    cfg = run_config or IntegratorConfig(rel_tol=1e-6, abs_tol=1e-6)
    rows = []
    for c in c_values:
        c = float(c)
        if params_base.b + c >= 0:
            rows.append(BifurcationRow(c, math.nan, math.nan, math.nan, True))
            continue
        params = params_base.with_c(c)
        system = make_system(params)
        run = integrate(system, params.epsilon, w0, 0.0, t_settle + t_measure, cfg)
        mask = run.times >= t_settle
        window = run.y.values[mask]
        y_max = float(np.max(window))
        y_min = float(np.min(window))
        rows.append(BifurcationRow(c, y_max, y_min, y_max - y_min, False))
    return rows
