"""Shared domain types: sampled paths, boundary curve pairs, fast-slow systems,
the compact working box and its sup-norm constants.

Geometry convention: the state is (x, y) with x the fast coordinate. The
critical band is the closed set {(x, y) : F_-(y) <= x <= F_+(y)} between two
monotone increasing Lipschitz curves F_- < F_+. Points with x above the band
(x > F_+(y)) form the region M+, points below form M-; ties on either curve
count as band membership (the band is closed on both sides).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

__all__ = [
    "AffineCurve",
    "PiecewiseLinearCurve",
    "BoundaryCurvePair",
    "SampledPath",
    "FastSlowSystem",
    "CompactBox",
    "BoundsMetadata",
    "Region",
    "DomainError",
    "EvaluationError",
    "classify_region",
    "band_distance",
    "band_distance_many",
    "estimate_bounds",
    "find_working_box",
    "validate_curves",
    "validate_system",
]

# Irrational grid offset used wherever a sampling grid must dodge the
# measure-zero seams of piecewise-defined fields.
_GOLDEN_FRAC = 0.6180339887498949


class DomainError(ValueError):
    """A point or parameter lies outside the admissible domain."""


class EvaluationError(ValueError):
    """A model function returned a non-finite value."""


class Region(Enum):
    M_PLUS = "M+"
    M_ZERO = "M0"
    M_MINUS = "M-"


@dataclass(frozen=True)
class AffineCurve:
    """x = slope * y + intercept; Lipschitz constant is |slope|."""

    slope: float
    intercept: float

    def __call__(self, y):
        return self.slope * np.asarray(y, dtype=float) + self.intercept

    @property
    def lipschitz(self) -> float:
        return abs(self.slope)

    def distance_to_graph(self, px, py):
        """Euclidean distance from (x=px, y=py) to the graph {x = slope*y + b}."""
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        return np.abs(px - self.slope * py - self.intercept) / math.hypot(1.0, self.slope)


@dataclass(frozen=True)
class PiecewiseLinearCurve:
    """Monotone piecewise-linear curve through (y_k, x_k) nodes.

    Outside the node range the first/last segments are extended linearly, so
    the curve is defined on all of R. Node arrays must be strictly increasing
    in y and non-decreasing in x.
    """

    nodes_y: np.ndarray
    nodes_x: np.ndarray

    def __post_init__(self):
        ny = np.asarray(self.nodes_y, dtype=float)
        nx = np.asarray(self.nodes_x, dtype=float)
        if ny.ndim != 1 or ny.shape != nx.shape or ny.size < 2:
            raise ValueError("need matching 1-d node arrays with >= 2 nodes")
        if not np.all(np.diff(ny) > 0):
            raise ValueError("node y-values must be strictly increasing")
        if np.any(np.diff(nx) < 0):
            raise ValueError("node x-values must be non-decreasing (monotone curve)")
        object.__setattr__(self, "nodes_y", ny)
        object.__setattr__(self, "nodes_x", nx)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ny, nx = self.nodes_y, self.nodes_x
        out = np.interp(y, ny, nx)
        # linear extension beyond the node range
        lo_slope = (nx[1] - nx[0]) / (ny[1] - ny[0])
        hi_slope = (nx[-1] - nx[-2]) / (ny[-1] - ny[-2])
        out = np.where(y < ny[0], nx[0] + lo_slope * (y - ny[0]), out)
        out = np.where(y > ny[-1], nx[-1] + hi_slope * (y - ny[-1]), out)
        return out if out.ndim else float(out)

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.nodes_x) / np.diff(self.nodes_y))))

    def distance_to_graph(self, px, py):
        px = np.asarray(px, dtype=float)[..., None]
        py = np.asarray(py, dtype=float)[..., None]
        ny, nx = self._extended_nodes()
        ay, ax = ny[:-1], nx[:-1]
        dy, dx = np.diff(ny), np.diff(nx)
        seg2 = dy * dy + dx * dx
        # projection parameter of (py, px) onto each segment, clamped
        t = ((py - ay) * dy + (px - ax) * dx) / seg2
        t = np.clip(t, 0.0, 1.0)
        d2 = (py - (ay + t * dy)) ** 2 + (px - (ax + t * dx)) ** 2
        out = np.sqrt(np.min(d2, axis=-1))
        return out if out.ndim else float(out)

    def _extended_nodes(self):
        ny, nx = self.nodes_y, self.nodes_x
        span = max(ny[-1] - ny[0], 1.0) * 100.0
        lo_slope = (nx[1] - nx[0]) / (ny[1] - ny[0])
        hi_slope = (nx[-1] - nx[-2]) / (ny[-1] - ny[-2])
        ny_ext = np.concatenate(([ny[0] - span], ny, [ny[-1] + span]))
        nx_ext = np.concatenate(([nx[0] - lo_slope * span], nx, [nx[-1] + hi_slope * span]))
        return ny_ext, nx_ext


Curve = AffineCurve | PiecewiseLinearCurve


@dataclass(frozen=True)
class BoundaryCurvePair:
    """The pair F_- < F_+ bounding the critical band, with Lipschitz constants."""

    lower: Curve
    upper: Curve

    @property
    def lipschitz_lower(self) -> float:
        return self.lower.lipschitz

    @property
    def lipschitz_upper(self) -> float:
        return self.upper.lipschitz

    @property
    def combined(self) -> float:
        """L_pm = max{L_+, L_-}."""
        return max(self.lipschitz_lower, self.lipschitz_upper)


def validate_curves(curves: BoundaryCurvePair, y_range: tuple[float, float], n: int = 257) -> None:
    """Check F_- < F_+, monotonicity, and the stored Lipschitz constants on a grid."""
    ys = np.linspace(y_range[0], y_range[1], n)
    lo = np.asarray(curves.lower(ys))
    hi = np.asarray(curves.upper(ys))
    if not np.all(lo < hi):
        raise ValueError("curve ordering violated: F_-(y) < F_+(y) fails on the grid")
    if np.any(np.diff(lo) < -1e-12) or np.any(np.diff(hi) < -1e-12):
        raise ValueError("boundary curves must be monotone increasing")
    dy = ys[1] - ys[0]
    slack = 1e-9
    if np.max(np.abs(np.diff(lo))) > curves.lipschitz_lower * dy + slack:
        raise ValueError("lower curve violates its Lipschitz constant")
    if np.max(np.abs(np.diff(hi))) > curves.lipschitz_upper * dy + slack:
        raise ValueError("upper curve violates its Lipschitz constant")


@dataclass(frozen=True)
class SampledPath:
    """A strictly increasing time grid plus one value per grid point.

    Linear interpolation between samples defines the continuous-time
    extension used by every norm and diagnostic in this package.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if t.size == 0:
            raise ValueError("empty path")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size

    def __call__(self, t):
        """Linear interpolant, clamped to the end values outside the grid."""
        return np.interp(t, self.times, self.values)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def restrict(self, t_lo: float, t_hi: float) -> "SampledPath":
        """Sub-path on [t_lo, t_hi] with interpolated endpoint samples."""
        if t_lo >= t_hi:
            raise ValueError("empty restriction window")
        inner = (self.times > t_lo) & (self.times < t_hi)
        t = np.concatenate(([t_lo], self.times[inner], [t_hi]))
        return SampledPath(t, self(t))


@dataclass(frozen=True)
class CompactBox:
    """The compact rectangle containing all trajectories of a study."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]

    def __post_init__(self):
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("degenerate box")

    def contains(self, x: float, y: float, slack: float = 0.0) -> bool:
        return (
            self.x_range[0] - slack <= x <= self.x_range[1] + slack
            and self.y_range[0] - slack <= y <= self.y_range[1] + slack
        )

    def contains_path(self, xs, ys, slack: float = 0.0) -> bool:
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        return bool(
            np.all(xs >= self.x_range[0] - slack)
            and np.all(xs <= self.x_range[1] + slack)
            and np.all(ys >= self.y_range[0] - slack)
            and np.all(ys <= self.y_range[1] + slack)
        )

    @property
    def corner_norm(self) -> float:
        return max(
            math.hypot(x, y) for x in self.x_range for y in self.y_range
        )


@dataclass(frozen=True)
class FastSlowSystem:
    """Planar fast-slow model: eps * dx/dt = f(x, y), dy/dt = g(x, y, t).

    ``fast`` and ``slow`` take plain floats and return floats.  Optional
    jacobians unlock the linearization machinery: ``fast_jacobian(x, y)``
    returns (df/dx, df/dy); ``slow_jacobian(x, y, t)`` returns
    ((dg/dx, dg/dy), dg/dt).  ``curves`` must be consistent with the sign
    structure of f (zero inside the band, negative above, positive below).
    """

    fast: Callable[[float, float], float]
    slow: Callable[[float, float, float], float]
    curves: BoundaryCurvePair
    fast_jacobian: Callable[[float, float], tuple[float, float]] | None = None
    slow_jacobian: Callable[[float, float, float], tuple[tuple[float, float], float]] | None = None
    box: CompactBox | None = None


def classify_region(system: FastSlowSystem, point: tuple[float, float]) -> Region:
    """M0 iff F_-(y) <= x <= F_+(y) (closed band); M+ above, M- below."""
    x, y = float(point[0]), float(point[1])
    if system.box is not None and not system.box.contains(x, y):
        raise DomainError(f"point {point} outside the working box {system.box}")
    lo = float(system.curves.lower(y))
    hi = float(system.curves.upper(y))
    if x > hi:
        return Region.M_PLUS
    if x < lo:
        return Region.M_MINUS
    return Region.M_ZERO


def band_distance(system: FastSlowSystem, point: tuple[float, float]) -> float:
    """Euclidean distance from a point to the closed band; 0 iff inside."""
    x, y = float(point[0]), float(point[1])
    if system.box is not None and not system.box.contains(x, y):
        raise DomainError(f"point {point} outside the working box {system.box}")
    return float(band_distance_many(system.curves, np.array([x]), np.array([y]))[0])


def band_distance_many(curves: BoundaryCurvePair, xs, ys) -> np.ndarray:
    """Vectorized band distance; exact for both built-in curve families."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    lo = np.asarray(curves.lower(ys))
    hi = np.asarray(curves.upper(ys))
    out = np.zeros_like(xs)
    above = xs > hi
    below = xs < lo
    if np.any(above):
        out[above] = curves.upper.distance_to_graph(xs[above], ys[above])
    if np.any(below):
        out[below] = curves.lower.distance_to_graph(xs[below], ys[below])
    return out


@dataclass(frozen=True)
class BoundsMetadata:
    """Sup-norm constants of the model over the working box.

    Every constant is a grid maximum inflated by a fixed safety factor, so it
    dominates the sampled quantity.  ``lipschitz`` is max{L_f, L_g} taken over
    the state arguments only (time enters the Gronwall arguments at equal
    times, so dg/dt plays no role there).
    """

    c_f: float
    c_g: float
    c_df: float
    c_dg: float
    c_d2: float
    c_m: float
    lipschitz: float
    c_fg: float
    inflation: float = 1.1
    t_horizon: float = 1.0


def _grid_1d(lo: float, hi: float, n: int, dodge_seams: bool) -> np.ndarray:
    if not dodge_seams:
        return np.linspace(lo, hi, n)
    # interior grid with an irrational offset; avoids landing exactly on the
    # seams of piecewise-defined fields, where derivatives are undefined
    h = (hi - lo) / n
    return lo + (np.arange(n) + _GOLDEN_FRAC) * h


def _fd_fast_jacobian(f, x, y, h):
    return (
        (f(x + h, y) - f(x - h, y)) / (2 * h),
        (f(x, y + h) - f(x, y - h)) / (2 * h),
    )


def _fd_slow_jacobian(g, x, y, t, h):
    return (
        (
            (g(x + h, y, t) - g(x - h, y, t)) / (2 * h),
            (g(x, y + h, t) - g(x, y - h, t)) / (2 * h),
        ),
        (g(x, y, t + h) - g(x, y, t - h)) / (2 * h),
    )


def estimate_bounds(
    system: FastSlowSystem,
    box: CompactBox,
    grid_resolution: int = 41,
    t_horizon: float = 1.0,
    n_time: int = 64,
    inflation: float = 1.1,
) -> BoundsMetadata:
    """Estimate the sup-norm constants of f, g and their derivatives over the box.

    Function values are sampled on an endpoint-inclusive grid (continuous
    fields, so seams are harmless); derivative quantities use a seam-dodging
    offset grid plus finite differences of the jacobians for the second-order
    constant. ``t_horizon`` bounds the (t - t0) factor of the linearization's
    inhomogeneous time term.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    f, g = system.fast, system.slow
    xs_v = np.linspace(box.x_range[0], box.x_range[1], grid_resolution)
    ys_v = np.linspace(box.y_range[0], box.y_range[1], grid_resolution)
    ts = np.linspace(0.0, max(t_horizon, 1e-12), n_time)

    c_f = 0.0
    c_g = 0.0
    for x in xs_v:
        for y in ys_v:
            fv = f(float(x), float(y))
            if not math.isfinite(fv):
                raise EvaluationError(f"f non-finite at ({x}, {y})")
            c_f = max(c_f, abs(fv))
            for t in ts:
                gv = g(float(x), float(y), float(t))
                if not math.isfinite(gv):
                    raise EvaluationError(f"g non-finite at ({x}, {y}, {t})")
                c_g = max(c_g, abs(gv))

    xs_d = _grid_1d(box.x_range[0], box.x_range[1], grid_resolution, dodge_seams=True)
    ys_d = _grid_1d(box.y_range[0], box.y_range[1], grid_resolution, dodge_seams=True)
    ts_d = _grid_1d(0.0, max(t_horizon, 1e-12), min(n_time, 32), dodge_seams=True)
    h_fd = 1e-6 * max(1.0, box.x_range[1] - box.x_range[0])
    h2 = 1e-5 * max(1.0, box.x_range[1] - box.x_range[0])

    jac_f = system.fast_jacobian or (lambda x, y: _fd_fast_jacobian(f, x, y, h_fd))
    jac_g = system.slow_jacobian or (lambda x, y, t: _fd_slow_jacobian(g, x, y, t, h_fd))

    c_df = 0.0
    c_dg = 0.0
    c_d2 = 0.0
    lip_f = 0.0
    lip_g = 0.0
    c_f1 = 0.0
    c_f2 = 0.0
    c_g1 = 0.0
    c_g2 = 0.0
    sup_dtg = 0.0
    for x in xs_d:
        x = float(x)
        for y in ys_d:
            y = float(y)
            fx, fy = jac_f(x, y)
            ndf = math.hypot(fx, fy)
            c_df = max(c_df, ndf)
            lip_f = max(lip_f, ndf)
            c_f2 = max(c_f2, ndf)
            c_f1 = max(c_f1, abs(f(x, y) - fx * x - fy * y))
            # second derivatives of f by differencing its jacobian
            fxp = jac_f(x + h2, y)
            fxm = jac_f(x - h2, y)
            fyp = jac_f(x, y + h2)
            fym = jac_f(x, y - h2)
            hess_f = (
                np.array([[fxp[0] - fxm[0], fxp[1] - fxm[1]], [fyp[0] - fym[0], fyp[1] - fym[1]]])
                / (2 * h2)
            )
            c_d2 = max(c_d2, float(np.linalg.norm(hess_f)))
            for t in ts_d:
                t = float(t)
                (gx, gy), gt = jac_g(x, y, t)
                nstate = math.hypot(gx, gy)
                c_dg = max(c_dg, math.sqrt(gx * gx + gy * gy + gt * gt))
                lip_g = max(lip_g, nstate)
                c_g2 = max(c_g2, nstate)
                c_g1 = max(c_g1, abs(g(x, y, t) - gx * x - gy * y))
                sup_dtg = max(sup_dtg, abs(gt))
                gtp = jac_g(x, y, t + h2)[1]
                gtm = jac_g(x, y, t - h2)[1]
                (gxp, gyp), _ = jac_g(x + h2, y, t)
                (gxm, gym), _ = jac_g(x - h2, y, t)
                (gxq, gyq), _ = jac_g(x, y + h2, t)
                (gxr, gyr), _ = jac_g(x, y - h2, t)
                hess_g = np.array(
                    [
                        [gxp - gxm, gyp - gym, 0.0],
                        [gxq - gxr, gyq - gyr, 0.0],
                        [0.0, 0.0, gtp - gtm],
                    ]
                ) / (2 * h2)
                c_d2 = max(c_d2, float(np.linalg.norm(hess_g)))

    c_g1 += t_horizon * sup_dtg
    c_fg = max(c_f1, c_f2, c_g1, c_g2)
    return BoundsMetadata(
        c_f=inflation * c_f,
        c_g=inflation * c_g,
        c_df=inflation * c_df,
        c_dg=inflation * c_dg,
        c_d2=inflation * c_d2,
        c_m=inflation * box.corner_norm,
        lipschitz=inflation * max(lip_f, lip_g),
        c_fg=inflation * c_fg,
        inflation=inflation,
        t_horizon=t_horizon,
    )


def find_working_box(
    system: FastSlowSystem,
    epsilon: float,
    w0: tuple[float, float],
    t_final: float,
    pad_fraction: float = 0.1,
) -> CompactBox:
    """Coarse preliminary run of the requested study, inflated 10% per side."""
    from .integrate import IntegratorConfig, integrate  # local import avoids a cycle

    cfg = IntegratorConfig(rel_tol=1e-4, abs_tol=1e-4)
    run = integrate(system, epsilon, w0, 0.0, t_final, cfg)
    x_lo, x_hi = float(np.min(run.x.values)), float(np.max(run.x.values))
    y_lo, y_hi = float(np.min(run.y.values)), float(np.max(run.y.values))
    pad_x = pad_fraction * max(x_hi - x_lo, 1e-6)
    pad_y = pad_fraction * max(y_hi - y_lo, 1e-6)
    return CompactBox((x_lo - pad_x, x_hi + pad_x), (y_lo - pad_y, y_hi + pad_y))


def validate_system(
    system: FastSlowSystem,
    box: CompactBox,
    grid_resolution: int = 33,
    jac_rel_tol: float = 1e-5,
) -> None:
    """Check the sign structure of f against the curves and, when jacobians are
    provided, their consistency with central finite differences.

    Uses a seam-dodging grid so kinks of piecewise fields do not trigger
    spurious jacobian mismatches.
    """
    xs = _grid_1d(box.x_range[0], box.x_range[1], grid_resolution, dodge_seams=True)
    ys = _grid_1d(box.y_range[0], box.y_range[1], grid_resolution, dodge_seams=True)
    h = 1e-6 * max(1.0, box.x_range[1] - box.x_range[0])
    for x in xs:
        x = float(x)
        for y in ys:
            y = float(y)
            lo = float(system.curves.lower(y))
            hi = float(system.curves.upper(y))
            fv = system.fast(x, y)
            if lo <= x <= hi:
                if fv != 0.0:
                    raise ValueError(f"f must vanish inside the band, got f({x},{y})={fv}")
            elif x > hi:
                if fv >= 0.0:
                    raise ValueError(f"f must be negative above the band, got f({x},{y})={fv}")
            else:
                if fv <= 0.0:
                    raise ValueError(f"f must be positive below the band, got f({x},{y})={fv}")
            if system.fast_jacobian is not None:
                jx, jy = system.fast_jacobian(x, y)
                ax, ay = _fd_fast_jacobian(system.fast, x, y, h)
                scale = 1.0 + abs(jx) + abs(jy)
                if abs(jx - ax) > jac_rel_tol * scale or abs(jy - ay) > jac_rel_tol * scale:
                    raise ValueError(f"fast jacobian mismatch at ({x},{y})")
            if system.slow_jacobian is not None:
                t = 0.37  # arbitrary generic time
                (jx, jy), jt = system.slow_jacobian(x, y, t)
                (ax, ay), at = _fd_slow_jacobian(system.slow, x, y, t, h)
                scale = 1.0 + abs(jx) + abs(jy) + abs(jt)
                if (
                    abs(jx - ax) > jac_rel_tol * scale
                    or abs(jy - ay) > jac_rel_tol * scale
                    or abs(jt - at) > jac_rel_tol * scale
                ):
                    raise ValueError(f"slow jacobian mismatch at ({x},{y})")
