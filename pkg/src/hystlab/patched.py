"""Patched linearization: piecewise matrix-exponential solutions of local
linearizations, theta/2 hitting logic, delta-collar switching between
linearized and exact dynamics, and evaluators for the explicit admissibility
and deviation bounds that come with the scheme.

The scheme alternates two segment kinds on [0, T]:

* linearized segments, built from anchors outside the delta-collar of the
  band; each anchor's affine system is solved in closed form via the 2x2
  matrix exponential, and a new anchor is planted whenever the fast
  coordinate has moved theta/2 away from the previous one;
* exact segments, full nonlinear integration from the inner collar boundary
  until the trajectory reaches the 2*delta boundary (or final time).

The admissibility threshold eps_delta below is a worst-case sufficient
constant; for realistic systems it is astronomically small, so the builder
offers a "warn" mode that runs the scheme at moderate eps anyway and flags
every violated premise loudly. Bound evaluation then reports, next to the
theoretical formulas, "effective" variants in which the per-piece drift
budget eps/eps_delta is replaced by the measured per-piece drift ratio --
the exact quantity that constant exists to control.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BoundaryCurvePair,
    BoundsMetadata,
    CompactBox,
    FastSlowSystem,
    SampledPath,
    band_distance_many,
)
from .integrate import IntegratorConfig, integrate

__all__ = [
    "CapabilityError",
    "CollarError",
    "AdmissibilityError",
    "PatchBuildError",
    "LinearizedPiece",
    "PieceSegmentPath",
    "CollarConstants",
    "ThetaSchedule",
    "PatchSegment",
    "PatchSchedule",
    "PatchedSolution",
    "linearize_at",
    "solve_linear_piece",
    "advance_until_theta",
    "compute_collar_constants",
    "compute_epsilon_delta",
    "theta_schedule",
    "build_patched_solution",
    "evaluate_lemma45_bounds",
    "TransitCheck",
    "ExactSegmentCheck",
    "Lemma48Check",
    "Lemma45Report",
]


class CapabilityError(RuntimeError):
    """The system lacks the jacobians the linearization needs."""


class CollarError(ValueError):
    """The delta-collar swallows the whole off-band region."""


class AdmissibilityError(ValueError):
    """A precondition of the patched scheme fails; message quotes which."""


class PatchBuildError(RuntimeError):
    """The patched construction failed to progress."""


# ---------------------------------------------------------------------------
# linearized pieces and their closed-form solution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearizedPiece:
    """First-order expansion of (f, g) at anchor w, base time tau.

    The affine fast field is F1 + F2 . (x, y); the affine slow field is
    G1(t) + G2 . (x, y) with G1(t) = g1_const + dt_g * (t - tau). At (w, tau)
    the piece reproduces (f(w), g(w, tau)) exactly.
    """

    w: tuple[float, float]
    tau: float
    f1: float
    f2: tuple[float, float]
    g1_const: float
    g2: tuple[float, float]
    dt_g: float
    valid_until: float = math.inf


def linearize_at(system: FastSlowSystem, w: tuple[float, float], tau: float) -> LinearizedPiece:
    if system.fast_jacobian is None or system.slow_jacobian is None:
        raise CapabilityError("linearization requires fast and slow jacobians")
    xw, yw = float(w[0]), float(w[1])
    fv = system.fast(xw, yw)
    fx, fy = system.fast_jacobian(xw, yw)
    gv = system.slow(xw, yw, tau)
    (gx, gy), gt = system.slow_jacobian(xw, yw, tau)
    return LinearizedPiece(
        w=(xw, yw),
        tau=float(tau),
        f1=fv - fx * xw - fy * yw,
        f2=(fx, fy),
        g1_const=gv - gx * xw - gy * yw,
        g2=(gx, gy),
        dt_g=gt,
    )


# scalar phi-functions: h0 = e^z, h1 = (e^z-1)/z, h2 = (e^z-1-z)/z^2,
# plus derivatives, with power series near z = 0
def _h0(z):
    return cmath.exp(z)


def _h1(z):
    if abs(z) < 1e-4:
        return 1.0 + z * (0.5 + z * (1 / 6 + z * (1 / 24 + z / 120)))
    return (cmath.exp(z) - 1.0) / z


def _h2(z):
    if abs(z) < 1e-4:
        return 0.5 + z * (1 / 6 + z * (1 / 24 + z * (1 / 120 + z / 720)))
    return (cmath.exp(z) - 1.0 - z) / (z * z)


def _dh1(z):
    if abs(z) < 1e-4:
        return 0.5 + z * (1 / 3 + z * (0.125 + z * (1 / 30 + z / 144)))
    return ((z - 1.0) * cmath.exp(z) + 1.0) / (z * z)


def _dh2(z):
    if abs(z) < 1e-4:
        return 1 / 6 + z * (1 / 12 + z * (1 / 40 + z * (1 / 180 + z / 1008)))
    return ((z - 2.0) * cmath.exp(z) + z + 2.0) / (z * z * z)


class _Propagator:
    """Closed-form evaluator of one affine piece for a fixed epsilon.

    u' = A u + b + d s, u(0) = u0, with s the time since the anchor.
    A is decomposed once; each state query costs a handful of complex
    exponentials. Near-defective spectra (relative eigenvalue gap below
    1e-8) switch to the first-order matrix Taylor form, which is exact for
    truly defective 2x2 matrices.
    """

    __slots__ = ("defective", "lam1", "lam2", "mu", "q1", "q2", "v", "nv", "u0")

    def __init__(self, piece: LinearizedPiece, epsilon: float):
        fx, fy = piece.f2
        gx, gy = piece.g2
        a11, a12 = fx / epsilon, fy / epsilon
        a21, a22 = gx, gy
        b = (piece.f1 / epsilon, piece.g1_const)
        d = (0.0, piece.dt_g)
        u0 = piece.w
        tr = a11 + a22
        det = a11 * a22 - a12 * a21
        mu = 0.5 * tr
        q = cmath.sqrt(complex(mu * mu - det))
        lam1, lam2 = mu + q, mu - q
        self.u0 = u0
        if abs(lam1 - lam2) <= 1e-8 * (1.0 + abs(lam1) + abs(lam2)):
            self.defective = True
            self.mu = mu
            n11, n12 = a11 - mu, a12
            n21, n22 = a21, a22 - mu
            self.v = (u0, b, d)
            self.nv = tuple(
                (n11 * vx + n12 * vy, n21 * vx + n22 * vy) for vx, vy in (u0, b, d)
            )
        else:
            self.defective = False
            self.lam1, self.lam2 = lam1, lam2
            inv = 1.0 / (lam1 - lam2)
            # spectral projector P1 = (A - lam2 I)/(lam1 - lam2); P2 = I - P1
            p11, p12 = (a11 - lam2) * inv, a12 * inv
            p21, p22 = a21 * inv, (a22 - lam2) * inv
            self.q1 = tuple(
                (p11 * vx + p12 * vy, p21 * vx + p22 * vy) for vx, vy in (u0, b, d)
            )
            self.q2 = tuple(
                (vx - q1x, vy - q1y)
                for (vx, vy), (q1x, q1y) in zip((u0, b, d), self.q1)
            )

    def xy(self, s: float) -> tuple[float, float]:
        if s == 0.0:
            return self.u0
        if self.defective:
            z = s * self.mu
            h0, h1, h2 = _h0(z), _h1(z), _h2(z)
            e0, e1, e2 = cmath.exp(z), _dh1(z), _dh2(z)
            (ux, uy), (bx, by), (dx, dy) = self.v
            (nux, nuy), (nbx, nby), (ndx, ndy) = self.nv
            x = h0 * ux + s * e0 * nux + s * (h1 * bx + s * e1 * nbx) + s * s * (h2 * dx + s * e2 * ndx)
            y = h0 * uy + s * e0 * nuy + s * (h1 * by + s * e1 * nby) + s * s * (h2 * dy + s * e2 * ndy)
        else:
            z1, z2 = s * self.lam1, s * self.lam2
            h01, h02 = _h0(z1), _h0(z2)
            h11, h12 = _h1(z1), _h1(z2)
            h21, h22 = _h2(z1), _h2(z2)
            (u1x, u1y), (b1x, b1y), (d1x, d1y) = self.q1
            (u2x, u2y), (b2x, b2y), (d2x, d2y) = self.q2
            x = h01 * u1x + h02 * u2x + s * (h11 * b1x + h12 * b2x) + s * s * (h21 * d1x + h22 * d2x)
            y = h01 * u1y + h02 * u2y + s * (h11 * b1y + h12 * b2y) + s * s * (h21 * d1y + h22 * d2y)
        return x.real, y.real


def solve_linear_piece(piece: LinearizedPiece, epsilon: float, t):
    """Evaluate the piece's closed-form solution at time(s) t."""
    prop = _Propagator(piece, epsilon)
    if np.ndim(t) == 0:
        return prop.xy(float(t) - piece.tau)
    out = np.array([prop.xy(float(tk) - piece.tau) for tk in np.asarray(t)])
    return out[:, 0], out[:, 1]


@dataclass(frozen=True)
class PieceSegmentPath:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t_hit: float
    hit: bool  # True when the theta/2 deviation was reached before t_max


def _find_theta_hit(prop: _Propagator, x_anchor: float, epsilon: float, theta: float,
                    s_max: float, speed_hint: float, tol: float) -> tuple[float, bool]:
    """First s in (0, s_max] with |x(s) - x_anchor| = theta/2, else (s_max, False)."""
    half = 0.5 * theta
    guess = epsilon * theta / (2.0 * speed_hint) if speed_hint > 0 else s_max
    s = min(max(guess / 8.0, 1e-300), s_max)
    s_prev = 0.0
    hit_s = None
    while True:
        if abs(prop.xy(s)[0] - x_anchor) >= half:
            hit_s = s
            break
        if s >= s_max:
            return s_max, False
        s_prev = s
        s = min(s * 1.5, s_max)
    lo, hi = s_prev, hit_s
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if abs(prop.xy(mid)[0] - x_anchor) >= half:
            hi = mid
        else:
            lo = mid
    return hi, True


def advance_until_theta(
    piece: LinearizedPiece,
    epsilon: float,
    theta: float,
    t_max: float,
    n_samples: int = 33,
) -> PieceSegmentPath:
    """Advance one linearized piece until the fast coordinate deviates theta/2
    from the anchor (located by bisection on the closed-form solution to
    absolute time tolerance 1e-12 * t_max), or until t_max."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    prop = _Propagator(piece, epsilon)
    s_max = t_max - piece.tau
    if s_max <= 0:
        raise ValueError("t_max must exceed the piece base time")
    speed = abs(piece.f1 + piece.f2[0] * piece.w[0] + piece.f2[1] * piece.w[1]) / epsilon
    tol = 1e-12 * max(t_max, 1.0)
    s_hit, hit = _find_theta_hit(prop, piece.w[0], epsilon, theta, s_max, speed * epsilon, tol)
    ss = np.linspace(0.0, s_hit, n_samples)
    pts = np.array([prop.xy(float(s)) for s in ss])
    return PieceSegmentPath(piece.tau + ss, pts[:, 0], pts[:, 1], piece.tau + s_hit, hit)


# ---------------------------------------------------------------------------
# collar constants and thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollarConstants:
    f_plus: float   # (1/2) max f over delta-separated M+ (negative)
    f_minus: float  # (1/2) min f over delta-separated M- (positive)
    delta: float

    @property
    def f_m(self) -> float:
        return min(abs(self.f_plus), self.f_minus)


def compute_collar_constants(
    system: FastSlowSystem,
    box: CompactBox,
    delta: float,
    grid: int = 201,
) -> CollarConstants:
    xs = np.linspace(box.x_range[0], box.x_range[1], grid)
    ys = np.linspace(box.y_range[0], box.y_range[1], grid)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    xg = xg.ravel()
    yg = yg.ravel()
    # augment with points right on the separation shell (vertical offset
    # delta * sqrt(1 + L^2) guarantees Euclidean distance >= delta and is
    # sharp for affine curves); without them a coarse grid overestimates f_m
    # and the derived bounds would be spuriously tight
    sec_up = math.sqrt(1.0 + system.curves.lipschitz_upper**2)
    sec_lo = math.sqrt(1.0 + system.curves.lipschitz_lower**2)
    y_shell = np.linspace(box.y_range[0], box.y_range[1], 4 * grid)
    up_shell_x = np.asarray(system.curves.upper(y_shell)) + delta * sec_up
    lo_shell_x = np.asarray(system.curves.lower(y_shell)) - delta * sec_lo
    keep_up = (up_shell_x >= box.x_range[0]) & (up_shell_x <= box.x_range[1])
    keep_lo = (lo_shell_x >= box.x_range[0]) & (lo_shell_x <= box.x_range[1])
    xg = np.concatenate((xg, up_shell_x[keep_up], lo_shell_x[keep_lo]))
    yg = np.concatenate((yg, y_shell[keep_up], y_shell[keep_lo]))

    dist = band_distance_many(system.curves, xg, yg)
    lo = np.asarray(system.curves.lower(yg))
    hi = np.asarray(system.curves.upper(yg))
    sep = dist >= delta * (1.0 - 1e-12)
    plus = sep & (xg > hi)
    minus = sep & (xg < lo)
    if not np.any(plus) or not np.any(minus):
        raise CollarError(
            f"delta={delta} leaves no separated points in M+ or M- on the grid"
        )
    f_plus_vals = np.array([system.fast(float(a), float(b)) for a, b in zip(xg[plus], yg[plus])])
    f_minus_vals = np.array([system.fast(float(a), float(b)) for a, b in zip(xg[minus], yg[minus])])
    return CollarConstants(0.5 * float(np.max(f_plus_vals)), 0.5 * float(np.min(f_minus_vals)), delta)


def compute_epsilon_delta(bounds: BoundsMetadata, curves: BoundaryCurvePair, f_m: float) -> float:
    """Admissibility threshold

        eps_delta = min{ f_m / (2 (1+L_pm) C_FG)
                         * [ sqrt(2) (C_M + 2 C_FG / f_m) e^{2 C_FG / f_m} + 1 ]^{-1},
                         1 }

    Worst-case sufficient constant; underflows to 0 when the exponential
    overflows double precision.
    """
    if f_m <= 0:
        raise ValueError("f_m must be positive")
    l_pm = curves.combined
    c_fg = bounds.c_fg
    if c_fg == 0.0:
        return 1.0  # limit C_FG -> 0+: threshold grows past the cap
    arg = 2.0 * c_fg / f_m
    if arg > 700.0:
        return 0.0
    bracket = math.sqrt(2.0) * (bounds.c_m + 2.0 * c_fg / f_m) * math.exp(arg) + 1.0
    return min(f_m / (2.0 * (1.0 + l_pm) * c_fg) / bracket, 1.0)


@dataclass(frozen=True)
class ThetaSchedule:
    value: float
    raw: float
    floored: bool
    epsilon: float
    t_final: float
    lipschitz: float


def theta_schedule(epsilon: float, t_final: float, lipschitz: float, floor: float = 1e-12) -> ThetaSchedule:
    """Deviation budget theta_eps = max{floor, e^{-T L / (2 eps)} / (1 + 1/eps)}.

    The unfloored value is o(e^{-T L / (2 eps)}) as eps -> 0. When the floor
    binds, the schedule no longer satisfies the theory's smallness requirement
    and downstream bound checks must be reported as not applicable.
    """
    if epsilon <= 0 or t_final <= 0 or lipschitz <= 0:
        raise ValueError("epsilon, t_final, lipschitz must be positive")
    exponent = -t_final * lipschitz / (2.0 * epsilon)
    raw = math.exp(exponent) / (1.0 + 1.0 / epsilon) if exponent > -745.0 else 0.0
    floored = raw < floor
    return ThetaSchedule(max(raw, floor), raw, floored, epsilon, t_final, lipschitz)


# ---------------------------------------------------------------------------
# the patched construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatchSegment:
    kind: str  # "exact" | "linearized"
    t_start: float
    t_end: float
    w_start: tuple[float, float]
    w_end: tuple[float, float]
    # linearized segments: anchor bookkeeping (piece j spans [tau[j], tau[j+1]]
    # with tau[K] = t_end); exact segments leave these None
    piece_tau: np.ndarray | None = None
    piece_x: np.ndarray | None = None
    piece_y: np.ndarray | None = None

    @property
    def pieces(self) -> int:
        return 0 if self.piece_tau is None else len(self.piece_tau)


@dataclass(frozen=True)
class PatchSchedule:
    delta: float
    theta: float
    epsilon: float
    epsilon_delta: float
    collar: CollarConstants
    segments: tuple[PatchSegment, ...]
    admissible: bool
    messages: tuple[str, ...]


@dataclass(frozen=True)
class PatchedSolution:
    schedule: PatchSchedule
    x: SampledPath
    y: SampledPath


def _scalar_band_distance(curves: BoundaryCurvePair, x: float, y: float) -> float:
    lo = float(curves.lower(y))
    hi = float(curves.upper(y))
    if lo <= x <= hi:
        return 0.0
    if x > hi:
        return float(curves.upper.distance_to_graph(x, y))
    return float(curves.lower.distance_to_graph(x, y))


def _admissibility_messages(epsilon, theta, eps_delta, f_m, c_df) -> list[str]:
    msgs = []
    if epsilon >= 0.5 * eps_delta:
        msgs.append(
            f"epsilon={epsilon:g} violates epsilon < epsilon_delta/2 "
            f"(computed epsilon_delta={eps_delta:.6g})"
        )
    theta_cap = min(f_m / c_df, 1.0) if c_df > 0 else 1.0
    if theta >= theta_cap:
        msgs.append(
            f"theta={theta:g} violates theta < min(f_m/C_Df, 1) = {theta_cap:.6g}"
        )
    return msgs


def build_patched_solution(
    system: FastSlowSystem,
    epsilon: float,
    w0: tuple[float, float],
    delta: float,
    theta: float,
    t_final: float,
    *,
    bounds: BoundsMetadata | None = None,
    collar: CollarConstants | None = None,
    admissibility: str = "strict",
    exact_config: IntegratorConfig | None = None,
    max_pieces_per_segment: int = 2_000_000,
) -> PatchedSolution:
    """Alternate linearized patching (outside the delta-collar) with exact
    integration (inside the 2*delta collar) from w0 on [0, t_final].

    ``admissibility="strict"`` raises AdmissibilityError when a scheme
    precondition fails; ``"warn"`` proceeds anyway -- the moderate-epsilon
    demonstration mode -- and records every violated bound in the schedule.
    """
    if admissibility not in ("strict", "warn"):
        raise ValueError("admissibility must be 'strict' or 'warn'")
    if system.box is None:
        raise ValueError("system needs a working box for the patched scheme")
    from .core import estimate_bounds  # local import keeps module load light

    box = system.box
    if bounds is None:
        bounds = estimate_bounds(system, box, t_horizon=t_final)
    if collar is None:
        collar = compute_collar_constants(system, box, delta)
    f_m = collar.f_m
    eps_delta = compute_epsilon_delta(bounds, system.curves, f_m)
    messages = _admissibility_messages(epsilon, theta, eps_delta, f_m, bounds.c_df)
    if messages:
        if admissibility == "strict":
            raise AdmissibilityError("; ".join(messages))
        for m in messages:
            warnings.warn("patched scheme outside its admissibility regime: " + m)

    curves = system.curves
    cfg = exact_config or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)
    two_delta = 2.0 * delta

    t = 0.0
    w = (float(w0[0]), float(w0[1]))
    path_t = [t]
    path_x = [w[0]]
    path_y = [w[1]]
    segments: list[PatchSegment] = []
    tiny = 1e-13 * max(t_final, 1.0)

    in_collar = _scalar_band_distance(curves, *w) <= delta
    while t < t_final - tiny:
        if in_collar:
            t_end, w_end, seg_t, seg_x, seg_y = _exact_segment(
                system, epsilon, w, t, t_final, two_delta, cfg
            )
            segments.append(PatchSegment("exact", t, t_end, w, w_end))
        else:
            t_end, w_end, seg_t, seg_x, seg_y, taus, axs, ays = _linearized_segment(
                system, epsilon, w, t, t_final, delta, theta, max_pieces_per_segment
            )
            segments.append(
                PatchSegment(
                    "linearized", t, t_end, w, w_end,
                    piece_tau=np.asarray(taus), piece_x=np.asarray(axs), piece_y=np.asarray(ays),
                )
            )
        path_t.extend(seg_t)
        path_x.extend(seg_x)
        path_y.extend(seg_y)
        t, w = t_end, w_end
        in_collar = not in_collar

    times = np.asarray(path_t)
    keep = np.concatenate(([True], np.diff(times) > 0))
    times = times[keep]
    xs = np.asarray(path_x)[keep]
    ys = np.asarray(path_y)[keep]
    schedule = PatchSchedule(
        delta=delta,
        theta=theta,
        epsilon=epsilon,
        epsilon_delta=eps_delta,
        collar=collar,
        segments=tuple(segments),
        admissible=not messages,
        messages=tuple(messages),
    )
    return PatchedSolution(schedule, SampledPath(times, xs), SampledPath(times, ys))


def _exact_segment(system, epsilon, w, t0, t_final, two_delta, cfg):
    """Integrate the full system until band distance reaches 2*delta or t_final."""
    curves = system.curves
    chunk = max((t_final - t0) * 1e-3, two_delta / 2.0 / max(1.0, 10.0))
    t = t0
    w_cur = w
    seg_t: list[float] = []
    seg_x: list[float] = []
    seg_y: list[float] = []
    while t < t_final:
        t_chunk = min(t + chunk, t_final)
        run = integrate(system, epsilon, w_cur, t, t_chunk, cfg)
        dist = band_distance_many(curves, run.x.values, run.y.values)
        crossed = np.flatnonzero(dist >= two_delta)
        if crossed.size and crossed[0] > 0:
            k = int(crossed[0])
            ta, tb = run.times[k - 1], run.times[k]
            xa, xb = run.x.values[k - 1], run.x.values[k]
            ya, yb = run.y.values[k - 1], run.y.values[k]
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm = xa + mid * (xb - xa)
                ym = ya + mid * (yb - ya)
                if _scalar_band_distance(curves, xm, ym) >= two_delta:
                    hi = mid
                else:
                    lo = mid
            tc = float(ta + hi * (tb - ta))
            xc = float(xa + hi * (xb - xa))
            yc = float(ya + hi * (yb - ya))
            seg_t.extend(run.times[1:k].tolist() + [tc])
            seg_x.extend(run.x.values[1:k].tolist() + [xc])
            seg_y.extend(run.y.values[1:k].tolist() + [yc])
            return tc, (xc, yc), seg_t, seg_x, seg_y
        seg_t.extend(run.times[1:].tolist())
        seg_x.extend(run.x.values[1:].tolist())
        seg_y.extend(run.y.values[1:].tolist())
        t = float(run.times[-1])
        w_cur = (float(run.x.values[-1]), float(run.y.values[-1]))
        chunk = min(chunk * 2.0, t_final - t if t_final > t else chunk)
    return t, w_cur, seg_t, seg_x, seg_y


def _linearized_segment(system, epsilon, w, t0, t_final, delta, theta, max_pieces):
    """Patch linearized pieces until the path enters the closed delta-collar."""
    curves = system.curves
    taus: list[float] = []
    axs: list[float] = []
    ays: list[float] = []
    seg_t: list[float] = []
    seg_x: list[float] = []
    seg_y: list[float] = []
    t = t0
    w_cur = w
    tol = 1e-12 * max(t_final, 1.0)
    while t < t_final:
        piece = linearize_at(system, w_cur, t)
        prop = _Propagator(piece, epsilon)
        speed0 = abs(system.fast(*w_cur))
        s_max = t_final - t
        s_hit, hit = _find_theta_hit(prop, w_cur[0], epsilon, theta, s_max, speed0, tol)

        # collar-entry scan at piece midpoint and endpoint; refine by bisection
        entered = None
        for s_probe in (0.5 * s_hit, s_hit):
            xp, yp = prop.xy(s_probe)
            if _scalar_band_distance(curves, xp, yp) <= delta:
                entered = s_probe
                break
        if entered is not None:
            lo = 0.0
            hi = entered
            for _ in range(80):
                if hi - lo <= tol:
                    break
                mid = 0.5 * (lo + hi)
                xm, ym = prop.xy(mid)
                if _scalar_band_distance(curves, xm, ym) <= delta:
                    hi = mid
                else:
                    lo = mid
            s_end = hi
            xe, ye = prop.xy(s_end)
            taus.append(t)
            axs.append(w_cur[0])
            ays.append(w_cur[1])
            t_end = t + s_end
            seg_t.append(t_end)
            seg_x.append(xe)
            seg_y.append(ye)
            return t_end, (float(xe), float(ye)), seg_t, seg_x, seg_y, taus, axs, ays

        xe, ye = prop.xy(s_hit)
        taus.append(t)
        axs.append(w_cur[0])
        ays.append(w_cur[1])
        t = t + s_hit
        w_cur = (float(xe), float(ye))
        seg_t.append(t)
        seg_x.append(w_cur[0])
        seg_y.append(w_cur[1])
        if not hit:  # ran to t_final without reaching theta/2
            break
        if len(taus) > max_pieces:
            raise PatchBuildError(
                f"linearized phase exceeded {max_pieces} pieces without reaching the collar"
            )
    return t, w_cur, seg_t, seg_x, seg_y, taus, axs, ays


# ---------------------------------------------------------------------------
# bound evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransitCheck:
    """One linearized transit versus the local-time, count, and deviation bounds.

    The effective drift ratio is 2 L_pm mean|dy_piece| / theta: the counting
    argument telescopes the per-piece drifts, so their mean is exactly what
    the theory's eps/eps_delta budget stands in for. The max drift feeds the
    per-piece y-budget diagnostic (|y - y_anchor| <= theta/2), which is only
    guaranteed inside the admissibility regime.
    """

    t_start: float
    t_end: float
    start_dist: float          # dist(v, band + B(0, delta)) at transit start
    duration: float
    pieces: int
    max_piece_duration: float
    per_piece_time_bound: float      # eps * theta / f_m
    max_piece_dy: float
    mean_piece_dy: float
    y_budget_ok: bool                # max|dy_piece| <= theta/2
    drift_ratio_theory: float        # eps / eps_delta
    drift_ratio_effective: float     # 2 L_pm mean|dy_piece| / theta
    k_bound_theory: float            # ceil formula with theory ratio (inf if vacuous)
    k_bound_effective: float
    time_bound_theory: float
    time_bound_effective: float
    k1_effective: float
    k2_effective: float
    monotone_anchors: bool


@dataclass(frozen=True)
class ExactSegmentCheck:
    t_start: float
    t_end: float
    duration: float
    reached_t_final: bool
    min_duration_bound: float  # delta / C_g


@dataclass(frozen=True)
class Lemma48Check:
    segment_cap: float        # T C_g / delta
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    deviation_bound: float    # theta^2 e^{T L / eps} C4
    representable: bool
    measured_deviation: float | None


@dataclass(frozen=True)
class Lemma45Report:
    epsilon: float
    theta: float
    delta: float
    epsilon_delta: float
    lemma45_applicable: bool  # eps < eps_delta: theory bounds binding as stated
    f_m: float
    transits: tuple[TransitCheck, ...]
    exact_segments: tuple[ExactSegmentCheck, ...]
    lemma48: Lemma48Check


def transit_k_bound(start_dist: float, l_pm: float, theta: float, ratio: float) -> float:
    """Piece-count ceiling for one transit: ceil(2 (1+L_pm) dist / (theta (1-r)));
    inf when the drift ratio r reaches 1 (no guaranteed progress)."""
    if not ratio < 1.0:
        return math.inf
    return float(math.ceil(2.0 * (1.0 + l_pm) * start_dist / (theta * (1.0 - ratio))))


def evaluate_lemma45_bounds(
    schedule: PatchSchedule,
    bounds: BoundsMetadata,
    curves: BoundaryCurvePair,
    f_m: float,
    epsilon: float,
    t_final: float | None = None,
    exact_run=None,
) -> Lemma45Report:
    """Evaluate the scheme's explicit bounds and the measured counterparts.

    For each linearized transit the theoretical formulas use the ratio
    eps/eps_delta exactly as displayed; the "effective" variants substitute
    the measured mean per-piece drift ratio 2 L_pm mean|dy| / theta, the
    quantity eps/eps_delta majorizes in the underlying telescoping argument.
    When a ratio is >= 1 the corresponding bound is reported as inf (not
    applicable).
    """
    l_pm = curves.combined
    eps_delta = schedule.epsilon_delta
    theta = schedule.theta
    delta = schedule.delta
    ratio_th = epsilon / eps_delta if eps_delta > 0 else math.inf
    if t_final is None:
        t_final = max(seg.t_end for seg in schedule.segments)

    transits = []
    exact_checks = []
    for seg in schedule.segments:
        if seg.kind == "exact":
            exact_checks.append(
                ExactSegmentCheck(
                    t_start=seg.t_start,
                    t_end=seg.t_end,
                    duration=seg.t_end - seg.t_start,
                    reached_t_final=abs(seg.t_end - t_final) <= 1e-10 * max(1.0, t_final),
                    min_duration_bound=delta / bounds.c_g,
                )
            )
            continue
        taus = seg.piece_tau
        axs = seg.piece_x
        ays = seg.piece_y
        ends = np.concatenate((taus[1:], [seg.t_end]))
        piece_dt = ends - taus
        anchor_y_end = np.concatenate((ays[1:], [seg.w_end[1]]))
        piece_dy = np.abs(anchor_y_end - ays)
        anchor_x_end = np.concatenate((axs[1:], [seg.w_end[0]]))
        dx = anchor_x_end - axs
        mono = bool(np.all(dx <= 1e-12)) or bool(np.all(dx >= -1e-12))
        start_dist = max(_scalar_band_distance(curves, *seg.w_start) - delta, 0.0)
        max_dy = float(np.max(piece_dy)) if piece_dy.size else 0.0
        mean_dy = float(np.mean(piece_dy)) if piece_dy.size else 0.0
        ratio_eff = 2.0 * l_pm * mean_dy / theta

        def _bounds_for(ratio):
            if not ratio < 1.0:
                return math.inf, math.inf, math.inf, math.inf
            core = 2.0 * (1.0 + l_pm) * start_dist / (f_m * (1.0 - ratio)) + 1.0 / bounds.c_df
            k_bound = transit_k_bound(start_dist, l_pm, theta, ratio)
            time_bound = epsilon * core
            k1 = core * (2.0 * bounds.c_d2 + epsilon**3 / f_m**2)
            k2 = math.exp(min(2.0 * bounds.lipschitz * core, 700.0))
            return k_bound, time_bound, k1, k2

        k_th, t_th, _, _ = _bounds_for(ratio_th)
        k_eff, t_eff, k1_eff, k2_eff = _bounds_for(ratio_eff)
        transits.append(
            TransitCheck(
                t_start=seg.t_start,
                t_end=seg.t_end,
                start_dist=start_dist,
                duration=seg.t_end - seg.t_start,
                pieces=seg.pieces,
                max_piece_duration=float(np.max(piece_dt)) if piece_dt.size else 0.0,
                per_piece_time_bound=epsilon * theta / f_m,
                max_piece_dy=max_dy,
                mean_piece_dy=mean_dy,
                y_budget_ok=bool(max_dy <= 0.5 * theta),
                drift_ratio_theory=ratio_th,
                drift_ratio_effective=ratio_eff,
                k_bound_theory=k_th,
                k_bound_effective=k_eff,
                time_bound_theory=t_th,
                time_bound_effective=t_eff,
                k1_effective=k1_eff,
                k2_effective=k2_eff,
                monotone_anchors=mono,
            )
        )

    # Lemma 4.8 global deviation bound, constants assembled per the proof chain
    seg_cap = t_final * bounds.c_g / delta
    if schedule.segments and schedule.segments[0].kind == "linearized":
        w0 = schedule.segments[0].w_start
        dist0 = max(_scalar_band_distance(curves, *w0) - delta, 0.0)
    else:
        dist0 = 0.0
    c0 = 4.0 * (1.0 + l_pm) * dist0 / f_m + 1.0 / bounds.c_df
    c1 = max(c0, 4.0 * (1.0 + l_pm) * delta / f_m + 1.0 / bounds.c_df)
    c2 = c1 * (2.0 * bounds.c_d2 + schedule.epsilon_delta**3 / f_m**2)
    c3 = 2.0 * bounds.lipschitz * c1
    half_k = max((seg_cap - 1.0) / 2.0, 0.5)
    exp_arg = half_k * c3 + t_final * bounds.lipschitz
    dev_exp_arg = t_final * bounds.lipschitz / epsilon
    representable = (exp_arg + dev_exp_arg) < 700.0
    if representable:
        c4 = half_k * c2 * math.exp(exp_arg)
        dev_bound = theta**2 * math.exp(dev_exp_arg) * c4
        representable = math.isfinite(dev_bound)
    else:
        c4 = math.inf
        dev_bound = math.inf

    measured_dev = None
    if exact_run is not None:
        measured_dev = _measured_deviation(exact_run)

    lemma48 = Lemma48Check(
        segment_cap=seg_cap,
        c0=c0,
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        deviation_bound=dev_bound,
        representable=representable,
        measured_deviation=measured_dev,
    )
    return Lemma45Report(
        epsilon=epsilon,
        theta=theta,
        delta=delta,
        epsilon_delta=eps_delta,
        lemma45_applicable=bool(epsilon < eps_delta),
        f_m=f_m,
        transits=tuple(transits),
        exact_segments=tuple(exact_checks),
        lemma48=lemma48,
    )


def _measured_deviation(pair) -> float:
    """Sup over the common window of |x - x~| + |y - y~| for a
    (patched: PatchedSolution, run: EpsRun) pair."""
    patched, run = pair
    t_lo = max(patched.x.t0, run.x.t0)
    t_hi = min(patched.x.t1, run.x.t1)
    grid = np.union1d(patched.x.times, run.times)
    grid = grid[(grid >= t_lo) & (grid <= t_hi)]
    dev = np.abs(patched.x(grid) - run.x(grid)) + np.abs(patched.y(grid) - run.y(grid))
    return float(np.max(dev))
