"""Command-line driver: config parsing, run orchestration, CSV/SVG emission.

Subcommands
-----------
simulate    integrate the full eps-system; CSV columns t,x,y,p,band_distance,region
limit       solve the play-coupled singular limit; same CSV contract
converge    eps-sweep against the limit reference; convergence CSV + log-log plot
bifurcate   amplitude sweep over the feedback parameter c
patched     patched-linearization schedule + bound-comparison report

Configuration is a single sectioned key-value file ([system], [run], [sweep],
[patched], [output]); every figure of a study is reproducible from one such
file. All commands are deterministic: the same config yields byte-identical
CSV output. Exit codes: 0 success, 1 domain/precondition error,
2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, limit, oscillator, patched, projection
from .core import CompactBox, DomainError, band_distance_many, estimate_bounds
from .integrate import BoxEscapeError, IntegratorConfig, StiffnessError, integrate
from .oscillator import BoundednessError, OscillatorParams
from .svgplot import Figure, Panel

__all__ = ["main"]


class ConfigError(Exception):
    pass


_DOMAIN_ERRORS = (
    DomainError,
    BoundednessError,
    BoxEscapeError,
    StiffnessError,
    patched.AdmissibilityError,
    patched.CollarError,
    patched.CapabilityError,
    patched.PatchBuildError,
    ValueError,
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest round-trip decimal
    return str(v)


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(p, encoding="utf-8") as fh:
                cfg.read_file(fh, source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    return cfg


def _get(cfg, section, key, cast, default=None, required=False):
    if cfg.has_option(section, key):
        raw = cfg.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"field '{key}' in [{section}]: cannot parse {raw!r}") from exc
    if required:
        raise ConfigError(f"missing required field '{key}' in [{section}]")
    return default


def _float_list(raw: str) -> list[float]:
    items = [s.strip() for s in raw.replace(";", ",").split(",") if s.strip()]
    return [float(s) for s in items]


def _params_from_config(cfg, preset_name: str | None) -> OscillatorParams:
    name = preset_name or _get(cfg, "system", "preset", str)
    if name is not None:
        try:
            params = oscillator.preset(name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    else:
        params = OscillatorParams(
            a=_get(cfg, "system", "a", float, required=True),
            b=_get(cfg, "system", "b", float, required=True),
            c=_get(cfg, "system", "c", float, required=True),
            omega=_get(cfg, "system", "omega", float, required=True),
            epsilon=_get(cfg, "run", "epsilon", float, required=True),
        )
    # explicit keys override the preset
    overrides = {}
    for key in ("a", "b", "c", "omega"):
        v = _get(cfg, "system", key, float)
        if v is not None:
            overrides[key] = v
    eps = _get(cfg, "run", "epsilon", float)
    if eps is not None:
        overrides["epsilon"] = eps
    if overrides:
        from dataclasses import replace

        params = replace(params, **overrides)
    return params


def _run_settings(cfg):
    x0 = _get(cfg, "run", "x0", float, default=2.5)
    y0 = _get(cfg, "run", "y0", float, default=0.5)
    t_final = _get(cfg, "run", "t_final", float, default=50.0)
    rel = _get(cfg, "run", "rel_tol", float, default=1e-6)
    ab = _get(cfg, "run", "abs_tol", float, default=1e-6)
    return (x0, y0), t_final, IntegratorConfig(rel_tol=rel, abs_tol=ab)


def _out_path(args, cfg, name: str) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = _get(cfg, "output", "prefix", str, default="")
    return out_dir / (f"{prefix}{name}" if prefix else name)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _region_labels(curves, xs, ys):
    lo = np.asarray(curves.lower(ys))
    hi = np.asarray(curves.upper(ys))
    out = np.where(xs > hi, "M+", np.where(xs < lo, "M-", "M0"))
    return out


def _phase_figure(title, curves, xs, ys, extra=None):
    fig = Figure()
    phase = fig.add(Panel(title, "y", "x"))
    y_grid = np.linspace(float(np.min(ys)) - 0.5, float(np.max(ys)) + 0.5, 101)
    phase.band(y_grid, curves.lower(y_grid), curves.upper(y_grid))
    phase.line(y_grid, curves.lower(y_grid), "F-")
    phase.line(y_grid, curves.upper(y_grid), "F+")
    phase.line(ys, xs, "trajectory")
    if extra is not None:
        for xs_e, ys_e, label in extra:
            phase.line(ys_e, xs_e, label, dashed=True)
    return fig, phase


def cmd_simulate(args, cfg) -> int:
    params = _params_from_config(cfg, args.preset)
    w0, t_final, icfg = _run_settings(cfg)
    system = oscillator.make_system(params)
    run = integrate(system, params.epsilon, w0, 0.0, t_final, icfg)
    p = projection.project_run(run, system.curves)
    dist = band_distance_many(system.curves, run.x.values, run.y.values)
    regions = _region_labels(system.curves, run.x.values, run.y.values)
    rows = zip(run.times, run.x.values, run.y.values, p.values, dist, regions)
    csv_path = _out_path(args, cfg, "simulate.csv")
    _write_csv(csv_path, ["t", "x", "y", "p", "band_distance", "region"], rows)
    print(f"wrote {csv_path} ({len(run.times)} samples)")
    if args.plot:
        fig, _ = _phase_figure("eps-system phase portrait", system.curves, run.x.values, run.y.values)
        series = fig.add(Panel("time series", "t", "value"))
        series.line(run.times, run.y.values, "y")
        series.line(run.times, run.x.values, "x", dashed=True)
        svg_path = _out_path(args, cfg, "simulate.svg")
        fig.write(svg_path)
        print(f"wrote {svg_path}")
    return 0


def cmd_limit(args, cfg) -> int:
    params = _params_from_config(cfg, args.preset)
    w0, t_final, _ = _run_settings(cfg)
    dt = _get(cfg, "run", "dt", float, default=1e-4 * t_final)
    curves = oscillator.oscillator_curves()
    sol = limit.solve_limit(oscillator.make_system(params).slow, curves, w0[0], w0[1], t_final, dt)
    dist = band_distance_many(curves, sol.x.values, sol.y.values)
    regions = _region_labels(curves, sol.x.values, sol.y.values)
    rows = zip(sol.x.times, sol.x.values, sol.y.values, sol.x.values, dist, regions)
    csv_path = _out_path(args, cfg, "limit.csv")
    _write_csv(csv_path, ["t", "x", "y", "p", "band_distance", "region"], rows)
    print(f"wrote {csv_path} ({len(sol.x.times)} samples)")
    if args.plot:
        fig, _ = _phase_figure("singular-limit phase portrait", curves, sol.x.values, sol.y.values)
        series = fig.add(Panel("time series", "t", "value"))
        series.line(sol.y.times, sol.y.values, "y-bar")
        series.line(sol.x.times, sol.x.values, "x-bar", dashed=True)
        svg_path = _out_path(args, cfg, "limit.svg")
        fig.write(svg_path)
        print(f"wrote {svg_path}")
    return 0


def cmd_converge(args, cfg) -> int:
    params = _params_from_config(cfg, args.preset)
    w0, t_final, icfg = _run_settings(cfg)
    raw = _get(cfg, "sweep", "eps_list", str, required=True)
    eps_list = _float_list(raw)
    if not eps_list:
        raise ConfigError("field 'eps_list' in [sweep] is empty")
    q = _get(cfg, "sweep", "q", float, default=2.0)
    system = oscillator.make_system(params)
    table = analysis.epsilon_sweep(
        system, system.curves, w0, t_final, eps_list, q, run_config=icfg
    )
    header = ["epsilon", "sup_y_err", "sup_x_err_tail", "t_eps", "L2_x_err", "W12_y_err"]
    rows = [
        [r.epsilon, r.sup_y_err, r.sup_x_err_tail, r.t_eps, r.l2_x_err, r.w12_y_err]
        for r in table.rows
    ]
    if table.fitted_orders is not None:
        o = table.fitted_orders
        rows.append(
            ["order", o["sup_y_err"], o["sup_x_err_tail"], "", o["l2_x_err"], o["w12_y_err"]]
        )
    csv_path = _out_path(args, cfg, "converge.csv")
    _write_csv(csv_path, header, rows)
    print(f"wrote {csv_path} ({len(table.rows)} epsilon rows)")
    if args.plot:
        fig = Figure()
        panel = fig.add(Panel("error vs epsilon", "epsilon", "error", log_x=True, log_y=True))
        eps = [r.epsilon for r in table.rows]
        for name, label in (
            ("sup_y_err", "sup |y_eps - y|"),
            ("l2_x_err", "L2 |x_eps - x|"),
            ("sup_x_err_tail", "sup tail |x_eps - x|"),
        ):
            panel.line(eps, [getattr(r, name) for r in table.rows], label)
        svg_path = _out_path(args, cfg, "converge.svg")
        fig.write(svg_path)
        print(f"wrote {svg_path}")
    return 0


def cmd_bifurcate(args, cfg) -> int:
    params = _params_from_config(cfg, args.preset)
    raw = _get(cfg, "sweep", "c_values", str, required=True)
    c_values = _float_list(raw)
    if not c_values:
        raise ConfigError("field 'c_values' in [sweep] is empty")
    periods_settle = _get(cfg, "sweep", "settle_periods", float, default=50.0)
    periods_measure = _get(cfg, "sweep", "measure_periods", float, default=25.0)
    t_settle = periods_settle / params.omega
    t_measure = periods_measure / params.omega
    w0, _, icfg = _run_settings(cfg)
    rows = analysis.bifurcation_sweep(
        params, c_values, t_settle, t_measure, w0=w0, run_config=icfg
    )
    csv_rows = [[r.c, r.y_max, r.y_min, r.amplitude, int(r.rejected)] for r in rows]
    csv_path = _out_path(args, cfg, "bifurcate.csv")
    _write_csv(csv_path, ["c", "y_max", "y_min", "amplitude", "rejected_flag"], csv_rows)
    n_rej = sum(r.rejected for r in rows)
    print(f"wrote {csv_path} ({len(rows)} rows, {n_rej} rejected)")
    if args.plot:
        kept = [r for r in rows if not r.rejected]
        fig = Figure()
        panel = fig.add(Panel("attractor amplitude of y", "c", "y extrema"))
        panel.line([r.c for r in kept], [r.y_max for r in kept], "max y")
        panel.line([r.c for r in kept], [r.y_min for r in kept], "min y")
        svg_path = _out_path(args, cfg, "bifurcate.svg")
        fig.write(svg_path)
        print(f"wrote {svg_path}")
    return 0


def cmd_patched(args, cfg) -> int:
    params = _params_from_config(cfg, args.preset)
    w0, _, _ = _run_settings(cfg)
    t_final = _get(cfg, "patched", "t_final", float, default=1.5)
    delta = _get(cfg, "patched", "delta", float, default=0.25)
    strict = _get(cfg, "patched", "strict", lambda s: s.lower() in ("1", "true", "yes"), default=False)
    theta_floor = _get(cfg, "patched", "theta_floor", float, default=1e-12)

    # the collar needs delta-separated room on both sides of the band, so the
    # patched study uses a study-level box rather than the single-run envelope
    half_x = _get(cfg, "patched", "box_x", float, default=3.0)
    half_y = _get(cfg, "patched", "box_y", float, default=3.0)
    box = CompactBox((-half_x, half_x), (-half_y, half_y))
    system = oscillator.make_system(params, box=box)
    bounds = estimate_bounds(system, box, t_horizon=t_final)
    collar = patched.compute_collar_constants(system, box, delta)
    sched_theta = patched.theta_schedule(params.epsilon, t_final, bounds.lipschitz, theta_floor)
    theta = _get(cfg, "patched", "theta", float, default=sched_theta.value)

    solution = patched.build_patched_solution(
        system,
        params.epsilon,
        w0,
        delta,
        theta,
        t_final,
        bounds=bounds,
        collar=collar,
        admissibility="strict" if strict else "warn",
    )
    exact = integrate(
        system, params.epsilon, w0, 0.0, t_final, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)
    )
    report = patched.evaluate_lemma45_bounds(
        solution.schedule,
        bounds,
        system.curves,
        collar.f_m,
        params.epsilon,
        t_final=t_final,
        exact_run=(solution, exact),
    )

    sched_rows = []
    idx = 0
    for seg in solution.schedule.segments:
        if seg.kind == "exact":
            sched_rows.append([idx, "exact", seg.t_start, seg.t_end, seg.w_start[0], seg.w_start[1]])
            idx += 1
        else:
            ends = list(seg.piece_tau[1:]) + [seg.t_end]
            for tau, te, ax, ay in zip(seg.piece_tau, ends, seg.piece_x, seg.piece_y):
                sched_rows.append([idx, "linearized", float(tau), float(te), float(ax), float(ay)])
                idx += 1
    csv_path = _out_path(args, cfg, "patched_schedule.csv")
    _write_csv(csv_path, ["piece", "tag", "t_start", "t_end", "anchor_x", "anchor_y"], sched_rows)

    lines = [
        "patched-linearization bound report",
        f"epsilon          = {params.epsilon!r}",
        f"delta            = {delta!r}",
        f"theta            = {theta!r}",
        f"theta floored    = {sched_theta.floored} (raw={sched_theta.raw!r})",
        f"epsilon_delta    = {solution.schedule.epsilon_delta!r}",
        f"lemma 4.5 regime = {report.lemma45_applicable}"
        + ("" if report.lemma45_applicable else "  [bounds below use measured drift ratios]"),
        f"admissible       = {solution.schedule.admissible}",
    ]
    for m in solution.schedule.messages:
        lines.append(f"  violated: {m}")
    if sched_theta.floored:
        lines.append("  theta floor binds: theory bound checks not applicable")
    for i, tr in enumerate(report.transits):
        lines.append(
            f"transit {i}: pieces={tr.pieces} (bound {tr.k_bound_effective:g}), "
            f"duration={tr.duration:.6g} (bound {tr.time_bound_effective:.6g}), "
            f"max piece dt={tr.max_piece_duration:.3g} (bound {tr.per_piece_time_bound:.3g}), "
            f"drift ratio={tr.drift_ratio_effective:.3g}, monotone={tr.monotone_anchors}"
        )
    for i, ex in enumerate(report.exact_segments):
        lines.append(
            f"exact {i}: duration={ex.duration:.6g} "
            f"(lower bound {ex.min_duration_bound:.6g}, to_T={ex.reached_t_final})"
        )
    dev = report.lemma48
    lines.append(
        f"deviation: measured={dev.measured_deviation!r} bound={dev.deviation_bound!r} "
        f"(representable={dev.representable})"
    )
    report_path = _out_path(args, cfg, "patched_report.txt")
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {csv_path} and {report_path}")
    if args.plot:
        fig, _ = _phase_figure(
            "patched path", system.curves, solution.x.values, solution.y.values,
            extra=[(exact.x.values, exact.y.values, "exact")],
        )
        svg_path = _out_path(args, cfg, "patched.svg")
        fig.write(svg_path)
        print(f"wrote {svg_path}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "converge": cmd_converge,
    "bifurcate": cmd_bifurcate,
    "patched": cmd_patched,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hystlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="path to the sectioned key-value config file")
    parser.add_argument("--preset", help="named parameter preset (e.g. netushil-oscillator)")
    parser.add_argument("--plot", action="store_true", help="also emit SVG figures")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument(
        "--seed", type=int, default=0,
        help="seed for property-test input generation; simulations are deterministic",
    )
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.preset is None and not cfg.has_option("system", "preset") and not cfg.has_section("system"):
            args.preset = "netushil-oscillator"
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
