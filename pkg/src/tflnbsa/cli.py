"""Command-line entry point: ``tflnbsa <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as tio
from .bellstate import DetectionModel, NoCoincidenceError, error_with_coupling, fidelity_closed_form, oracle_coincidence
from .config import ConfigError, RunConfig, load_config
from .coupler import (
    DeltaNTable,
    TableError,
    build_delta_n_table,
    cached_delta_n_table,
    delta,
    device_transfer,
    lc_sweep,
    split_from_transfer,
    TransferCoefficients,
)
from .fiber import OverlapError, na_sweep
from .geometry import CoupledPair, GeometryError, GridSpec, rasterize
from .modesolver import CutoffError, SolverError, coupling_strength, solve_modes
from .sweep import (
    Axis,
    NonFiniteObjective,
    SweepSpec,
    error_vs_Lc,
    minimize_delta_over_gap,
    minimize_error_over_Lc,
    xi_map,
    xi_unity_contour,
    xi_vs_gap,
)

log = logging.getLogger("tflnbsa")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FIGURES = ("fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig5a", "fig6c")
NUMERIC_ERRORS = (SolverError, CutoffError, TableError, NonFiniteObjective, NoCoincidenceError, OverlapError, ArithmeticError)


@dataclass
class FigureArtifact:
    label: str
    csv_path: Path | None = None
    svg_path: Path | None = None
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # name -> bool
    failed: str | None = None


# -- shared helpers ---------------------------------------------------------


def _table(cfg: RunConfig) -> DeltaNTable:
    rib, stack = cfg.device.pair.rib, cfg.device.stack
    if cfg.table_cache:
        return cached_delta_n_table(cfg.table_cache, rib, stack, cfg.table_gaps_nm, cfg.grid, cfg.solver)
    return build_delta_n_table(rib, stack, cfg.table_gaps_nm, cfg.grid, cfg.solver)


def _in(v, band) -> bool:
    return band[0] <= v <= band[1]


def _emit(cfg: RunConfig, label: str, header, rows, svg: str) -> tuple:
    out = cfg.output_dir
    csv_path = tio.write_csv(out / f"{label}.csv", header, rows)
    svg_path = out / f"{label}.svg"
    svg_path.write_text(svg, encoding="utf-8", newline="\n")
    return csv_path, svg_path


# -- figures ----------------------------------------------------------------


def fig3a(cfg: RunConfig, _cache) -> FigureArtifact:
    s = cfg.sweeps["fig3a"]
    w = np.linspace(s["w_min_nm"], s["w_max_nm"], int(s["w_samples"]))
    he = np.linspace(s["he_min_nm"], s["he_max_nm"], int(s["he_samples"]))
    grid = replace(cfg.grid, dx_nm=float(s["dx_nm"]), dy_nm=float(s["dy_nm"]))
    m = xi_map(w, he, float(s["gap_nm"]), cfg.device.stack, grid, cfg.solver, cfg.device.pair.rib)
    lines = xi_unity_contour(m)
    rows = [(wi, hj, m.xi[i, j]) for i, wi in enumerate(m.w_nm) for j, hj in enumerate(m.he_nm)]
    svg = tio.map_svg(m.w_nm, m.he_nm, m.xi, lines, "xi = dn_TE / dn_TM", "width (nm)", "etch depth (nm)")
    art = FigureArtifact("fig3a", *_emit(cfg, "fig3a", tio.HEADERS["fig3a"], rows, svg))
    pt = coupling_strength(CoupledPair(cfg.device.pair.rib, float(s["gap_nm"])), cfg.device.stack, cfg.grid, cfg.solver)
    art.summary = {"xi_selected": pt.xi, "contour_points": int(sum(len(ln) for ln in lines))}
    art.checks = {"xi_selected_in_band": _in(pt.xi, cfg.bands["xi"]), "contour_found": bool(lines)}
    return art


def fig3b(cfg: RunConfig, _cache) -> FigureArtifact:
    d = xi_vs_gap(cfg.sweeps["fig3b"]["gaps_nm"], cfg.device.pair.rib, cfg.device.stack, cfg.grid, cfg.solver)
    rows = list(zip(d["gap_nm"], d["dn_TE"], d["dn_TM"], d["xi"]))
    svg = tio.line_svg([tio.Series("xi", d["gap_nm"], d["xi"])], "xi versus gap", "gap (nm)", "xi")
    art = FigureArtifact("fig3b", *_emit(cfg, "fig3b", tio.HEADERS["fig3b"], rows, svg))
    art.summary = {"xi_min": float(d["xi"].min()), "xi_max": float(d["xi"].max())}
    art.checks = {"xi_increasing": bool(np.all(np.diff(d["xi"]) > 0))}
    return art


def _lc_axis(cfg):
    s = cfg.sweeps["fig4"]
    return np.linspace(s["lc_min_um"], s["lc_max_um"], int(s["lc_samples"]))


def _split_figure(cfg, label, gap, table) -> FigureArtifact:
    d = lc_sweep(cfg.device.with_gap(gap), table, _lc_axis(cfg))
    keys = tio.HEADERS[label]
    rows = list(zip(*(d[k] for k in keys)))
    series = [
        tio.Series("P3 TE", d["L_c_um"], d["P3_TE"]),
        tio.Series("P4 TE", d["L_c_um"], d["P4_TE"]),
        tio.Series("P3 TM", d["L_c_um"], d["P3_TM"], dashed=True),
        tio.Series("P4 TM", d["L_c_um"], d["P4_TM"], dashed=True),
    ]
    svg = tio.line_svg(series, f"port powers at g = {gap:.4g} nm", "L_c (um)", "normalized power")
    art = FigureArtifact(label, *_emit(cfg, label, keys, rows, svg))
    art.summary = {"gap_nm": gap, "max_abs_zeta": float(np.max(np.abs(d["zeta"])))}
    return art


def _tuned(cfg, table, cache):
    if "tuned" not in cache:
        s = cfg.sweeps["fig4b"]
        cache["tuned"] = minimize_delta_over_gap(cfg.device, table, (s["gap_min_nm"], s["gap_max_nm"]), float(s["tol_nm"]), _lc_range(cfg))
    return cache["tuned"]


def _lc_range(cfg):
    s = cfg.sweeps["fig4"]
    return (float(s["lc_min_um"]), float(s["lc_max_um"]))


def fig4a(cfg, cache) -> FigureArtifact:
    return _split_figure(cfg, "fig4a", float(cfg.sweeps["fig4"]["reference_gap_nm"]), cache["table"])


def fig4b(cfg, cache) -> FigureArtifact:
    s = cfg.sweeps["fig4b"]
    table = cache["table"]
    g = np.linspace(s["gap_min_nm"], s["gap_max_nm"], int(s["gap_samples"]))
    dl = np.array([delta(cfg.device.with_gap(float(x)), table, _lc_range(cfg)) for x in g])
    rep = _tuned(cfg, table, cache)
    svg = tio.line_svg([tio.Series("delta", g, dl)], "RMS port-3 mismatch versus gap", "gap (nm)", "delta")
    art = FigureArtifact("fig4b", *_emit(cfg, "fig4b", tio.HEADERS["fig4b"], list(zip(g, dl)), svg))
    art.summary = {"argmin_gap_nm": rep.argmin, "min_delta": rep.min_value}
    art.checks = {"interior_minimum": not rep.at_boundary, "argmin_in_band": _in(rep.argmin, cfg.bands["argmin_gap_nm"])}
    return art


def fig4c(cfg, cache) -> FigureArtifact:
    table = cache["table"]
    rep = _tuned(cfg, table, cache)
    art = _split_figure(cfg, "fig4c", rep.argmin, table)
    ref = lc_sweep(cfg.device.with_gap(float(cfg.sweeps["fig4"]["reference_gap_nm"])), table, _lc_axis(cfg))
    ref_max = float(np.max(np.abs(ref["zeta"])))
    ratio = ref_max / art.summary["max_abs_zeta"] if art.summary["max_abs_zeta"] > 0 else math.inf
    art.summary["zeta_reduction"] = ratio
    art.checks = {"zeta_reduced_5x": ratio >= 5.0}
    return art


def fig5a(cfg, cache) -> FigureArtifact:
    s = cfg.sweeps["fig5a"]
    table = cache["table"]
    lc = np.linspace(s["lc_min_um"], s["lc_max_um"], int(s["lc_samples"]))
    err = error_vs_Lc(cfg.device, table, lc)
    rep = minimize_error_over_Lc(cfg.device, table, (s["lc_min_um"], s["lc_max_um"]), float(s["tol_um"]))
    svg = tio.line_svg([tio.Series("E", lc, err)], f"entanglement error at g = {cfg.device.pair.gap_nm:.4g} nm", "L_c (um)", "E")
    art = FigureArtifact("fig5a", *_emit(cfg, "fig5a", tio.HEADERS["fig5a"], list(zip(lc, err)), svg))
    art.summary = {"argmin_Lc_um": rep.argmin, "min_error": rep.min_value}
    art.checks = {"interior_minimum": not rep.at_boundary, "min_error_below_bound": rep.min_value < cfg.bands["min_error_max"]}
    return art


def fig6c(cfg, _cache) -> FigureArtifact:
    s = cfg.sweeps["fig6c"]
    d = na_sweep(cfg.device, (s["na_min"], s["na_max"]), int(s["na_samples"]), cfg.fiber_grid, cfg.solver)
    rows = list(zip(d["NA"], d["eta_TE"], d["eta_TM"]))
    svg = tio.line_svg(
        [tio.Series("TE", d["NA"], d["eta_TE"]), tio.Series("TM", d["NA"], d["eta_TM"], dashed=True)],
        "fiber coupling efficiency", "NA", "eta",
    )
    art = FigureArtifact("fig6c", *_emit(cfg, "fig6c", tio.HEADERS["fig6c"], rows, svg))
    te, tm = float(d["eta_TE"][-1]), float(d["eta_TM"][-1])
    art.summary = {"eta_TE_max_na": te, "eta_TM_max_na": tm}
    art.checks = {
        "monotone": bool(np.all(np.diff(d["eta_TE"]) > 0) and np.all(np.diff(d["eta_TM"]) > 0)),
        "eta_in_band": _in(te, cfg.bands["eta_at_max_na"]) and _in(tm, cfg.bands["eta_at_max_na"]),
        "eta_balanced": abs(te - tm) <= cfg.bands["eta_difference_max"],
    }
    return art


FIGURE_FUNCS = {"fig3a": fig3a, "fig3b": fig3b, "fig4a": fig4a, "fig4b": fig4b, "fig4c": fig4c, "fig5a": fig5a, "fig6c": fig6c}
NEEDS_TABLE = {"fig4a", "fig4b", "fig4c", "fig5a"}


def reproduce(cfg: RunConfig, labels, parallel: bool = False) -> list:
    cache: dict = {}
    if NEEDS_TABLE & set(labels):
        cache["table"] = _table(cfg)
        if {"fig4b", "fig4c"} & set(labels):
            # computed up front so parallel figures share one optimization
            _tuned(cfg, cache["table"], cache)

    def run(label):
        try:
            return FIGURE_FUNCS[label](cfg, cache)
        except NUMERIC_ERRORS + (GeometryError, ValueError) as exc:
            log.error("%s failed: %s", label, exc)
            return FigureArtifact(label, failed=str(exc))

    if parallel:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(run, labels))
    return [run(lb) for lb in labels]


def _summary_lines(arts) -> list:
    lines = []
    for a in arts:
        if a.failed:
            lines.append(f"{a.label} FAILED {a.failed}")
            continue
        for k, v in a.summary.items():
            lines.append(f"{a.label} {k} = {tio.fmt(v)}")
        for k, ok in a.checks.items():
            lines.append(f"{a.label} {k} {'PASS' if ok else 'FAIL'}")
    return lines


# -- subcommands ------------------------------------------------------------


def cmd_modes(cfg: RunConfig, args) -> int:
    stack = cfg.device.stack
    if args.structure == "pair":
        geom, grid = cfg.device.pair, cfg.grid
    else:
        geom, grid = cfg.device.pair.rib, cfg.fiber_grid
    if args.structure == "cladding":
        from .geometry import cladding_map

        imap = cladding_map(stack, grid)
    else:
        imap = rasterize(geom, stack, grid)
    modes = solve_modes(imap, stack.wavelength_um, count=args.count, settings=cfg.solver)
    if not modes:
        print("no guided modes")
        return EXIT_OK
    rows = [(k, m.n_eff, m.polarization, m.te_fraction, m.symmetry) for k, m in enumerate(modes)]
    print(tio.csv_text(tio.HEADERS["modes"], rows), end="")
    tio.write_csv(cfg.output_dir / "modes.csv", tio.HEADERS["modes"], rows)
    if args.fields:
        for k, m in enumerate(modes):
            X, Y = np.meshgrid(m.x, m.y, indexing="ij")
            frows = zip(X.ravel(), Y.ravel(), m.E_x.ravel(), m.E_y.ravel())
            tio.write_csv(cfg.output_dir / f"mode_{k}_field.csv", tio.HEADERS["field"], frows)
    return EXIT_OK


def cmd_coupling_strength(cfg: RunConfig, args) -> int:
    gaps = args.gap or [cfg.device.pair.gap_nm]
    d = xi_vs_gap(gaps, cfg.device.pair.rib, cfg.device.stack, cfg.grid, cfg.solver)
    rows = list(zip(d["gap_nm"], d["dn_TE"], d["dn_TM"], d["xi"]))
    print(tio.csv_text(tio.HEADERS["fig3b"], rows), end="")
    return EXIT_OK


def cmd_transfer(cfg: RunConfig, args) -> int:
    table = _table(cfg)
    dev = cfg.device if args.lc is None else cfg.device.with_coupling_length(args.lc)
    t = device_transfer(dev, table)
    sp = split_from_transfer(t)
    out = {
        "gap_nm": dev.pair.gap_nm,
        "coupling_length_um": dev.coupling_length_um,
        "t_h": t.t_h, "r_h": t.r_h, "t_v": t.t_v, "r_v": t.r_v,
        "P3_TE": sp.P3_TE, "P4_TE": sp.P4_TE, "P3_TM": sp.P3_TM, "P4_TM": sp.P4_TM,
        "zeta": sp.P3_TE - sp.P3_TM,
        "transmission_TE": t.transmission_factor_te, "transmission_TM": t.transmission_factor_tm,
        "same_quadrant": t.same_quadrant,
    }
    for k, v in out.items():
        print(f"{k} = {tio.fmt(v) if not isinstance(v, bool) else v}")
    return EXIT_OK


def cmd_fidelity(cfg: RunConfig, args) -> int:
    if args.splits:
        p = [v / 100.0 for v in args.splits]
        if any(v < 0 for v in p) or p[0] + p[1] <= 0 or p[2] + p[3] <= 0:
            raise ConfigError("splits must be non-negative percentages with non-zero sums")
        t = TransferCoefficients.from_splits(*p)
    elif args.coeffs:
        try:
            t = TransferCoefficients(*args.coeffs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        t = device_transfer(cfg.device, _table(cfg))
    if args.eta:
        rep = error_with_coupling(t, args.eta[0], args.eta[1], args.detection)
    elif args.detection == DetectionModel.OPPOSITE_POLARIZATION_RESOLVING:
        rep = fidelity_closed_form(t)
    else:
        rep = oracle_coincidence(t, detection=args.detection)
    print(f"fidelity = {tio.fmt(rep.fidelity)}")
    print(f"error = {tio.fmt(rep.error)}")
    print(f"coincidence_probability = {tio.fmt(rep.coincidence_probability)}")
    print("heralded_state:")
    for row in np.real(rep.heralded_state):
        print(",".join(tio.fmt(v) for v in row))
    return EXIT_OK


def cmd_fiber(cfg: RunConfig, args) -> int:
    s = cfg.sweeps["fig6c"]
    lo = args.na_min if args.na_min is not None else s["na_min"]
    hi = args.na_max if args.na_max is not None else s["na_max"]
    n = args.samples if args.samples is not None else int(s["na_samples"])
    d = na_sweep(cfg.device, (lo, hi), n, cfg.fiber_grid, cfg.solver)
    rows = list(zip(d["NA"], d["eta_TE"], d["eta_TM"]))
    print(tio.csv_text(tio.HEADERS["fig6c"], rows), end="")
    tio.write_csv(cfg.output_dir / "fiber.csv", tio.HEADERS["fig6c"], rows)
    return EXIT_OK


def _parse_axis(text: str) -> Axis:
    try:
        name, lo, hi, n = text.split(":")
        return Axis(name, float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ConfigError(f"bad axis '{text}' ({exc}); expected name:min:max:samples") from exc


def run_sweep(cfg: RunConfig, spec: SweepSpec):
    """Evaluate a sweep; returns (header, rows, summary)."""
    names = tuple(a.name for a in spec.axes)
    grids = np.meshgrid(*(a.values() for a in spec.axes), indexing="ij")
    points = list(zip(*(g.ravel() for g in grids)))
    dev = cfg.device
    rows = []
    if set(names) <= {"w", "h_e", "g"}:
        for pt in points:
            kw = dict(zip(names, pt))
            rib = replace(dev.pair.rib, width_nm=kw.get("w", dev.pair.rib.width_nm), etch_depth_nm=kw.get("h_e", dev.pair.rib.etch_depth_nm))
            try:
                xi = coupling_strength(CoupledPair(rib, kw.get("g", dev.pair.gap_nm)), dev.stack, cfg.grid, cfg.solver).xi
            except (SolverError, ValueError) as exc:
                log.warning("sweep point %s failed: %s", kw, exc)
                xi = math.nan
            rows.append((*pt, xi))
        header = (*names, "xi")
        best = min((r for r in rows if math.isfinite(r[-1])), key=lambda r: abs(r[-1] - 1), default=None)
        summary = {"closest_to_unity": best}
    elif set(names) <= {"g", "L_c"}:
        table = _table(cfg)
        for pt in points:
            kw = dict(zip(names, pt))
            d = dev.with_gap(kw.get("g", dev.pair.gap_nm)).with_coupling_length(kw.get("L_c", dev.coupling_length_um))
            t = device_transfer(d, table)
            sp = split_from_transfer(t)
            rows.append((*pt, sp.P3_TE - sp.P3_TM, fidelity_closed_form(t).error))
        header = (*names, "zeta", "error")
        summary = {"min_error": min(rows, key=lambda r: r[-1])}
    elif names == ("NA",):
        a = spec.axes[0]
        d = na_sweep(dev, (a.min, a.max), a.samples, cfg.fiber_grid, cfg.solver)
        rows = list(zip(d["NA"], d["eta_TE"], d["eta_TM"]))
        header = ("NA", "eta_TE", "eta_TM")
        summary = {"max_eta_TE": float(d["eta_TE"].max())}
    else:
        raise ConfigError(f"unsupported axis combination {names}")
    return header, rows, summary


def cmd_sweep(cfg: RunConfig, args) -> int:
    try:
        spec = SweepSpec(tuple(_parse_axis(a) for a in args.axis))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    header, rows, summary = run_sweep(cfg, spec)
    tio.write_csv(cfg.output_dir / "sweep.csv", header, rows)
    print(tio.csv_text(header, rows), end="")
    for k, v in summary.items():
        print(f"# {k} = {', '.join(tio.fmt(x) for x in v) if isinstance(v, tuple) else tio.fmt(v)}")
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig, args) -> int:
    labels = FIGURES if args.figure == "all" else (args.figure,)
    arts = reproduce(cfg, labels, args.parallel)
    lines = _summary_lines(arts)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print("\n".join(lines))
    return EXIT_NUMERIC if any(a.failed for a in arts) else EXIT_OK


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML configuration file")
    common.add_argument("--profile", default="default", help="built-in profile name (default: default)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field by dotted path, e.g. device.gap_nm=45")
    common.add_argument("-o", "--output-dir", help="output directory (env TFLNBSA_OUTPUT_DIR also works)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tflnbsa", description="TFLN directional-coupler Bell-state analyzer toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("modes", parents=[common], help="guided modes of a cross-section")
    m.add_argument("--structure", choices=("rib", "pair", "cladding"), default="rib")
    m.add_argument("--count", type=int, default=2)
    m.add_argument("--fields", action="store_true", help="also write per-mode field CSVs")
    m.set_defaults(func=cmd_modes)

    c = sub.add_parser("coupling-strength", parents=[common], help="supermode splitting and xi")
    c.add_argument("--gap", type=float, action="append", help="gap in nm (repeatable)")
    c.set_defaults(func=cmd_coupling_strength)

    t = sub.add_parser("transfer", parents=[common], help="device transfer coefficients")
    t.add_argument("--lc", type=float, help="coupling length in um")
    t.set_defaults(func=cmd_transfer)

    f = sub.add_parser("fidelity", parents=[common], help="heralded entanglement fidelity")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--splits", type=float, nargs=4, metavar=("P3_TE", "P4_TE", "P3_TM", "P4_TM"), help="port powers in percent")
    g.add_argument("--coeffs", type=float, nargs=4, metavar=("T_H", "R_H", "T_V", "R_V"), help="amplitude coefficients")
    f.add_argument("--eta", type=float, nargs=2, metavar=("ETA_TE", "ETA_TM"), help="fiber coupling efficiencies")
    f.add_argument("--detection", choices=DetectionModel.ALL, default=DetectionModel.OPPOSITE_POLARIZATION_RESOLVING)
    f.set_defaults(func=cmd_fidelity)

    fb = sub.add_parser("fiber", parents=[common], help="fiber coupling efficiency versus NA")
    fb.add_argument("--na-min", type=float)
    fb.add_argument("--na-max", type=float)
    fb.add_argument("--samples", type=int)
    fb.set_defaults(func=cmd_fiber)

    s = sub.add_parser("sweep", parents=[common], help="parameter sweep over one or two axes")
    s.add_argument("--axis", action="append", required=True, metavar="NAME:MIN:MAX:N",
                   help="axis among w, h_e, g (nm), L_c (um), NA; repeat for a 2D sweep")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("reproduce", parents=[common], help="regenerate figure data, SVG plots and a summary")
    r.add_argument("figure", choices=FIGURES + ("all",))
    r.add_argument("--parallel", action="store_true", help="generate figures concurrently")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, args.profile)
        if args.output_dir:
            cfg = replace(cfg, output_dir=Path(args.output_dir))
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (GeometryError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
