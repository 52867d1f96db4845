"""Command-line front end: ``stepwalk <command> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, presets
from .bloch import band_grid, min_gap
from .core import LatticeConfig
from .dynamics import band_tomography_bulk, band_tomography_phi_scan, evolve_record, inject
from .io import MANIFEST_NAME, config_to_dict, read_config, write_csv, write_json, write_pgm
from .strip import GAP_CENTERS, GapClosedError, flow_report, strip_spectrum_vs_phi
from .topology import BANDS, CLOSURE_TOL, TopologyError, berry_curvature, chern_number, phase_diagram

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_MISMATCH = 5
THREADS_ENV = "STEPWALK_THREADS"


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, command: str, out: Path, **settings):
        self.command = command
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.settings = settings
        self.outputs: list[str] = []
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def csv(self, name, header, rows):
        return write_csv(self.path(name), header, rows)

    def json(self, name, obj):
        return write_json(self.path(name), obj)

    def pgm(self, name, image):
        return write_pgm(self.path(name), image)

    def finish(self, config: LatticeConfig | None = None, **extra):
        manifest = {
            "command": self.command,
            "config": None if config is None else config_to_dict(config),
            "settings": self.settings,
            "seed": None,
            "outputs": self.outputs,
            "version": __version__,
            "wall_clock_s": round(time.perf_counter() - self.start, 3),
            **extra,
        }
        write_json(self.out / MANIFEST_NAME, manifest)
        return manifest


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


@contextmanager
def _executor(n: int):
    if n <= 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            yield pool


def _gap_label(g: float) -> str:
    return "gap0" if g == 0 else "gap_pi"


def _parse_gap(text: str):
    return {"0": (0.0,), "pi": (np.pi,), "both": GAP_CENTERS}[text]


def _parse_filter(text: str):
    if text in ("left", "right", "all"):
        return text
    if text.startswith("cell:"):
        return ("cell", int(text.split(":", 1)[1]))
    raise argparse.ArgumentTypeError(f"filter must be left, right, all or cell:N, got {text!r}")


# --- commands -----------------------------------------------------------------

def write_bands(run: Run, config: LatticeConfig, nk: int, nphi: int, tol: float) -> dict:
    grid = band_grid(config, nk, nphi)
    rows = [(grid.k[i], grid.phi[j], *grid.energies[i, j]) for i in range(nk) for j in range(nphi)]
    run.csv("bands.csv", ["k", "phi", "E_minus", "E_plus"], rows)
    gaps = {"gap0": min_gap(grid, 0.0), "gap_pi": min_gap(grid, np.pi), "tolerance": tol}
    gaps["open0"] = gaps["gap0"] >= tol
    gaps["open_pi"] = gaps["gap_pi"] >= tol
    run.json("gaps.json", gaps)
    return gaps


def cmd_bands(args) -> int:
    config = read_config(args.config)
    run = Run("bands", args.out, nk=args.nk, nphi=args.nphi, tolerance=args.tolerance)
    gaps = write_bands(run, config, args.nk, args.nphi, args.tolerance)
    run.finish(config)
    print(f"gap0={gaps['gap0']:.6g} gap_pi={gaps['gap_pi']:.6g}")
    return EXIT_OK


def write_chern(run: Run, config: LatticeConfig, bands, n: int, prefix: str = "") -> dict:
    grid = band_grid(config, n, n)
    summary = {}
    for band in bands:
        berry = berry_curvature(grid, band)
        rows = [(grid.k[i], grid.phi[j], berry.plaquette_flux[i, j]) for i in range(n) for j in range(n)]
        run.csv(f"{prefix}berry_{band}.csv", ["k", "phi", "flux"], rows)
        run.pgm(f"{prefix}berry_{band}.pgm", berry.plaquette_flux.T[::-1])
        summary[band] = chern_number(berry)
    return summary


def cmd_chern(args) -> int:
    config = read_config(args.config)
    bands = list(BANDS) if args.band == "both" else [args.band]
    run = Run("chern", args.out, band=args.band, grid=args.grid)
    summary = write_chern(run, config, bands, args.grid)
    run.json("chern.json", summary)
    run.finish(config)
    print(" ".join(f"{b}={c}" for b, c in summary.items()))
    return EXIT_OK


def write_phase_diagram(run: Run, theta1, theta2, resolution, nk, tol, threads, name="phase_diagram"):
    with _executor(threads) as pool:
        diagram = phase_diagram(theta1, theta2, resolution, nk, nk, tol, executor=pool)
    rows = []
    for i, t3 in enumerate(diagram.theta3):
        for j, t4 in enumerate(diagram.theta4):
            rows.append((t3 / np.pi, t4 / np.pi, diagram.gap0[i, j], diagram.gap_pi[i, j],
                         diagram.chern_upper[i, j], diagram.closed0[i, j], diagram.closed_pi[i, j]))
    run.csv(f"{name}.csv", ["theta3_pi", "theta4_pi", "gap0", "gap_pi", "C_upper", "closed0", "closed_pi"], rows)
    run.pgm(f"{name}.pgm", diagram.chern_upper.T[::-1])
    return diagram


def cmd_phase_diagram(args) -> int:
    run = Run("phase-diagram", args.out, theta1_pi=args.theta1, theta2_pi=args.theta2, grid=args.grid,
              nk=args.nk, tolerance=args.tolerance)
    diagram = write_phase_diagram(run, args.theta1 * np.pi, args.theta2 * np.pi, args.grid, args.nk,
                                  args.tolerance, _threads(args))
    values = sorted({int(c) for c in diagram.chern_upper.ravel() if np.isfinite(c)})
    run.finish(None, chern_values=values)
    print("C_upper values:", values)
    return EXIT_OK


def write_strip(run: Run, config: LatticeConfig, nphi: int, sublattice: str, name="spectrum"):
    spectrum = strip_spectrum_vs_phi(config, nphi, sublattice)
    cells = sorted(spectrum.cell_weights)
    header = ["phi", "E", "left_weight", "right_weight"] + [f"cell{n}_weight" for n in cells]
    rows = []
    for j in range(spectrum.nphi):
        for b in range(spectrum.energies.shape[1]):
            rows.append((spectrum.phi[j], spectrum.energies[j, b], spectrum.left_weight[j, b],
                         spectrum.right_weight[j, b], *(spectrum.cell_weights[n][j, b] for n in cells)))
    run.csv(f"{name}.csv", header, rows)
    return spectrum


def cmd_strip(args) -> int:
    config = read_config(args.config)
    run = Run("strip", args.out, nphi=args.nphi, sublattice=args.sublattice)
    write_strip(run, config, args.nphi, args.sublattice)
    run.finish(config)
    return EXIT_OK


def cmd_flow(args) -> int:
    config = read_config(args.config)
    run = Run("flow", args.out, nphi=args.nphi, gap=args.gap, filter=str(args.filter), grid=args.grid)
    report = flow_report(config, args.nphi, args.grid, args.filter)
    gaps = [_gap_label(g) for g in _parse_gap(args.gap)]
    report["match"] = all(report[g] == report["predicted"][g] for g in gaps)
    run.json("flow.json", report)
    run.finish(config)
    print(" ".join(f"{g}={report[g]}" for g in gaps), f"match={str(report['match']).lower()}")
    return EXIT_OK


def write_record(run: Run, record, name="record"):
    rows = []
    for m in range(record.alpha.shape[0]):
        for n in range(record.alpha.shape[1]):
            rows.append((m, n, abs(record.alpha[m, n]) ** 2, abs(record.beta[m, n]) ** 2))
    run.csv(f"{name}.csv", ["m", "n", "alpha_intensity", "beta_intensity"], rows)
    run.pgm(f"{name}_alpha.pgm", np.abs(record.alpha) ** 2)


def write_map(run: Run, tmap, name):
    rows = [(tmap.axis[i], tmap.energies[j], tmap.intensity[i, j])
            for i in range(len(tmap.axis)) for j in range(len(tmap.energies))]
    run.csv(f"{name}.csv", [tmap.axis_name, "E", "intensity"], rows)
    run.pgm(f"{name}.pgm", np.log10(tmap.intensity.T[::-1] + 1e-12 * tmap.intensity.max()))


def cmd_dynamics(args) -> int:
    config = read_config(args.config)
    run = Run("dynamics", args.out, site=args.site, ring=args.ring, periods=args.periods, phi=args.phi,
              phi_scan=args.phi_scan)
    record = evolve_record(inject(config, args.site, args.ring), config, args.phi, args.periods)
    write_record(run, record)
    if args.phi_scan:
        with _executor(_threads(args)) as pool:
            tmap = band_tomography_phi_scan(config, (args.site, args.ring), args.phi_scan, args.periods,
                                            executor=pool)
        write_map(run, tmap, "tomography_phi")
    elif not config.reflecting:
        write_map(run, band_tomography_bulk(config, args.phi, args.periods, site=args.site, ring=args.ring),
                  "tomography_k")
    run.finish(config)
    return EXIT_OK


# --- figure reproduction --------------------------------------------------------

def _compare(rows, name, measured, expected):
    if expected is None:
        rows.append({"quantity": name, "measured": measured, "expected": None, "match": None})
        return
    rows.append({"quantity": name, "measured": measured, "expected": expected, "match": measured == expected})


def reproduce(figure: str, out, nphi: int = 128, grid: int = 48, resolution: int = 32, threads: int = 1) -> list:
    run = Run("reproduce", out, figure=figure, nphi=nphi, grid=grid, resolution=resolution)
    checks: list = []
    if figure == "fig1c":
        config = presets.ring_config(presets.FIG1_THETA_PI, 128)
        periods = 12
        record = evolve_record(inject(config, 64), config, 0.0, periods)
        write_record(run, record)
        spread = np.flatnonzero((np.abs(record.alpha[-1]) ** 2 + np.abs(record.beta[-1]) ** 2) > 0)
        reach = int(np.max(np.abs(spread - 64)))
        _compare(checks, "max_spread_sites", reach, None)
        _compare(checks, "light_cone_respected", reach <= 4 * periods, True)
        _compare(checks, "norm_conserved", bool(np.allclose(record.norms(), 1, atol=1e-10)), True)
    elif figure == "fig1d":
        config = presets.ring_config(presets.FIG1_THETA_PI, 64)
        gaps = write_bands(run, config, 64, 64, CLOSURE_TOL)
        with _executor(threads) as pool:
            phis = -np.pi + 2 * np.pi * (np.arange(16) + 1) / 16
            maps = list((pool.map if pool else map)(lambda p: band_tomography_bulk(config, p, 128), phis))
        for p, tmap in zip(phis, maps):
            write_map(run, tmap, f"tomography_k_phi{p / np.pi:+.4f}pi")
        _compare(checks, "gap0_open", bool(gaps["open0"]), True)
        _compare(checks, "gap_pi_open", bool(gaps["open_pi"]), True)
    elif figure == "fig2":
        t1, t2 = (t * np.pi for t in presets.PHASE_DIAGRAM_THETA12_PI)
        diagram = write_phase_diagram(run, t1, t2, resolution, 64, CLOSURE_TOL, threads)
        for label, (point, expected) in presets.PHASE_DIAGRAM_POINTS.items():
            config = presets.ring_config((*presets.PHASE_DIAGRAM_THETA12_PI, *point))
            cherns = write_chern(run, config, list(BANDS), grid, prefix=f"{label}_")
            _compare(checks, f"{label}_C_upper", cherns["upper"], expected)
            i, j = diagram.cell_of(point[0] * np.pi, point[1] * np.pi)
            c = diagram.chern_upper[i, j]
            _compare(checks, f"{label}_diagram_cell_C_upper", None if np.isnan(c) else int(c), expected)
    elif figure in ("fig3", "fig4"):
        theta_pi, panels = ((presets.FIG3_THETA_PI, presets.FIG3_PANELS) if figure == "fig3"
                            else (presets.FIG4_THETA_PI, presets.FIG4_PANELS))
        for panel, (coeffs, expected) in panels.items():
            config = presets.strip_config(theta_pi, coeffs)
            report = flow_report(config, nphi, grid)
            run.json(f"flow_{panel}.json", report)
            write_strip(run, config, nphi, "even", f"spectrum_{panel}")
            with _executor(threads) as pool:
                write_map(run, band_tomography_phi_scan(config, (0, "alpha"), 64, 128, executor=pool),
                          f"tomography_phi_{panel}")
            _compare(checks, f"{panel}_gap0", report["gap0"], expected[0])
            _compare(checks, f"{panel}_gap_pi", report["gap_pi"], expected[1])
    elif figure == "fig5":
        cells = [(presets.BULK_CELL, presets.CELL_COEFFS)]
        for label, theta_pi in (("C0", presets.FIG3_THETA_PI), ("C2", presets.FIG4_THETA_PI)):
            config = presets.strip_config(theta_pi, local_cells=cells)
            report = flow_report(config, nphi, grid, ("cell", presets.BULK_CELL))
            run.json(f"flow_cell_{label}.json", report)
            _compare(checks, f"{label}_cell_gap0", report["gap0"], -1)
            _compare(checks, f"{label}_cell_gap_pi", report["gap_pi"], -1)
        config = presets.strip_config(presets.FIG3_THETA_PI, local_cells=cells)
        write_record(run, evolve_record(inject(config, presets.BULK_CELL), config, presets.FIG5_PHI, 32))
        write_strip(run, config, nphi, "even", "spectrum_cell")
        with _executor(threads) as pool:
            write_map(run, band_tomography_phi_scan(config, (presets.BULK_CELL, "alpha"), 64, 128, executor=pool),
                      "tomography_phi_cell")
    else:
        raise ValueError(f"unknown figure {figure!r}; choose from {presets.FIGURES}")
    run.json("comparison.json", {"figure": figure, "checks": checks})
    run.finish(None)
    return checks


def cmd_reproduce(args) -> int:
    checks = reproduce(args.figure, args.out, args.nphi, args.grid, args.resolution, _threads(args))
    failed = [c for c in checks if c["match"] is False]
    for c in checks:
        status = "n/a" if c["match"] is None else ("ok" if c["match"] else "MISMATCH")
        print(f"{c['quantity']}: measured={c['measured']} expected={c['expected']} [{status}]")
    return EXIT_MISMATCH if failed else EXIT_OK


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="stepwalk", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="lattice config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or 1)")
        return p

    p = common(sub.add_parser("bands", help="bulk quasienergy bands and gaps", formatter_class=fmt))
    p.add_argument("--nk", type=int, default=64, help="k points")
    p.add_argument("--nphi", type=int, default=64, help="phi points")
    p.add_argument("--tolerance", type=float, default=CLOSURE_TOL, help="gap-closure tolerance")
    p.set_defaults(func=cmd_bands)

    p = common(sub.add_parser("chern", help="Berry curvature and Chern numbers", formatter_class=fmt))
    p.add_argument("--band", choices=["lower", "upper", "both"], default="both", help="band(s) to integrate")
    p.add_argument("--grid", type=int, default=48, help="points per axis of the (k, phi) grid")
    p.set_defaults(func=cmd_chern)

    p = common(sub.add_parser("phase-diagram", help="upper-band Chern number over (theta3, theta4)",
                              formatter_class=fmt), config=False)
    p.add_argument("--theta1", type=float, default=0.125, help="units of pi")
    p.add_argument("--theta2", type=float, default=0.25, help="units of pi")
    p.add_argument("--grid", type=int, default=32, help="cells per axis")
    p.add_argument("--nk", type=int, default=64, help="(k, phi) points per axis inside each cell")
    p.add_argument("--tolerance", type=float, default=CLOSURE_TOL, help="gap-closure tolerance")
    p.set_defaults(func=cmd_phase_diagram)

    p = common(sub.add_parser("strip", help="strip eigenphases versus phi", formatter_class=fmt))
    p.add_argument("--nphi", type=int, default=128, help="phi samples over one period")
    p.add_argument("--sublattice", choices=["even", "odd"], default="even", help="site-parity block")
    p.set_defaults(func=cmd_strip)

    p = common(sub.add_parser("flow", help="spectral-flow edge-state count", formatter_class=fmt))
    p.add_argument("--nphi", type=int, default=128, help="phi samples over one period")
    p.add_argument("--gap", choices=["0", "pi", "both"], default="both", help="gap center(s) to count")
    p.add_argument("--filter", type=_parse_filter, default="left", help="left, right, all or cell:N")
    p.add_argument("--grid", type=int, default=48, help="(k, phi) grid for the Chern prediction")
    p.set_defaults(func=cmd_flow)

    p = common(sub.add_parser("dynamics", help="pulse evolution and stroboscopic tomography", formatter_class=fmt))
    p.add_argument("--site", type=int, default=0, help="injection site")
    p.add_argument("--ring", choices=["alpha", "beta"], default="alpha", help="injection ring")
    p.add_argument("--periods", type=int, default=128, help="Floquet periods to record")
    p.add_argument("--phi", type=float, default=0.0, help="radians")
    p.add_argument("--phi-scan", type=int, default=0, help="number of phi points for a (phi, E) map; 0 = off")
    p.set_defaults(func=cmd_dynamics)

    p = common(sub.add_parser("reproduce", help="regenerate one figure's data", formatter_class=fmt), config=False)
    p.add_argument("figure", choices=presets.FIGURES)
    p.add_argument("--nphi", type=int, default=128, help="phi samples for strip spectra")
    p.add_argument("--grid", type=int, default=48, help="(k, phi) grid for Chern numbers")
    p.add_argument("--resolution", type=int, default=32, help="phase-diagram cells per axis")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TopologyError, GapClosedError) as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # ConfigError included; bad sites and grid sizes are input errors too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
