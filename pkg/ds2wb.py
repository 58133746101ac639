#!/usr/bin/env python3
"""ds2wb: command-line workbench for singular de-Sitter tori.

Subcommands::

    build      construct an L torus or a rectangle torus, write its descriptor
    spectrum   timelike marked length spectrum of a descriptor, as CSV
    coords     length-twist coordinates of a descriptor
    invert     torus with given length-twist coordinates, with round-trip check
    rigidity   two-length rigidity scan over an (l, Theta) grid, CSV + JSON
    foliation  return maps, rotation numbers and asymptotic cycles, JSON + CSV
    gbcheck    Gauss-Bonnet residuals of random timelike triangles
    render     SVG figure of the fundamental polygon

Outputs land in ``output/`` next to this script unless ``--out-dir`` says
otherwise. Every flag can also come from a flat ``KEY=value`` config file
(``--config`` or $DS2_WORKBENCH_CONFIG); flags win over the file. Tolerance
constants are overridden with ``--tol KEY=VALUE`` or ``TOL_<KEY>=VALUE``.

Exit codes: 0 success, 1 property violation, 2 input or solver error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import dotenv_values

import chart_tracing
import closed_geodesics
import deformation_coords
import geodesic_spectrum
import lightlike_dynamics
import lorentz_kernel
import surface_builder
from chart_tracing import ConePointHit, TracingError
from closed_geodesics import ShootingError, default_transversal
from deformation_coords import (
    EPS_ROUND_TRIP,
    CoordinateError,
    LengthTwist,
    coordinates,
    from_length_twist,
    rigidity_scan,
)
from ds2_geometry import gauss_bonnet_residual, random_timelike_triangle
from geodesic_spectrum import find_closed_timelike_geodesic, spectrum
from lightlike_dynamics import (
    FOLIATIONS,
    cesaro_cycle,
    cycle_from_return_map,
    cycles_distinct,
    first_return_map,
    rotation_number,
)
from surface_builder import SingularTorus, SolverError, build_torus, check_invariants, torus_from_descriptor
from svg_render import render_torus, write_svg

# ----------------------------------------------------------------------------
# Constants & configuration
# ----------------------------------------------------------------------------
BASE_DIR = Path(__file__).resolve().parent
OUTPUT_DIR = BASE_DIR / "output"
CONFIG_ENV = "DS2_WORKBENCH_CONFIG"
FLOAT_FORMAT = "%.17g"
GB_TOLERANCE = 1e-6

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(message)s"

logger = logging.getLogger("ds2wb")

TOLERANCE_MODULES = (
    lorentz_kernel,
    chart_tracing,
    surface_builder,
    closed_geodesics,
    lightlike_dynamics,
    geodesic_spectrum,
    deformation_coords,
)

def _truthy(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# Config-file keys are the upper-cased flag destinations.
PARAM_TYPES: dict[str, Callable[[str], Any]] = {
    "theta": float,
    "x": float,
    "y": float,
    "l": float,
    "twist": float,
    "rect": _truthy,
    "descriptor": str,
    "window": int,
    "probe_seeds": int,
    "basis": str,
    "check_cone": _truthy,
    "grid": str,
    "l_range": str,
    "twist_range": str,
    "jac_step": float,
    "smoke": _truthy,
    "iters": int,
    "cesaro": int,
    "random_triangles": int,
    "leaves": int,
    "foliation": str,
    "geodesic": str,
    "seed": int,
    "workers": int,
    "out_dir": str,
    "stem": str,
}

DEFAULTS: dict[str, Any] = {
    "window": 3,
    "probe_seeds": 0,
    "basis": "1,0,0,1",
    "grid": "20x20",
    "l_range": "0.3,3",
    "twist_range": "-2,2",
    "jac_step": deformation_coords.JAC_STEP,
    "iters": lightlike_dynamics.DEFAULT_ITERS,
    "cesaro": 0,
    "random_triangles": 100,
    "leaves": 0,
    "foliation": "both",
    "workers": 1,
}


class UsageError(ValueError):
    """Missing or malformed command-line input."""


class ToleranceUpdate:
    """Module constants overridden for the duration of a job."""

    def __init__(self, overrides: dict[str, float]) -> None:
        self.overrides = overrides
        self.saved: list[tuple[Any, str, Any]] = []

    def __enter__(self) -> "ToleranceUpdate":
        for key, value in self.overrides.items():
            names = {key, f"EPS_{key}"}
            hits = [(mod, name) for mod in TOLERANCE_MODULES for name in names if hasattr(mod, name)]
            if not hits:
                raise UsageError(f"unknown tolerance {key!r}")
            for mod, name in hits:
                self.saved.append((mod, name, getattr(mod, name)))
                setattr(mod, name, value)
                logger.debug("tolerance %s.%s = %r", mod.__name__, name, value)
        return self

    def __exit__(self, *exc: object) -> None:
        for mod, name, value in reversed(self.saved):
            setattr(mod, name, value)


@dataclass
class JobConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)
    window: int = 3
    output_dir: Path = OUTPUT_DIR
    stem: Optional[str] = None
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: Optional[int] = None
    workers: int = 1
    json_out: bool = False
    parquet: bool = False

    def require(self, *names: str) -> list[Any]:
        missing = [n for n in names if self.params.get(n) is None]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise UsageError(f"{self.command} needs {flags}")
        return [self.params[n] for n in names]

    def output_path(self, default_stem: str, suffix: str) -> Path:
        return self.output_dir / f"{self.stem or default_stem}{suffix}"

    @classmethod
    def from_args(cls, args: argparse.Namespace, file_values: dict[str, Optional[str]]) -> "JobConfig":
        params: dict[str, Any] = {}
        for name, value in vars(args).items():
            if name not in PARAM_TYPES:
                continue
            if value is None or value is False:
                raw = file_values.get(name.upper())
                if raw is not None:
                    try:
                        value = PARAM_TYPES[name](raw)
                    except ValueError as exc:
                        raise UsageError(f"config entry {name.upper()}={raw!r}: {exc}") from exc
            if value is None:
                value = DEFAULTS.get(name)
            params[name] = value
        tolerances = {k[4:]: float(v) for k, v in file_values.items() if k.startswith("TOL_") and v is not None}
        for item in args.tol or []:
            key, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"--tol expects KEY=VALUE, got {item!r}")
            tolerances[key.strip().upper()] = float(value)
        return cls(
            command=args.command,
            params=params,
            window=int(params.get("window", DEFAULTS["window"])),
            output_dir=Path(params.get("out_dir") or OUTPUT_DIR),
            stem=params.get("stem"),
            tolerances=tolerances,
            seed=params.get("seed"),
            workers=int(params.get("workers") or 1),
            json_out=bool(args.json),
            parquet=bool(args.parquet),
        )


def load_config_file(path: Optional[str]) -> dict[str, Optional[str]]:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    if not Path(path).is_file():
        raise UsageError(f"config file {path} does not exist")
    values = {k.upper(): v for k, v in dotenv_values(path).items()}
    logger.debug("config %s: %s", path, sorted(values))
    return values


def ensure_directories(cfg: JobConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)


# ----------------------------------------------------------------------------
# Parsing helpers & writers
# ----------------------------------------------------------------------------


def parse_pair(text: str, kind: Callable[[str], Any] = float, sep: str = ",") -> tuple[Any, Any]:
    parts = [p for p in str(text).replace(" ", "").split(sep) if p]
    if len(parts) != 2:
        raise UsageError(f"expected two values separated by {sep!r}, got {text!r}")
    return kind(parts[0]), kind(parts[1])


def parse_basis(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    parts = [int(p) for p in str(text).replace(";", ",").split(",") if p.strip()]
    if len(parts) != 4:
        raise UsageError(f"basis needs four integers m1,n1,m2,n2, got {text!r}")
    return (parts[0], parts[1]), (parts[2], parts[3])


def load_descriptor(cfg: JobConfig) -> SingularTorus:
    (path,) = cfg.require("descriptor")
    try:
        desc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read descriptor {path}: {exc}") from exc
    return torus_from_descriptor(desc)


def descriptor_stem(cfg: JobConfig, suffix: str) -> str:
    return f"{Path(cfg.params['descriptor']).stem}_{suffix}"


def write_json(payload: dict, path: Path) -> Path:
    path.write_text(json.dumps(payload, indent=2) + "\n")
    logger.info("Wrote %s", path)
    return path


def write_table(cfg: JobConfig, frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %s", path)
    if cfg.parquet:
        pq = path.with_suffix(".parquet")
        frame.to_parquet(pq, index=False)
        logger.info("Wrote %s", pq)
    return path


def emit(cfg: JobConfig, payload: dict, lines: Sequence[str]) -> None:
    if cfg.json_out:
        print(json.dumps(payload, indent=2))
    else:
        for line in lines:
            print(line)


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_build(cfg: JobConfig) -> int:
    theta = cfg.require("theta")[0]
    if cfg.params.get("rect"):
        l, twist = cfg.require("l", "twist")
        torus = from_length_twist(theta, LengthTwist(l, twist))
        default_stem = f"rect_theta{theta:g}_l{l:g}_tw{twist:g}"
    else:
        x, y = cfg.require("x", "y")
        torus = build_torus(theta, x, y, seed=cfg.seed)
        default_stem = f"L_theta{theta:g}_x{x:g}_y{y:g}"
    report = check_invariants(torus)
    passed = report.passed()
    path = write_json(torus.to_descriptor(), cfg.output_path(default_stem, ".json"))
    print(f"invariants: {'PASS' if passed else 'FAIL'}", file=sys.stderr)
    emit(
        cfg,
        {"descriptor": str(path), "invariants": report.as_dict(), "passed": passed},
        [f"descriptor: {path}"] + [f"  {k}: {v:.3e}" for k, v in report.as_dict().items()],
    )
    return EXIT_OK if passed else EXIT_VIOLATION


def cmd_spectrum(cfg: JobConfig) -> int:
    torus = load_descriptor(cfg)
    table = spectrum(
        torus,
        cfg.window,
        seed=cfg.seed,
        workers=cfg.workers,
        probe_seeds=int(cfg.params.get("probe_seeds") or 0),
    )
    path = write_table(cfg, table.to_frame(), cfg.output_path(descriptor_stem(cfg, "spectrum"), ".csv"))
    summary = {
        "csv": str(path),
        "window": cfg.window,
        "homogeneity_residual": table.homogeneity_residual(),
        "symmetry_residual": table.symmetry_residual(),
        "failures": [list(c) for c in table.failures],
    }
    emit(
        cfg,
        summary,
        [
            f"spectrum: {path}",
            f"homogeneity residual: {summary['homogeneity_residual']:.3e}",
            f"symmetry residual: {summary['symmetry_residual']:.3e}",
            f"unresolved classes: {len(table.failures)}",
        ],
    )
    return EXIT_OK


def cmd_coords(cfg: JobConfig) -> int:
    torus = load_descriptor(cfg)
    basis = parse_basis(cfg.params["basis"])
    lt = coordinates(torus, basis, check_cone=bool(cfg.params.get("check_cone")))
    emit(
        cfg,
        {**lt.as_dict(), "basis": [list(b) for b in basis]},
        [f"l: {lt.l!r}", f"theta_twist: {lt.theta_twist!r}"],
    )
    return EXIT_OK


def cmd_invert(cfg: JobConfig) -> int:
    theta, l, twist = cfg.require("theta", "l", "twist")
    basis = parse_basis(cfg.params["basis"])
    lt = LengthTwist(l, twist)
    torus = from_length_twist(theta, lt, basis)
    path = write_json(torus.to_descriptor(), cfg.output_path(f"inv_theta{theta:g}_l{l:g}_tw{twist:g}", ".json"))
    back = coordinates(torus, basis, check_cone=False)
    residual = back.distance(lt)
    ok = residual < EPS_ROUND_TRIP
    emit(
        cfg,
        {"descriptor": str(path), "coordinates": back.as_dict(), "round_trip_residual": residual},
        [f"descriptor: {path}", f"round-trip residual: {residual:.3e} {'✅' if ok else '❌'}"],
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def _interior_singular(frame: pd.DataFrame) -> int:
    ls, ts = frame["l"], frame["theta_twist"]
    interior = (ls > ls.min()) & (ls < ls.max()) & (ts > ts.min()) & (ts < ts.max())
    return int((interior & (frame["flags"] == "singular-jacobian")).sum())


def cmd_rigidity(cfg: JobConfig) -> int:
    theta = cfg.require("theta")[0]
    n_l, n_t = parse_pair(cfg.params["grid"], int, "x")
    l_lo, l_hi = parse_pair(cfg.params["l_range"])
    t_lo, t_hi = parse_pair(cfg.params["twist_range"])
    if not 0 < l_lo < l_hi or not t_lo < t_hi or n_l < 1 or n_t < 1:
        raise UsageError("rigidity needs 0 < l_lo < l_hi, t_lo < t_hi and a positive grid")
    l_values = np.linspace(l_lo, l_hi, n_l)
    # twist grid is half open: [t_lo, t_hi)
    t_values = t_lo + (t_hi - t_lo) * np.arange(n_t) / n_t
    report = rigidity_scan(
        theta,
        l_values,
        t_values,
        parse_basis(cfg.params["basis"]),
        workers=cfg.workers,
        jac_step=float(cfg.params["jac_step"]),
        smoke=bool(cfg.params.get("smoke")),
    )
    stem = f"rigidity_theta{theta:g}_{n_l}x{n_t}"
    csv_path = write_table(cfg, report.frame, cfg.output_path(stem, ".csv"))
    json_path = write_json(report.summary(), cfg.output_path(stem, ".json"))
    singular = _interior_singular(report.frame)
    ok = report.passed and singular == 0
    emit(
        cfg,
        {**report.summary(), "csv": str(csv_path), "json": str(json_path), "singular_interior": singular},
        [
            f"collisions: {len(report.collisions)}",
            f"min pair distance: {report.min_pair_distance:.6e}",
            f"excluded points: {report.excluded}",
            f"singular interior Jacobians: {singular}",
            f"{'✅' if ok else '❌'} rigidity {'holds' if ok else 'violated'} on the grid",
        ],
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_foliation(cfg: JobConfig) -> int:
    torus = load_descriptor(cfg)
    iters = int(cfg.params["iters"])
    transversal = default_transversal(torus, seed=cfg.seed)
    out: dict[str, Any] = {"transversal_class": list(transversal.homology), "foliations": {}}
    cycles = {}
    rows = []
    for fol in FOLIATIONS:
        fm = first_return_map(torus, fol, transversal)
        rn = rotation_number(fm, iters)
        cyc = cycle_from_return_map(fm, rn)
        cycles[fol] = cyc
        entry = {
            **fm.to_report(),
            "rotation_number": rn.rho,
            "rotation_error": rn.error,
            "periodic": list(rn.periodic) if rn.periodic else None,
            "converged": rn.converged,
            "continuity_defect": fm.continuity_defect(),
            "cone_boundaries": list(fm.cone_boundaries),
            "asymptotic_cycle": list(cyc.direction),
        }
        crossings = int(cfg.params.get("cesaro") or 0)
        if crossings:
            ces = cesaro_cycle(torus, fol, crossings)
            entry["cesaro_cycle"] = list(ces.direction)
            entry["cesaro_angle"] = ces.angle_to(cyc)
        out["foliations"][fol] = entry
        for b in fm.branches:
            (m00, m01), (m10, m11) = b.mobius.to_list()
            rows.append(
                {"foliation": fol, "dom_lo": b.lo, "dom_hi": b.hi, "shift": b.shift,
                 "m00": m00, "m01": m01, "m10": m10, "m11": m11}
            )
    class_a = cycles_distinct(cycles["alpha"], cycles["beta"])
    out["class_A"] = class_a
    out["cycle_angle"] = cycles["alpha"].angle_to(cycles["beta"])
    stem = descriptor_stem(cfg, "foliation")
    json_path = write_json(out, cfg.output_path(stem, ".json"))
    write_table(cfg, pd.DataFrame(rows), cfg.output_path(stem + "_branches", ".csv"))
    emit(
        cfg,
        {**out, "json": str(json_path)},
        [f"foliation report: {json_path}"]
        + [f"A({fol}) = ({c.direction[0]:.10f}, {c.direction[1]:.10f})" for fol, c in cycles.items()]
        + [f"class A: {'yes' if class_a else 'no'}"],
    )
    return EXIT_OK if class_a else EXIT_VIOLATION


def cmd_gbcheck(cfg: JobConfig) -> int:
    count = int(cfg.params["random_triangles"])
    rng = np.random.default_rng(cfg.seed)
    residuals = [gauss_bonnet_residual(random_timelike_triangle(rng)) for _ in range(count)]
    worst = max(residuals, default=0.0)
    payload: dict[str, Any] = {"triangles": count, "max_residual": worst}
    lines = [f"triangles: {count}", f"max residual: {worst:.3e}"]
    ok = worst < GB_TOLERANCE
    if cfg.params.get("descriptor"):
        torus = load_descriptor(cfg)
        area = check_invariants(torus).area_residual
        payload["torus_area_residual"] = area
        lines.append(f"torus area residual: {area:.3e}")
        ok = ok and area < surface_builder.EPS_AREA
    lines.append("✅ Gauss-Bonnet holds" if ok else "❌ Gauss-Bonnet residual above tolerance")
    emit(cfg, payload, lines)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_render(cfg: JobConfig) -> int:
    torus = load_descriptor(cfg)
    geodesic = None
    if cfg.params.get("geodesic"):
        c = parse_pair(cfg.params["geodesic"], int)
        geodesic = find_closed_timelike_geodesic(torus, c, seed=cfg.seed, force=True)
    leaves = int(cfg.params.get("leaves") or 0)
    drawing = render_torus(
        torus,
        leaves=cfg.params["foliation"] if leaves else None,
        leaf_count=leaves or 16,
        geodesic=geodesic,
    )
    path = write_svg(drawing, cfg.output_path(descriptor_stem(cfg, "render"), ".svg"))
    emit(cfg, {"svg": str(path)}, [f"svg: {path}"])
    return EXIT_OK


COMMANDS: dict[str, Callable[[JobConfig], int]] = {
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "coords": cmd_coords,
    "invert": cmd_invert,
    "rigidity": cmd_rigidity,
    "foliation": cmd_foliation,
    "gbcheck": cmd_gbcheck,
    "render": cmd_render,
}


# ----------------------------------------------------------------------------
# Main orchestration
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help=f"KEY=value file (default ${CONFIG_ENV})")
    common.add_argument("--workers", type=int)
    common.add_argument("--parquet", action="store_true", help="write .parquet next to every CSV")
    common.add_argument("--tol", action="append", metavar="KEY=VALUE")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--stem")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ds2wb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="construct a torus")
    p.add_argument("--theta", type=float)
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--rect", action="store_true", help="rectangle torus from (l, twist)")
    p.add_argument("--l", type=float)
    p.add_argument("--twist", type=float)

    p = sub.add_parser("spectrum", parents=[common], help="timelike marked length spectrum")
    p.add_argument("--descriptor")
    p.add_argument("--window", type=int)
    p.add_argument("--probe-seeds", dest="probe_seeds", type=int)

    p = sub.add_parser("coords", parents=[common], help="length-twist coordinates")
    p.add_argument("--descriptor")
    p.add_argument("--basis")
    p.add_argument("--check-cone", dest="check_cone", action="store_true")

    p = sub.add_parser("invert", parents=[common], help="torus from length-twist coordinates")
    p.add_argument("--theta", type=float)
    p.add_argument("--l", type=float)
    p.add_argument("--twist", type=float)
    p.add_argument("--basis")

    p = sub.add_parser("rigidity", parents=[common], help="two-length rigidity scan")
    p.add_argument("--theta", type=float)
    p.add_argument("--grid", help="NxM grid in (l, twist)")
    p.add_argument("--l-range", dest="l_range")
    p.add_argument("--twist-range", dest="twist_range")
    p.add_argument("--basis")
    p.add_argument("--jac-step", dest="jac_step", type=float)
    p.add_argument("--smoke", action="store_true", help="second-difference smoothness check")

    p = sub.add_parser("foliation", parents=[common], help="lightlike foliation report")
    p.add_argument("--descriptor")
    p.add_argument("--iters", type=int)
    p.add_argument("--cesaro", type=int, help="crossings for the long-leaf cross-check")

    p = sub.add_parser("gbcheck", parents=[common], help="Gauss-Bonnet residuals")
    p.add_argument("--random-triangles", dest="random_triangles", type=int)
    p.add_argument("--descriptor")

    p = sub.add_parser("render", parents=[common], help="SVG figure")
    p.add_argument("--descriptor")
    p.add_argument("--leaves", type=int, help="number of leaves per foliation")
    p.add_argument("--foliation", choices=["alpha", "beta", "both"])
    p.add_argument("--geodesic", help="class m,n to overlay")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        cfg = JobConfig.from_args(args, load_config_file(args.config))
        ensure_directories(cfg)
        with ToleranceUpdate(cfg.tolerances):
            return COMMANDS[cfg.command](cfg)
    except SolverError as exc:
        logger.error("❌ %s: %s", args.command, exc)
        logger.error("residual %.3e at %s", exc.residual, list(exc.last_iterate))
        return EXIT_ERROR
    except (ValueError, ShootingError, CoordinateError, TracingError, ConePointHit) as exc:
        logger.error("❌ %s: %s", args.command, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
