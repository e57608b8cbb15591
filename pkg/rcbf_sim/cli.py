"""Command-line entry point: ``rcbf-sim run | preset | mesh | oracle``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

from .config_loader import UnsupportedConfigFormatError
from .errors import RcbfSimError, SafetyViolationError
from .mesh import generate_ellipsoid_mesh, mesh_spacing, write_mesh
from .oracles import ORACLES, run_oracle
from .presets import DAY, EROS_MESH_POINTS, PRESETS, RCBF_VARIANTS, REFERENCE_A_MAX, get_preset, with_rcbf_variant
from .report import write_run, write_summary
from .scenario import ScenarioConfig, load_scenario, scenario_from_mapping, scenario_to_mapping, with_overrides
from .sim import run

logger = logging.getLogger(__name__)

OUT_ENV = "RCBF_SIM_OUT"
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSAFE = 2

# ---------- helpers ----------

def default_outdir() -> str:
    return os.environ.get(OUT_ENV, "out")

def parse_sweep(spec: str) -> list[int]:
    """``seeds=a..b`` (inclusive) to a list of seeds."""

    match = re.fullmatch(r"seeds=(-?\d+)\.\.(-?\d+)", spec.strip())
    if not match:
        raise ValueError(f"--sweep expects seeds=a..b, got {spec!r}")
    lo, hi = int(match.group(1)), int(match.group(2))
    if hi < lo:
        raise ValueError("--sweep range is empty")
    return list(range(lo, hi + 1))

def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)

def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.scenario:
        config = load_scenario(args.scenario)
    else:
        options: dict[str, Any] = {}
        if args.mesh and args.preset == "mission-b":
            options["mesh_path"] = args.mesh
        config = get_preset(args.preset, **options)
    duration = args.duration
    if args.duration_days is not None:
        duration = args.duration_days * DAY
    config = with_overrides(config, seed=args.seed, duration=duration, dt=args.dt)
    if args.rcbf:
        config = with_rcbf_variant(config, args.rcbf)
    if args.disturbance:
        config = with_overrides(config, disturbance=dataclasses.replace(config.disturbance, mode=args.disturbance))
    if args.strict:
        config = with_overrides(config, safety=dataclasses.replace(config.safety, mode="assert"))
    return config

def _extra(config: ScenarioConfig) -> dict[str, Any]:
    reference = REFERENCE_A_MAX.get(config.name)
    return {"a_max_reference": reference} if reference is not None else {}

def run_one(mapping: dict[str, Any], outdir: str, progress: bool = False) -> dict[str, Any]:
    """Run one scenario mapping and write its outputs; usable from worker processes."""

    config = scenario_from_mapping(mapping)
    try:
        log = run(config, progress=progress)
    except SafetyViolationError as exc:
        logger.error("%s (seed %d): %s", config.name, config.seed, exc)
        return {"scenario": config.name, "seed": config.seed, "safety": {"held": False}, "error": str(exc)}
    return write_run(log, outdir, extra=_extra(config))

# ---------- subcommands ----------

def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    outdir = Path(args.out or default_outdir())
    if args.sweep:
        seeds = parse_sweep(args.sweep)
        mappings = [scenario_to_mapping(with_overrides(config, seed=s)) for s in seeds]
        dirs = [str(outdir / f"seed-{s}") for s in seeds]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            summaries = list(pool.map(run_one, mappings, dirs))
        sweep = {
            "scenario": config.name,
            "seeds": seeds,
            "min_distance": min((s.get("min_distance", float("inf")) for s in summaries), default=None),
            "violated_seeds": [s["seed"] for s in summaries if not s["safety"]["held"]],
            "runs": [{k: s.get(k) for k in ("seed", "min_distance", "max_H", "max_active", "safety")} for s in summaries],
        }
        write_summary(sweep, str(outdir), name="sweep.json")
        print(json.dumps({k: sweep[k] for k in ("scenario", "seeds", "min_distance", "violated_seeds")}))
        return EXIT_UNSAFE if sweep["violated_seeds"] else EXIT_OK

    summary = run_one(scenario_to_mapping(config), str(outdir), progress=not args.no_progress)
    if "error" in summary:
        print(f"error: {summary['error']}", file=sys.stderr)
        return EXIT_UNSAFE
    print(
        f"{summary['scenario']} seed={summary['seed']}: closest approach {summary['min_distance']:.6g} m, "
        f"max H {summary['max_H']:.6g} m, safety {'held' if summary['safety']['held'] else 'VIOLATED'} -> {outdir}"
    )
    return EXIT_OK if summary["safety"]["held"] else EXIT_UNSAFE

def cmd_preset(args: argparse.Namespace) -> int:
    if not args.name:
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    text = json.dumps(scenario_to_mapping(get_preset(args.name)), indent=2)
    if args.write:
        Path(args.write).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.write}")
    else:
        print(text)
    return EXIT_OK

def cmd_mesh(args: argparse.Namespace) -> int:
    vertices = generate_ellipsoid_mesh(args.semi_axes, args.n_points)
    spacing = mesh_spacing(vertices)
    write_mesh(vertices, args.out, comment=f"ellipsoid {args.semi_axes} with {args.n_points} points")
    print(f"wrote {len(vertices)} vertices to {args.out}; max nearest-neighbour spacing {spacing:.1f} m")
    if args.rho is not None and spacing >= 2.0 * args.rho:
        print(f"warning: spacing >= 2*rho = {2 * args.rho:g} m", file=sys.stderr)
    return EXIT_OK

def cmd_oracle(args: argparse.Namespace) -> int:
    result = run_oracle(args.name)
    print(
        f"{result.name}: max error {result.max_error:.3g} (tolerance {result.tolerance:g}) "
        f"in {result.elapsed_s:.2f} s -> {'ok' if result.passed else 'FAILED'}"
    )
    if args.verbose:
        print(json.dumps(result.details, indent=2))
    return EXIT_OK if result.passed else EXIT_ERROR

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcbf-sim", description="Robust control barrier function safety-filter simulator")
    ap.add_argument("--verbose", action="store_true", help="debug logging")
    ap.add_argument("--quiet", action="store_true", help="warnings and errors only")
    sub = ap.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("run", help="simulate a scenario file or preset")
    source = rp.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="scenario file (.json, .yml, .yaml)")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    rp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--duration", type=float, help="simulated seconds")
    rp.add_argument("--duration-days", type=float, help="simulated days")
    rp.add_argument("--dt", type=float, help="control step in seconds")
    rp.add_argument("--rcbf", choices=RCBF_VARIANTS, help="replace the barrier construction")
    rp.add_argument("--disturbance", choices=("zero", "random", "worst", "helpful"))
    rp.add_argument("--mesh", help="vertex file for the mission-b preset")
    rp.add_argument("--sweep", help="run seeds in parallel, e.g. seeds=0..9")
    rp.add_argument("--workers", type=int, default=None)
    rp.add_argument("--strict", action="store_true", help="abort on the first safety violation")
    rp.add_argument("--no-progress", action="store_true")
    rp.set_defaults(func=cmd_run)

    pp = sub.add_parser("preset", help="list presets or print one as a scenario file")
    pp.add_argument("name", nargs="?", choices=sorted(PRESETS))
    pp.add_argument("--write", help="write the scenario JSON here instead of printing it")
    pp.set_defaults(func=cmd_preset)

    mp = sub.add_parser("mesh", help="write a synthetic ellipsoid vertex file")
    mp.add_argument("--semi-axes", type=float, nargs=3, default=[16000.0, 8000.0, 8000.0], metavar=("A", "B", "C"))
    mp.add_argument("--n-points", type=int, default=EROS_MESH_POINTS)
    mp.add_argument("--rho", type=float, help="warn when the spacing leaves gaps between keep-out spheres")
    mp.add_argument("--out", required=True)
    mp.set_defaults(func=cmd_mesh)

    op = sub.add_parser("oracle", help="run a built-in consistency check")
    op.add_argument("name", choices=ORACLES)
    op.set_defaults(func=cmd_oracle)
    return ap

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except SafetyViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSAFE
    except (RcbfSimError, UnsupportedConfigFormatError, ValueError, OSError, ModuleNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

if __name__ == "__main__":
    sys.exit(main())
