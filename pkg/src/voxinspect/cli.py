"""Command-line entry point.

Subcommands::

    voxinspect run --scene FILE|builtin:NAME [--start x,y,z,yaw_deg] --out DIR
    voxinspect gtsp INSTANCE [--exact] [--seed N]
    voxinspect oracle --scene FILE|builtin:NAME [view flags]
    voxinspect make-scene NAME OUTFILE

Every ``run`` flag has a config-file key (``--config FILE``, flat
``section.key = value`` lines); flags override the file.

Exit codes: 0 finished / ok, 1 error, 2 stuck, 3 exact-solver guard exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace

from . import scenes
from .gtsp import GtspInstance, GtspParseError, InstanceTooLargeError, solve, solve_exact
from .metrics import render_table
from .planner import NoInfrastructureVisibleError, PlannerConfig, RrtSettings, inspectability, run
from .rrtstar import write_path_csv
from .viewgen import Camera, Granularity, ViewConstraint
from .world import Pose, SensorModel, load_scene

log = logging.getLogger("voxinspect")

EXIT_OK, EXIT_ERROR, EXIT_STUCK, EXIT_GUARD = 0, 1, 2, 3


def _floats(s):
    return tuple(float(v) for v in s.split(","))


def _cameras(s):
    return tuple(Camera(c.strip()) for c in s.split(",") if c.strip())


def _optional_int(s):
    return None if str(s).lower() in ("", "none") else int(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# config-file key -> (argparse dest, converter)
KEYS = {
    "run.scene": ("scene", str),
    "run.start": ("start", _floats),
    "run.out": ("out", str),
    "run.dump_grid": ("dump_grid", _bool),
    "view.apex_deg": ("apex_deg", float),
    "view.dist": ("dist", _floats),
    "view.granularity": ("granularity", Granularity),
    "view.cameras": ("cameras", _cameras),
    "planner.dd_factor": ("dd", float),
    "planner.rpt": ("rpt", _optional_int),
    "planner.seed": ("seed", int),
    "planner.cruise_mps": ("cruise_mps", float),
    "planner.max_lazy_replans": ("max_lazy_replans", int),
    "planner.solver_max_iter": ("solver_max_iter", int),
    "planner.solver_stall": ("solver_stall", int),
    "planner.stall_limit": ("stall_limit", int),
    "planner.max_iterations": ("max_iterations", int),
    "planner.sense_spacing": ("sense_spacing", float),
    "planner.wall_clock": ("wall_clock", _bool),
    "rrt.step": ("rrt_step", float),
    "rrt.rewire_radius": ("rrt_rewire_radius", float),
    "rrt.max_iterations": ("rrt_max_iterations", int),
    "rrt.goal_bias": ("rrt_goal_bias", float),
    "rrt.refine_iterations": ("rrt_refine_iterations", int),
    "sensor.hfov_deg": ("sensor_hfov_deg", float),
    "sensor.vfov_deg": ("sensor_vfov_deg", float),
    "sensor.max_range": ("sensor_max_range", float),
    "sensor.rays_h": ("sensor_rays_h", int),
    "sensor.rays_v": ("sensor_rays_v", int),
}

DEFAULTS = {
    "apex_deg": 20.0,
    "dist": (2.0, 5.0),
    "granularity": Granularity.PER_FACE,
    "cameras": tuple(Camera),
    "dd": 1.25,
    "rpt": None,
    "seed": 0,
    "cruise_mps": 1.0,
}


class ConfigError(ValueError):
    pass


def read_config(text):
    """Parse ``section.key = value`` lines into a dict keyed by argparse dest."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        dest, conv = KEYS[key]
        try:
            out[dest] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: {exc}") from exc
    return out


def _resolve(args):
    """Merge defaults < config file < flags into one dict."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            merged.update(read_config(fh.read()))
    for dest, _ in KEYS.values():
        v = getattr(args, dest, None)
        if v is not None:
            merged[dest] = v
    return merged


def open_scene(spec):
    """Load a scene file or a ``builtin:NAME`` scene; returns ``(scene, default_start)``."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in scenes.ALL:
            raise ConfigError(f"unknown builtin scene {name!r}; choose from {', '.join(sorted(scenes.ALL))}")
        return scenes.ALL[name]()
    with open(spec) as fh:
        text = fh.read()
    name = os.path.splitext(os.path.basename(spec))[0]
    return load_scene(text, name), None


def view_from(opts):
    lo, hi = opts["dist"]
    return ViewConstraint(
        math.radians(opts["apex_deg"]),
        lo,
        hi,
        frozenset(opts["cameras"]),
        Granularity(opts["granularity"]),
    )


def planner_config(opts):
    rrt = RrtSettings()
    for key in ("step", "rewire_radius", "max_iterations", "goal_bias", "refine_iterations"):
        v = opts.get("rrt_" + key)
        if v is not None:
            rrt = replace(rrt, **{key: v})
    sensor = SensorModel()
    for key, field_name, conv in (
        ("sensor_hfov_deg", "horizontal_fov", math.radians),
        ("sensor_vfov_deg", "vertical_fov", math.radians),
        ("sensor_max_range", "max_range", float),
        ("sensor_rays_h", "rays_h", int),
        ("sensor_rays_v", "rays_v", int),
    ):
        if opts.get(key) is not None:
            sensor = replace(sensor, **{field_name: conv(opts[key])})
    extra = {}
    for key in ("max_lazy_replans", "solver_max_iter", "solver_stall", "stall_limit", "max_iterations", "sense_spacing", "wall_clock"):
        if opts.get(key) is not None:
            extra[key] = opts[key]
    return PlannerConfig(
        view=view_from(opts),
        dd_factor=opts["dd"],
        rpt=opts["rpt"],
        rrt=rrt,
        sensor=sensor,
        seed=opts["seed"],
        cruise_mps=opts["cruise_mps"],
        **extra,
    )


def _start_pose(opts, default):
    start = opts.get("start")
    if start is None:
        if default is None:
            raise ConfigError("--start is required for scene files")
        return default
    if len(start) == 3:
        return Pose(start)
    if len(start) != 4:
        raise ConfigError("--start needs x,y,z or x,y,z,yaw_deg")
    return Pose(start[:3], math.radians(start[3]))


def cmd_run(args):
    opts = _resolve(args)
    if not opts.get("scene"):
        raise ConfigError("--scene is required")
    if not opts.get("out"):
        raise ConfigError("--out is required")
    scene, default_start = open_scene(opts["scene"])
    start = _start_pose(opts, default_start)
    config = planner_config(opts)
    report, state = run(scene, start, config)
    os.makedirs(opts["out"], exist_ok=True)
    out = opts["out"]
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out, "trace.jsonl"), "w") as fh:
        for rec in state.trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(os.path.join(out, "path.csv"), "w") as fh:
        write_path_csv(fh, state.path)
    with open(os.path.join(out, "table.md"), "w") as fh:
        fh.write(render_table([report]))
    if opts.get("dump_grid"):
        with open(os.path.join(out, "env.grid"), "w") as fh:
            fh.write(state.env.to_text())
    print(f"{report.status}: inspected {report.inspected}/{report.inspectable_voxels} "
          f"distance {report.distance_m:.2f} m, {report.iterations} iterations")
    if report.uninspectable:
        print("uninspectable: " + " ".join(report.uninspectable))
    return EXIT_OK if report.status == "finished" else EXIT_STUCK


def cmd_gtsp(args):
    with open(args.instance) as fh:
        inst = GtspInstance.from_text(fh.read())
    if args.exact:
        try:
            tour = solve_exact(inst)
        except InstanceTooLargeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_GUARD
    else:
        tour = solve(inst, seed=args.seed)
    print("tour: " + " ".join(str(v + 1) for v in tour.order))
    print(f"cost: {tour.cost:.10g}")
    return EXIT_OK


def cmd_oracle(args):
    opts = _resolve(args)
    if not opts.get("scene"):
        raise ConfigError("--scene is required")
    scene, _ = open_scene(opts["scene"])
    good, bad = inspectability(scene, view_from(opts))
    print(f"inspectable {len(good)}")
    print(f"uninspectable {len(bad)}")
    if args.list:
        for k in bad:
            print(f"  {k}")
    return EXIT_OK


def cmd_make_scene(args):
    if args.name not in scenes.ALL:
        raise ConfigError(f"unknown builtin scene {args.name!r}")
    scene, start = scenes.ALL[args.name]()
    with open(args.outfile, "w") as fh:
        fh.write(scene.to_text())
    x, y, z = start.position
    print(f"{x:g},{y:g},{z:g},{math.degrees(start.yaw):g}")
    return EXIT_OK


def _add_view_flags(p):
    p.add_argument("--scene", help="scene file or builtin:NAME")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--apex-deg", dest="apex_deg", type=float, help="viewing cone apex (default 20)")
    p.add_argument("--dist", type=_floats, help="min,max viewing distance (default 2,5)")
    p.add_argument("--granularity", type=Granularity, help="per-voxel or per-face (default)")
    p.add_argument("--cameras", type=_cameras, help="comma list of fwd,up,down (default all)")


def build_parser():
    parser = argparse.ArgumentParser(prog="voxinspect", description="Voxel infrastructure inspection planner.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="plan and simulate an inspection")
    _add_view_flags(p)
    p.add_argument("--start", type=_floats, help="x,y,z,yaw_deg")
    p.add_argument("--dd", type=float, help="discrepancy factor (default 1.25)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--rpt", type=_optional_int, help="viewpoints flown per iteration")
    p.add_argument("--cruise-mps", dest="cruise_mps", type=float)
    p.add_argument("--dump-grid", dest="dump_grid", action="store_const", const=True,
                   help="also write the final environment grid to env.grid")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gtsp", help="solve a GTSP instance dump")
    p.add_argument("instance")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gtsp)

    p = sub.add_parser("oracle", help="count inspectable voxels with full knowledge")
    _add_view_flags(p)
    p.add_argument("--list", action="store_true", help="also list uninspectable keys")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("make-scene", help="write a builtin scene to a file and print its start pose")
    p.add_argument("name", choices=sorted(scenes.ALL))
    p.add_argument("outfile")
    p.set_defaults(func=cmd_make_scene)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; keep 2 for "stuck"
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, IndexError, NoInfrastructureVisibleError, GtspParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
