"""Command line entry point.

Exit codes: 0 success, 1 an acceptance property failed, 2 bad configuration
or input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path
from typing import Sequence

from .channel import NoiseSetting
from .config import OUTPUT_ENV, load_config, resolve_output_dir
from .evaluation import EvalReport, reports_to_csv, reports_to_json
from .experiments import EXPERIMENTS, Bundle, _monotone_check
from .fusion import RangeShape
from .geometry import transform_box, transform_to_frame
from .harness import CPMode, ConfigError, ExperimentConfig, perceive, run_experiment, select_agents_for
from .plots import noise_chart, render_scene
from .scene import Archetype, Scene, ScenarioSpec, generate
from .sensing import raycast

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG = 0, 1, 2


def _summary_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["noise", "ap50", "ap70", "mean_ap50", "mean_ap70"])
    for r in reports:
        w.writerow([r.config.get("noise_label", "")] +
                   ["" if v is None else f"{v:.4f}" for v in (r.ap50, r.ap70, r.mean_ap50, r.mean_ap70)])
    return buf.getvalue()


def cmd_run(args: argparse.Namespace) -> int:
    cfg, opts = load_config(args.config)
    changes = {}
    if args.seeds is not None:
        changes["seeds"] = tuple(args.seeds)
    if args.noise is not None:
        try:
            changes["noise"] = tuple(s for t in args.noise for s in
                                     (NoiseSetting.sweep() if t.lower() == "sweep" else [NoiseSetting.parse(t)]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if args.mode is not None:
        changes["cp_mode"] = CPMode(args.mode)
    if args.range_shape is not None:
        changes["range_shape"] = RangeShape(args.range_shape)
    if changes:
        cfg = ExperimentConfig(**{**{f: getattr(cfg, f) for f in cfg.__dataclass_fields__}, **changes})
    workers = args.workers or opts.workers
    out = resolve_output_dir(args.out, opts.output_dir)
    t0 = time.perf_counter()
    reports = run_experiment(cfg, workers=workers)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(reports_to_json(reports, {"config": cfg.to_dict()}))
    (out / "table.csv").write_text(_summary_csv(reports))
    (out / "scenes.csv").write_text(reports_to_csv(reports))
    if len(reports) > 1:
        (out / "ap_vs_noise.svg").write_text(noise_chart({cfg.cp_mode.value: [r.mean_ap70 for r in reports]},
                                                         title=f"{cfg.name}: AP@0.7 per noise setting"))
    for r in reports:
        print(f"{cfg.name} {r.config['noise_label']:>9}  AP@0.5 {_f(r.mean_ap50)}  AP@0.7 {_f(r.mean_ap70)}")
    print(f"wrote {out} in {time.perf_counter() - t0:.1f}s")
    check = _monotone_check(reports)
    print(check.line())
    return EXIT_OK if check.passed else EXIT_ACCEPTANCE


def _f(v: float | None) -> str:
    return "  n/a" if v is None else f"{v:.3f}"


def _print_bundle(b: Bundle) -> None:
    print(b.table_csv(), end="")
    for c in b.checks:
        print(c.line())


def cmd_experiment(args: argparse.Namespace) -> int:
    fn = EXPERIMENTS[args.command]
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    t0 = time.perf_counter()
    bundle = fn(seeds=range(args.seeds), workers=args.workers)
    out = resolve_output_dir(args.out) / args.command
    bundle.write(out)
    _print_bundle(bundle)
    print(f"wrote {out} in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK if bundle.passed else EXIT_ACCEPTANCE


def _default_mode(scene: Scene) -> CPMode:
    if scene.infrastructure():
        return CPMode.V2X
    return CPMode.V2V if len(scene.vehicles()) > 1 else CPMode.NO_FUSION


def cmd_render(args: argparse.Namespace) -> int:
    try:
        scene = Scene.from_json(Path(args.scene).read_text())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load scene {args.scene}: {exc}") from exc
    if not 0 <= args.frame < scene.n_frames:
        raise ConfigError(f"frame {args.frame} outside [0, {scene.n_frames})")
    mode = CPMode(args.mode) if args.mode else _default_mode(scene)
    cfg = ExperimentConfig(name="render", cp_mode=mode, scenarios=(scene.spec,), seeds=(scene.spec.seed,))
    ego_id, aux_ids = select_agents_for(scene.spec, mode)
    cache = {}

    def sense(agent, f):
        if (agent.agent_id, f) not in cache:
            cache[agent.agent_id, f] = raycast(scene, f, agent)
        return cache[agent.agent_id, f]

    clouds = {}
    for a in scene.agents:
        pose = scene.agent_pose(a.agent_id, args.frame)
        clouds[a.agent_id] = transform_to_frame(sense(a, args.frame).points, pose)
    ego = scene.agent(ego_id)
    boxes = perceive(scene, args.frame, ego, [scene.agent(a) for a in aux_ids], NoiseSetting.perfect(), cfg, sense)
    ego_pose = scene.agent_pose(ego_id, args.frame)
    world = [transform_box(b, ego_pose) for b in boxes]
    svg = render_scene(scene, args.frame, clouds, world)
    path = Path(args.output) if args.output else resolve_output_dir(args.out) / f"{scene.scene_id}_f{args.frame}.svg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    print(f"{mode.value} ego {ego_id}: {len(world)} detections, {len(scene.frames[args.frame].actors)} actors")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_scene(args: argparse.Namespace) -> int:
    try:
        spec = ScenarioSpec(Archetype(args.archetype), n_vehicle_agents=args.vehicles, n_infra_agents=args.infra,
                            n_actors=args.actors, occluder_density=args.occluders, n_frames=args.frames,
                            seed=args.seed, regime=args.regime)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    scene = generate(spec)
    path = Path(args.output) if args.output else resolve_output_dir(args.out) / f"{scene.scene_id}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scene.to_json() + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_noise_levels(args: argparse.Namespace) -> int:
    levels = [NoiseSetting.perfect(), NoiseSetting.simple(), *NoiseSetting.sweep()]
    if args.json:
        print(json.dumps([n.to_dict() for n in levels], indent=1))
        return EXIT_OK
    print(f"{'label':<10} {'sigma_xy_m':>10} {'sigma_yaw_deg':>13} {'latency':>7} {'compress':>8}")
    for n in levels:
        print(f"{n.label:<10} {n.sigma_xy:>10.2f} {n.sigma_yaw:>13.2f} {n.latency_frames:>7} "
              f"{n.compression_factor:>8}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infracp", description="Infrastructure-assisted cooperative perception "
                                "simulator and experiment harness.",
                                epilog=f"Output directory: --out, else ${OUTPUT_ENV}, else the config's "
                                "output_dir, else ./infracp_out.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment described by a YAML file")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.add_argument("--seeds", type=int, nargs="+", help="override the seed list")
    r.add_argument("--noise", nargs="+", help="override noise: Perfect, Simple, Harsh(k) or sweep")
    r.add_argument("--mode", choices=[m.value for m in CPMode])
    r.add_argument("--range-shape", choices=[s.value for s in RangeShape])
    r.set_defaults(func=cmd_run)

    for name, fn in EXPERIMENTS.items():
        e = sub.add_parser(name, help=((fn.__doc__ or "").strip().splitlines() or [name])[0])
        e.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
        e.add_argument("--workers", type=int, default=1)
        e.add_argument("--out")
        e.set_defaults(func=cmd_experiment)

    d = sub.add_parser("render", help="SVG bird's-eye view of a scene with clouds and boxes")
    d.add_argument("scene")
    d.add_argument("--frame", type=int, default=0)
    d.add_argument("--mode", choices=[m.value for m in CPMode])
    d.add_argument("-o", "--output")
    d.add_argument("--out")
    d.set_defaults(func=cmd_render)

    s = sub.add_parser("scene", help="generate a scene JSON document")
    s.add_argument("archetype", choices=[a.value for a in Archetype])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--vehicles", type=int, default=2)
    s.add_argument("--infra", type=int, default=1)
    s.add_argument("--actors", type=int, default=24)
    s.add_argument("--occluders", type=float, default=1.0)
    s.add_argument("--frames", type=int, default=20)
    s.add_argument("--regime", default="v2xset", choices=["v2xset", "v2xsim"])
    s.add_argument("-o", "--output")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scene)

    n = sub.add_parser("noise-levels", help="list the noise settings and the harsh sweep")
    n.add_argument("--json", action="store_true")
    n.set_defaults(func=cmd_noise_levels)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
