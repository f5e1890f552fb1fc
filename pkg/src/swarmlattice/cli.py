"""Command-line entry point: ``swarmlattice run|batch|preset|grid-stats``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .geometry import (CoveringGrid, LatticeKind, LatticeSpec, Region, cell_volume, min_connectivity_ratio,
                       volumetric_quotient)
from .harness import BatchError, batch_run, export_trajectories, parse_seed_range, run_scenario, write_json
from .presets import PRESETS, run_preset

log = logging.getLogger("swarmlattice")

EXIT_OK, EXIT_CONFIG, EXIT_HORIZON = 0, 2, 3


def _parse_region(text: str) -> Region:
    parts = [float(x) for x in text.split(",")]
    if len(parts) == 1:
        return Region.cube(parts[0])
    if len(parts) == 6:
        return Region(tuple(parts[:3]), tuple(parts[3:]))
    raise ConfigError("region: give a cube side 'L' or 'x0,y0,z0,x1,y1,z1'")


def cmd_run(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = run_scenario(cfg)
    stem = Path(args.out) / f"{Path(args.config).stem}-seed{cfg.seed}"
    for p in export_trajectories(out, stem):
        print(p)
    m = out.metrics
    print(f"stop_reason={m.stop_reason} steps={m.steps_to_stop}")
    if args.strict and m.stop_reason == "horizon":
        return EXIT_HORIZON
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    seeds = parse_seed_range(args.seeds)
    summary = batch_run(cfg, seeds, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{Path(args.config).stem}-batch.json"
    write_json(path, {"config": cfg.to_dict(), **summary.to_dict()})
    print(path)
    print(f"median={summary.median:g} mean={summary.mean:g} iqr={summary.iqr:g} runs={len(seeds)}")
    if args.strict and any(m.stop_reason == "horizon" for m in summary.metrics):
        return EXIT_HORIZON
    return EXIT_OK


def cmd_preset(args) -> int:
    summary = run_preset(args.name, args.out, seed=args.seed)
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


def cmd_grid_stats(args) -> int:
    kind = LatticeKind.parse(args.kind)
    region = _parse_region(args.region)
    seed = region.center if args.grid_seed is None else tuple(float(x) for x in args.grid_seed.split(","))
    grid = CoveringGrid(LatticeSpec(kind, tuple(seed), args.r_s), region)
    stats = {"lattice": kind.value, "vertices": len(grid), "volumetric_quotient": volumetric_quotient(kind),
             "connectivity_ratio": min_connectivity_ratio(kind), "cell_volume": cell_volume(kind, args.r_s),
             "face_neighbors": int(max((len(n) for n in grid.neighbors), default=0))}
    for k, v in stats.items():
        print(f"{k}: {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmlattice", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override the file's seed")
    r.add_argument("--out", default="runs")
    r.add_argument("--strict", action="store_true", help="exit 3 if the horizon is hit without a stop")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run a scenario over a seed range")
    b.add_argument("config")
    b.add_argument("--seeds", required=True, help="a..b inclusive, or a,b,c")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", default="runs")
    b.add_argument("--strict", action="store_true")
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("preset", help="regenerate a named table or demo")
    s.add_argument("name", choices=sorted(PRESETS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="runs")
    s.set_defaults(func=cmd_preset)

    g = sub.add_parser("grid-stats", help="covering-set statistics for a lattice and region")
    g.add_argument("kind", help="to, cube, hex or rd")
    g.add_argument("region", help="cube side L, or x0,y0,z0,x1,y1,z1")
    g.add_argument("--r-s", type=float, default=1.0, dest="r_s")
    g.add_argument("--grid-seed", default=None, help="x,y,z (default: region centre)")
    g.set_defaults(func=cmd_grid_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, BatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
