"""Named experiments that regenerate the published tables and demos.

Each preset writes into an output directory and returns a summary dict. Runs
are seeded from a base seed, so re-running a preset rewrites byte-identical
files.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

from .config import ScenarioConfig
from .geometry import LatticeKind, LatticeSpec, Region, covering_set, volumetric_quotient
from .harness import batch_run, export_trajectories, run_scenario, summarize, write_csv, write_json

# Edge of the conventional cubic cell of the truncated-octahedron lattice, in units of r_s.
TO_CELL = 4 / math.sqrt(5)

PUBLISHED_VQ = {"to": 0.68, "cube": 0.36, "hex": 0.47, "rd": 0.47}
PUBLISHED_COUNTS = {"to": 100, "cube": 172, "hex": 140, "rd": 142}
PUBLISHED_STEPS = {"to": 17, "cube": 28, "hex": 23, "rd": 22}
PUBLISHED_SEARCH = {"levy-grid": 87, "grid-normal-length": 125, "neighbor-grid": 300, "levy-continuous": 1300}
LATTICES = ("to", "cube", "hex", "rd")


def cells_region(cells: float, r_s: float = 1.0) -> Region:
    """Cube of ``cells`` truncated-octahedron cells per side, centred on the origin."""
    return Region.cube(cells * TO_CELL * r_s)


def _region_fields(region: Region) -> dict:
    return {"region_min_m": [float(x) for x in region.lo], "region_max_m": [float(x) for x in region.hi]}


def coverage_config(kind: str, cells: float = 4, seed: int = 0, r_s: float = 1.0) -> ScenarioConfig:
    # one agent per covering vertex, grid seeded at the region centre
    return ScenarioConfig(mode="coverage", lattice=kind, seed=seed, r_s_m=r_s, r_c_m=3.0 * r_s,
                          grid_seed_m=[0.0, 0.0, 0.0], horizon_ticks=20_000,
                          **_region_fields(cells_region(cells, r_s)))


def search_config(strategy: str, seed: int = 0, n_agents: int = 4, cells: float = 6,
                  stop: str = "all-targets", **kw) -> ScenarioConfig:
    return ScenarioConfig(mode="search", lattice="to", n_agents=n_agents, n_targets=3, seed=seed, r_c_m=3.0,
                          strategy=strategy, stop=stop, grid_seed_m=[0.0, 0.0, 0.0], horizon_ticks=20_000,
                          clustered=True, cluster_sigma_m=1.0, **_region_fields(cells_region(cells)), **kw)


def vq_table(out: Path, seed: int = 0) -> dict:
    rows = [(k, volumetric_quotient(k), PUBLISHED_VQ[k]) for k in LATTICES]
    write_csv(out / "vq-table.csv", ["lattice", "volumetric_quotient", "published"], rows)
    return {k: v for k, v, _ in rows}


def grid_comparison(out: Path, seed: int = 0, n_seeds: int = 20) -> dict:
    summary = {}
    rows = []
    for k in LATTICES:
        count = len(covering_set(LatticeSpec(k, (0.0, 0.0, 0.0), 1.0), Region.cube(10.0)))
        b = batch_run(coverage_config(k), range(seed, seed + n_seeds))
        summary[k] = {"vertices_10rs": count, "published_vertices": PUBLISHED_COUNTS[k],
                      "mean_steps": b.mean, "median_steps": b.median, "published_steps": PUBLISHED_STEPS[k],
                      "all_complete": all(m.stop_reason == "complete" for m in b.metrics)}
        rows.append((k, count, PUBLISHED_COUNTS[k], b.mean, b.median, PUBLISHED_STEPS[k]))
    write_csv(out / "grid-comparison.csv",
              ["lattice", "vertices", "published_vertices", "mean_steps", "median_steps", "published_steps"], rows)
    return summary


def search_styles(out: Path, seed: int = 0, n_seeds: int = 20) -> dict:
    summary = {}
    rows = []
    for st in PUBLISHED_SEARCH:
        b = batch_run(search_config(st), range(seed, seed + n_seeds))
        summary[st] = {"median_steps": b.median, "mean_steps": b.mean, "iqr": b.iqr,
                       "published": PUBLISHED_SEARCH[st]}
        rows.append((st, b.median, b.mean, b.iqr, PUBLISHED_SEARCH[st]))
    write_csv(out / "search-styles.csv", ["strategy", "median_steps", "mean_steps", "iqr", "published"], rows)
    return summary


def sensors_vs_time(out: Path, seed: int = 0, n_seeds: int = 10) -> dict:
    summary = {}
    rows = []
    for st in ("neighbor-grid", "levy-grid"):
        for n in (1, 2, 8, 14):
            b = batch_run(search_config(st, n_agents=n), range(seed, seed + n_seeds))
            summary[f"{st}/{n}"] = b.median
            rows.append((st, n, b.median, b.mean))
    write_csv(out / "sensors-vs-time.csv", ["strategy", "n_agents", "median_steps", "mean_steps"], rows)
    return summary


def _demo(cfg: ScenarioConfig, name: str, out: Path) -> dict:
    res = run_scenario(cfg)
    export_trajectories(res, out / name)
    return res.metrics.to_dict()


def _shape_demo(shape: dict):
    def run(out: Path, seed: int = 0) -> dict:
        cfg = ScenarioConfig(mode="shape", lattice="to", seed=seed, r_c_m=3.0, shape=shape,
                             grid_seed_m=[0.0, 0.0, 0.0], horizon_ticks=20_000,
                             **_region_fields(Region.cube(12.0)))
        return _demo(cfg, f"shape-{shape['kind']}", out)
    return run


def _formation_demo(preset: str):
    def run(out: Path, seed: int = 0) -> dict:
        cfg = ScenarioConfig(mode="formation", formation_preset=preset, seed=seed, record_every=50)
        return _demo(cfg, f"formation-{preset}", out)
    return run


def coverage_demo(out: Path, seed: int = 0) -> dict:
    return _demo(replace(coverage_config("to"), seed=seed), "coverage-to", out)


def search_demo(out: Path, seed: int = 0) -> dict:
    return _demo(search_config("levy-grid", seed=seed), "search-levy-grid", out)


PRESETS = {
    "vq-table": vq_table,
    "grid-comparison": grid_comparison,
    "search-styles": search_styles,
    "sensors-vs-time": sensors_vs_time,
    "coverage": coverage_demo,
    "search": search_demo,
    "shape-sphere": _shape_demo({"kind": "sphere", "r": 4.0}),
    "shape-cuboid": _shape_demo({"kind": "cuboid", "min_corner": [-4, -3, -2], "max_corner": [4, 3, 2]}),
    "shape-torus": _shape_demo({"kind": "torus", "a": 1.8, "c": 3.5}),
    "shape-ellipsoid": _shape_demo({"kind": "ellipsoid", "a": 5.0, "b": 3.5, "c": 2.5}),
    "formation-tetrahedron": _formation_demo("tetrahedron"),
    "formation-six": _formation_demo("six-robot"),
    "formation-anonymous": _formation_demo("anonymous-six"),
}


def run_preset(name: str, out, seed: int = 0) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = PRESETS[name](out, seed=seed)
    write_json(out / f"{name}.summary.json", {"preset": name, "seed": seed, "summary": summary})
    return summary


__all__ = ["PRESETS", "run_preset", "cells_region", "coverage_config", "search_config", "TO_CELL",
           "LatticeKind", "summarize"]
