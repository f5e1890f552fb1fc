"""Run scenarios, aggregate seeded batches and write trajectory files."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig
from .coverage import DEFAULT_HORIZON, run_coverage
from .formation import run_formation
from .geometry import CoveringGrid, LatticeSpec, shape_from_dict
from .search import SearchScenario, run_search

log = logging.getLogger(__name__)

STOP_REASONS = ("complete", "all-targets", "all-visited", "converged", "horizon")


@dataclass
class Metrics:
    steps_to_stop: int
    stop_reason: str
    detection_ticks: dict = field(default_factory=dict)
    coverage_series: list = field(default_factory=list)
    formation_errors: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detection_ticks"] = {str(k): v for k, v in sorted(self.detection_ticks.items())}
        return d


@dataclass
class RunOutput:
    config: ScenarioConfig
    metrics: Metrics
    columns: list
    rows: list
    target_rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def _num(x) -> float | int | str:
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def _coverage_output(cfg: ScenarioConfig) -> tuple[Metrics, list, list]:
    region = cfg.region
    spec_seed = cfg.grid_seed_m
    shape = shape_from_dict(cfg.shape) if cfg.mode == "shape" else None
    n = cfg.n_agents
    if n is None:
        seed_pt = region.center if spec_seed is None else spec_seed
        grid = CoveringGrid(LatticeSpec(cfg.lattice, tuple(seed_pt), cfg.r_s_m), region,
                            None if shape is None else shape.contains)
        n = len(grid)
    horizon = DEFAULT_HORIZON if cfg.horizon_ticks is None else cfg.horizon_ticks
    run = run_coverage(cfg.lattice, region, n, cfg.r_s_m, cfg.seed, r_c=cfg.r_c, horizon=horizon,
                       shape=shape, oracle_occupancy=cfg.oracle_occupancy, grid_seed=spec_seed,
                       conflict=cfg.conflict)
    metrics = Metrics(run.tick, run.stop_reason,
                      coverage_series=[(int(t), float(f)) for t, f in run.coverage_series],
                      extras={"n_agents": n, "n_vertices": len(run.grid),
                              "consensus_ticks": run.consensus_ticks, "spread_steps": run.steps_taken,
                              "grid_seed_m": [float(x) for x in run.spec.seed]})
    columns = ["tick", "agent_id", "x", "y", "z", "phase"]
    rows = [(t, i, *map(float, p), phase) for t, phase, pts in run.trajectory for i, p in enumerate(pts)]
    return metrics, columns, rows


def _search_output(cfg: ScenarioConfig) -> tuple[Metrics, list, list, list]:
    horizon = 10_000 if cfg.horizon_ticks is None else cfg.horizon_ticks
    sc = SearchScenario(kind=cfg.lattice, region=cfg.region, n_agents=cfg.n_agents, n_targets=cfg.n_targets,
                        r_s=cfg.r_s_m, seed=cfg.seed, strategy=cfg.strategy, stop=cfg.stop, horizon=horizon,
                        r_c=cfg.r_c, alpha=cfg.levy_alpha, l_min=cfg.levy_l_min_m, sigma=cfg.normal_sigma_m,
                        clustered=cfg.clustered, cluster_sigma=cfg.cluster_sigma_m,
                        mobile_targets=cfg.mobile_targets, target_step=cfg.target_step_m,
                        grid_seed=None if cfg.grid_seed_m is None else tuple(cfg.grid_seed_m))
    res = run_search(sc)
    metrics = Metrics(res.steps, res.stop_reason,
                      detection_ticks={e.target: e.tick for e in res.detections},
                      extras={"consensus_ticks": res.consensus_ticks, "n_vertices": len(res.grid),
                              "visited_fraction": float(res.visited.any(axis=0).mean()),
                              "detections": [asdict(e) for e in res.detections]})
    columns = ["tick", "agent_id", "x", "y", "z"]
    rows = [(t, i, *map(float, p)) for t, pts in res.trajectory for i, p in enumerate(pts)]
    trows = [(t, j, *map(float, p)) for t, pts in res.target_trajectory for j, p in enumerate(pts)]
    return metrics, columns, rows, trows


def _formation_output(cfg: ScenarioConfig) -> tuple[Metrics, list, list]:
    sc = cfg.formation_scenario()
    res = run_formation(sc)
    ticks = len(res.times) - 1
    every = max(sc.record_every, 1)
    idx = range(0, ticks + 1, every)
    metrics = Metrics(ticks, "converged" if ticks > 0 and res.converged() else "horizon",
                      formation_errors=[(int(k), float(res.ey[k]), float(res.ez[k])) for k in idx],
                      extras={"u_norm_max": res.u_norm_max, "v_min_seen": res.v_range[0],
                              "v_max_seen": res.v_range[1], "u_dot_c_max": res.u_dot_c_max,
                              "c_norm_dev_max": res.c_norm_dev_max, "qr_bound_ok": res.qr_bound_ok,
                              "peak_ey": float(res.ey.max()), "peak_ez": float(res.ez.max()),
                              "final_ey": float(res.ey[-1]), "final_ez": float(res.ez[-1]),
                              "absorbed_epoch": res.absorbed_epoch,
                              "final_assignment": [int(a) for a in res.assignments[-1][1]]})
    columns = ["tick", "agent_id", "x", "y", "z", "t_s", "theta", "psi", "v", "u_norm", "q", "r", "slot"]
    rows = []
    ts = sc.config.Ts
    for k, xi, th, ps, v, un, q, r, slot in res.trajectory:
        for i in range(len(xi)):
            rows.append((k, i, *map(float, xi[i]), k * ts, float(th[i]), float(ps[i]), float(v[i]),
                         float(un[i]), float(q[i]), float(r[i]), int(slot[i])))
    return metrics, columns, rows


def run_scenario(cfg: ScenarioConfig) -> RunOutput:
    """Dispatch one seeded scenario; identical configs give identical outputs."""
    warnings = cfg.validate()
    for w in warnings:
        log.warning(w)
    trows = []
    if cfg.mode in ("coverage", "shape"):
        metrics, columns, rows = _coverage_output(cfg)
    elif cfg.mode == "search":
        metrics, columns, rows, trows = _search_output(cfg)
    else:
        metrics, columns, rows = _formation_output(cfg)
    return RunOutput(cfg, metrics, columns, rows, trows, warnings)


# ---------------------------------------------------------------- batches

class BatchError(RuntimeError):
    def __init__(self, seed: int, cause: Exception):
        super().__init__(f"seed {seed}: {cause}")
        self.seed = seed
        self.cause = cause


@dataclass
class BatchSummary:
    seeds: list
    metrics: list
    median: float
    mean: float
    iqr: float

    def to_dict(self) -> dict:
        return {"seeds": list(self.seeds), "median": self.median, "mean": self.mean, "iqr": self.iqr,
                "steps": [m.steps_to_stop for m in self.metrics],
                "stop_reasons": [m.stop_reason for m in self.metrics]}


def _one(cfg: ScenarioConfig) -> Metrics:
    try:
        return run_scenario(cfg).metrics
    except Exception as exc:  # re-raised with the seed attached
        raise BatchError(cfg.seed, exc) from exc


def summarize(steps) -> tuple[float, float, float]:
    arr = np.asarray(steps, dtype=float)
    q1, q3 = np.percentile(arr, [25, 75])
    return float(np.median(arr)), float(arr.mean()), float(q3 - q1)


def batch_run(cfg: ScenarioConfig, seeds, workers: int = 1) -> BatchSummary:
    seeds = list(seeds)
    if not seeds:
        raise ValueError("batch needs at least one seed")
    cfgs = [replace(cfg, seed=int(s)) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            metrics = list(ex.map(_one, cfgs))
    else:
        metrics = [_one(c) for c in cfgs]
    med, mean, iqr = summarize([m.steps_to_stop for m in metrics])
    return BatchSummary(seeds, metrics, med, mean, iqr)


def parse_seed_range(text: str) -> list[int]:
    """``"a..b"`` (inclusive) or a comma list."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"seeds: cannot parse {text!r}; use a..b or a,b,c") from None


# ---------------------------------------------------------------- files

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.bool_)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_trajectories(out: RunOutput, stem) -> list[Path]:
    """Write ``stem.csv`` (+ ``stem.targets.csv`` for search) and the ``stem.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = [stem.with_suffix(".csv")]
    write_csv(paths[0], out.columns, out.rows)
    if out.config.mode == "search":
        p = stem.parent / (stem.name + ".targets.csv")
        write_csv(p, ["tick", "target_id", "x", "y", "z"], out.target_rows)
        paths.append(p)
    side = stem.with_suffix(".json")
    write_json(side, {"version": __version__, "seed": out.config.seed, "config": out.config.to_dict(),
                      "warnings": list(out.warnings), "metrics": out.metrics.to_dict()})
    paths.append(side)
    return paths


def read_trajectory(path) -> tuple[list, list]:
    """Inverse of ``write_csv``: header plus rows with numbers parsed back."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for row in r:
            parsed = []
            for col, x in zip(header, row):
                if col in ("tick", "agent_id", "target_id", "slot"):
                    parsed.append(int(x))
                elif col == "phase":
                    parsed.append(x)
                else:
                    parsed.append(float(x))
            rows.append(parsed)
    return header, rows


def final_positions(header, rows) -> dict:
    """Last recorded (x, y, z) per agent."""
    ti, ai = header.index("tick"), header.index("agent_id")
    xi = header.index("x")
    out = {}
    for row in rows:
        if row[ai] not in out or row[ti] >= out[row[ai]][0]:
            out[row[ai]] = (row[ti], tuple(row[xi:xi + 3]))
    return {k: v[1] for k, v in out.items()}
