"""Random search for static and moving targets on an agreed covering grid.

Four movement strategies share one tick loop:

``neighbor-grid``
    hop to a random unvisited face neighbour, or to any neighbour when all of
    them have been visited;
``levy-grid``
    Lévy-distributed flight in a uniform direction, snapped to the closest
    covering vertex;
``grid-normal-length``
    as ``levy-grid`` with a half-normal flight length;
``levy-continuous``
    Lévy flight without the grid.

Agents gossip their visited maps to radio neighbours every tick.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coverage import CONSENSUS_BUDGET, agree_on_grid
from .geometry import (CoveringGrid, GeometryError, LatticeKind, Region, min_connectivity_ratio,
                       vec3)
from .network import build_graph
from .rng import agent_streams, stream

log = logging.getLogger(__name__)

STRATEGIES = ("neighbor-grid", "levy-grid", "levy-continuous", "grid-normal-length")
STOP_RULES = ("all-targets", "all-visited")
REJECTION_BUDGET = 1_000


class SearchError(RuntimeError):
    """A proposal loop ran out of draws; the region or parameters are malformed."""


@dataclass
class VisitedMap:
    """Per-agent visited flags over the rows of a covering grid."""

    flags: np.ndarray

    @classmethod
    def empty(cls, grid: CoveringGrid) -> "VisitedMap":
        return cls(np.zeros(len(grid), dtype=bool))

    def mark(self, row: int) -> None:
        self.flags[row] = True

    def __contains__(self, row) -> bool:
        return bool(self.flags[int(row)])

    def keys(self, grid: CoveringGrid) -> set:
        return {tuple(grid.keys[r].tolist()) for r in np.flatnonzero(self.flags)}


@dataclass
class TargetState:
    id: int
    position: np.ndarray
    detected: bool = False
    mobile: bool = False
    step_scale: float = 0.0

    def __post_init__(self):
        self.position = vec3(self.position)
        if self.step_scale < 0:
            raise ValueError("step_scale must be non-negative")


@dataclass(frozen=True)
class LevyParams:
    alpha: float = 2.0
    l_min: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.alpha < 3.0:
            raise ValueError(f"alpha must lie in (1, 3), got {self.alpha}")
        if not self.l_min > 0:
            raise ValueError(f"l_min must be positive, got {self.l_min}")


def detect(agent_p, targets, r_s: float) -> list[int]:
    """Latch and return ids of undetected targets within closed distance ``r_s``."""
    if not r_s > 0:
        raise ValueError("sensing radius must be positive")
    p = vec3(agent_p)
    hits = []
    for t in targets:
        if not t.detected and np.linalg.norm(t.position - p) <= r_s:
            t.detected = True
            hits.append(t.id)
    return hits


def grid_search_step(grid: CoveringGrid, row: int, visited: VisitedMap, rng: np.random.Generator) -> int:
    """Next covering-grid row for a neighbour-random searcher; marks it visited."""
    nbrs = grid.neighbors[row]
    if len(nbrs) == 0:
        return row
    fresh = nbrs[~visited.flags[nbrs]]
    pool = fresh if len(fresh) else nbrs
    nxt = int(pool[rng.integers(len(pool))])
    visited.mark(nxt)
    return nxt


def stop_all_visited(maps, grid: CoveringGrid) -> bool:
    union = np.zeros(len(grid), dtype=bool)
    for m in maps:
        union |= m.flags if isinstance(m, VisitedMap) else np.asarray(m, dtype=bool)
    return bool(union.all())


def stop_all_targets_found(targets) -> bool:
    return all(t.detected for t in targets)


def levy_sample_length(params: LevyParams, rng: np.random.Generator) -> float:
    # 1 - U lies in (0, 1], so the sample never drops below l_min
    u = 1.0 - rng.random()
    return params.l_min * u ** (-1.0 / (params.alpha - 1.0))


def unit_direction(rng: np.random.Generator) -> np.ndarray:
    """Direction uniform by area on the unit sphere."""
    while True:
        d = rng.normal(size=3)
        n = np.linalg.norm(d)
        if n > 1e-12:
            return d / n


def _flight(p, region: Region, draw_length, rng) -> np.ndarray:
    p = vec3(p)
    for _ in range(REJECTION_BUDGET):
        q = p + draw_length(rng) * unit_direction(rng)
        if region.contains(q):
            return q
    raise SearchError(f"no in-region flight after {REJECTION_BUDGET} draws")


def levy_continuous_step(p, region: Region, params: LevyParams, rng) -> np.ndarray:
    return _flight(p, region, lambda g: levy_sample_length(params, g), rng)


def levy_grid_step(grid: CoveringGrid, row: int, params: LevyParams, rng, draw_length=None) -> int:
    """Flight from vertex ``row`` snapped to the closest covering vertex."""
    if draw_length is None:
        draw_length = lambda g: levy_sample_length(params, g)  # noqa: E731
    q = _flight(grid.points[row], grid.region, draw_length, rng)
    return int(grid.nearest_member(q[None, :])[0])


def half_normal_length(sigma: float):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return lambda g: abs(g.normal(0.0, sigma))


def moving_target_step(t: TargetState, region: Region, rng) -> TargetState:
    """Random heading and normal step length; redrawn until the target stays inside."""
    if not t.mobile:
        raise ValueError(f"target {t.id} is static")
    for _ in range(REJECTION_BUDGET):
        theta, psi = rng.uniform(0.0, 2.0 * math.pi, size=2)
        lam = rng.normal(0.0, t.step_scale)
        step = lam * np.array([math.cos(theta) * math.cos(psi),
                               math.cos(theta) * math.sin(psi),
                               math.sin(theta)])
        q = t.position + step
        if region.contains(q):
            return TargetState(t.id, q, t.detected, t.mobile, t.step_scale)
    raise SearchError(f"target {t.id} could not stay inside the region")


@dataclass
class SearchScenario:
    kind: str = "to"
    region: Region = field(default_factory=lambda: Region.cube(10.0))
    n_agents: int = 4
    n_targets: int = 3
    r_s: float = 1.0
    seed: int = 0
    strategy: str = "levy-grid"
    stop: str = "all-targets"
    horizon: int = 10_000
    r_c: float = float("inf")
    alpha: float = 2.0
    l_min: float | None = None  # defaults to the longest neighbour spacing
    sigma: float | None = None  # grid-normal-length scale, defaults to 2 * l_min
    clustered: bool = True
    cluster_sigma: float = 1.0
    mobile_targets: bool = False
    target_step: float = 0.5
    grid_seed: tuple | None = None
    record: bool = True

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.stop not in STOP_RULES:
            raise ValueError(f"unknown stop rule {self.stop!r}; choose from {STOP_RULES}")
        if self.strategy == "levy-continuous" and self.stop == "all-visited":
            raise ValueError("off-grid searchers do not visit vertices; use the all-targets stop")
        if self.n_agents < 1 or self.n_targets < 0:
            raise ValueError("need at least one agent and a non-negative target count")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        self.region.validate()


@dataclass(frozen=True)
class DetectionEvent:
    tick: int
    agent: int
    target: int
    position: tuple


@dataclass
class SearchResult:
    steps: int
    stop_reason: str
    detections: list
    consensus_ticks: int
    grid: CoveringGrid
    visited: np.ndarray
    trajectory: list = field(default_factory=list, repr=False)
    target_trajectory: list = field(default_factory=list, repr=False)

    @property
    def found_all(self) -> bool:
        return self.stop_reason == "all-targets"


def place_targets(sc: SearchScenario, grid: CoveringGrid, rng) -> list[TargetState]:
    """Uniform or clustered targets, each within sensing reach of a covering vertex."""
    region = sc.region
    centre = region.sample(rng, 1)[0]
    out = []
    for tid in range(sc.n_targets):
        for _ in range(REJECTION_BUDGET):
            if sc.clustered:
                q = centre + rng.normal(0.0, sc.cluster_sigma, size=3)
            else:
                q = region.sample(rng, 1)[0]
            if not region.contains(q):
                continue
            nearest = grid.points[grid.nearest_member(q[None, :])[0]]
            if np.linalg.norm(nearest - q) <= sc.r_s:
                break
        else:
            raise SearchError("could not place a detectable target")
        out.append(TargetState(tid, q, False, sc.mobile_targets, sc.target_step))
    return out


def run_search(sc: SearchScenario) -> SearchResult:
    sc.validate()
    kind = LatticeKind.parse(sc.kind)
    n = sc.n_agents
    pos0 = sc.region.sample(stream(sc.seed, "deploy"), n)
    if sc.grid_seed is None:
        beliefs = pos0.copy()
    else:
        beliefs = np.tile(vec3(sc.grid_seed), (n, 1))
    spec, pos, ticks, ok = agree_on_grid(kind, sc.r_s, pos0, beliefs, sc.r_c,
                                         min(CONSENSUS_BUDGET, sc.horizon))
    grid = CoveringGrid(spec, sc.region)
    if len(grid) == 0:
        raise GeometryError("the region contains no covering vertex")
    rows = grid.locate(pos)
    off = rows < 0
    rows[off] = grid.nearest_member(pos[off])
    points = grid.points[rows].copy()

    l_min = min_connectivity_ratio(kind) * sc.r_s if sc.l_min is None else sc.l_min
    params = LevyParams(sc.alpha, l_min)
    sigma = 2.0 * l_min if sc.sigma is None else sc.sigma
    normal_len = half_normal_length(sigma)

    targets = place_targets(sc, grid, stream(sc.seed, "targets"))
    move_rngs = agent_streams(sc.seed, "search", n)
    target_rngs = agent_streams(sc.seed, "target-motion", len(targets))
    visited = np.zeros((n, len(grid)), dtype=bool)
    visited[np.arange(n), rows] = True
    detections: list[DetectionEvent] = []
    trajectory, target_traj = [], []

    def sense(tick: int) -> None:
        for i in range(n):
            for tid in detect(points[i], targets, sc.r_s):
                detections.append(DetectionEvent(tick, i, tid, tuple(points[i].tolist())))
                log.debug("tick %d: agent %d detected target %d", tick, i, tid)

    def snapshot(tick: int) -> None:
        if sc.record:
            trajectory.append((tick, points.copy()))
            target_traj.append((tick, np.array([t.position for t in targets]).reshape(-1, 3)))

    snapshot(0)
    sense(0)
    steps = 0
    reason = None
    if not ok:
        reason = "horizon"
    while reason is None:
        if sc.stop == "all-targets" and stop_all_targets_found(targets):
            reason = "all-targets"
            break
        if sc.stop == "all-visited" and visited.any(axis=0).all():
            reason = "all-visited"
            break
        if ticks + steps >= sc.horizon:
            reason = "horizon"
            break
        for i in range(n):
            g = move_rngs[i]
            if sc.strategy == "neighbor-grid":
                vm = VisitedMap(visited[i])
                rows[i] = grid_search_step(grid, int(rows[i]), vm, g)
            elif sc.strategy == "levy-grid":
                rows[i] = levy_grid_step(grid, int(rows[i]), params, g)
            elif sc.strategy == "grid-normal-length":
                rows[i] = levy_grid_step(grid, int(rows[i]), params, g, normal_len)
            else:
                points[i] = levy_continuous_step(points[i], sc.region, params, g)
                continue
            points[i] = grid.points[rows[i]]
        if sc.strategy != "levy-continuous":
            visited[np.arange(n), rows] = True
        for k, t in enumerate(targets):
            if t.mobile:
                targets[k] = moving_target_step(t, sc.region, target_rngs[k])
        steps += 1
        sense(steps)
        # gossip: union of visited maps with radio neighbours, tick-K values
        adj = build_graph(points, sc.r_c).adjacency if math.isfinite(sc.r_c) else None
        if adj is not None:
            visited = visited | ((adj.astype(np.int32) @ visited.astype(np.int32)) > 0)
        else:
            visited[:] = visited.any(axis=0)
        snapshot(steps)
    return SearchResult(steps, reason, detections, ticks, grid, visited, trajectory, target_traj)

