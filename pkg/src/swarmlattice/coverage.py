"""Random-spread coverage of an agreed lattice and three-stage shape formation.

A run has two phases. First every agent averages its grid-seed belief with its
neighbours and snaps to the nearest vertex of the lattice it currently believes
in, until the beliefs agree. Then agents hop at random onto unoccupied
face-adjacent vertices of the covering set until every vertex is occupied.
Shape formation inserts a middle stage that moves every agent onto the closest
vertex inside the shape and restricts the spread to those vertices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .consensus import CONVERGED, ConsensusState, consensus_spread, consensus_step
from .geometry import (CoveringGrid, GeometryError, LatticeKind, LatticeSpec, Region,
                       ShapePredicate, nearest_keys)
from .network import build_graph
from .rng import agent_streams, stream

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 10_000
CONSENSUS_BUDGET = 1_000
CONFLICT_RULES = ("lowest-index", "random")


@dataclass
class OccupancyView:
    """Vertex row -> lowest-index agent sitting there, as seen at ``tick``."""

    occupied: dict[int, int]
    tick: int = 0

    @classmethod
    def of(cls, vertex_of_agent, tick: int = 0) -> "OccupancyView":
        occ: dict[int, int] = {}
        for i, v in enumerate(np.asarray(vertex_of_agent).tolist()):
            if v >= 0:
                occ.setdefault(v, i)
        return cls(occ, tick)


@dataclass
class CoverageRun:
    spec: LatticeSpec
    region: Region
    grid: CoveringGrid
    vertex: np.ndarray  # covering-grid row per agent
    rng_seed: int
    r_c: float = float("inf")
    oracle_occupancy: bool = True
    steps_taken: int = 0
    consensus_ticks: int = 0
    tick: int = 0
    complete: bool = False
    stop_reason: str | None = None
    rngs: list = field(default_factory=list, repr=False)
    trajectory: list = field(default_factory=list, repr=False)
    coverage_series: list = field(default_factory=list, repr=False)
    conflict: str = "random"
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertex = np.asarray(self.vertex, dtype=np.int64)
        if self.conflict not in CONFLICT_RULES:
            raise ValueError(f"unknown conflict rule {self.conflict!r}")
        if not self.rngs:
            self.rngs = agent_streams(self.rng_seed, "spread", len(self.vertex))
        self.conflict_rng = stream(self.rng_seed, "spread-conflict")

    @property
    def agent_positions(self) -> np.ndarray:
        return self.grid.points[self.vertex]

    @property
    def n_agents(self) -> int:
        return len(self.vertex)

    def occupancy(self) -> OccupancyView:
        return OccupancyView.of(self.vertex, self.tick)

    def coverage_fraction(self) -> float:
        return len(set(self.vertex.tolist())) / len(self.grid)

    def record(self, phase: str) -> None:
        self.trajectory.append((self.tick, phase, self.agent_positions.copy()))
        self.coverage_series.append((self.tick, self.coverage_fraction()))


def _neighbor_table(run: CoverageRun) -> tuple[np.ndarray, np.ndarray]:
    """Padded (m, max_degree) neighbour rows (-1 pad) and a mask of those the agent can sense."""
    if run._table is None:
        grid = run.grid
        deg = max((len(nb) for nb in grid.neighbors), default=0)
        table = np.full((len(grid), max(deg, 1)), -1, dtype=np.int64)
        for v, nb in enumerate(grid.neighbors):
            table[v, :len(nb)] = nb
        valid = table >= 0
        if not run.oracle_occupancy:
            # holders sit exactly on their vertex, so a vertex is sensed iff its edge fits in r_c
            d = np.linalg.norm(grid.points[np.where(valid, table, 0)] - grid.points[:, None, :], axis=-1)
            sensed = valid & (d <= run.r_c)
        else:
            sensed = valid
        run._table = (table, valid, sensed)
    return run._table


def spread_step(run: CoverageRun, occupancy: OccupancyView | None = None) -> CoverageRun:
    """Every agent jumps uniformly within {own vertex} + unoccupied neighbours.

    Moves are simultaneous against the pre-move snapshot; when several agents
    pick the same vacant vertex the conflict rule picks one and the rest stay.
    """
    table, valid, sensed = _neighbor_table(run)
    occ = np.zeros(len(run.grid), dtype=bool)
    if occupancy is None:
        occ[run.vertex] = True
    else:
        occ[list(occupancy.occupied)] = True
    nb = table[run.vertex]
    # unsensed vertices look vacant; a move onto a hidden holder is refused below
    free = valid[run.vertex] & ~(occ[np.where(nb >= 0, nb, 0)] & sensed[run.vertex])
    nfree = free.sum(axis=1)
    u = np.array([g.random() for g in run.rngs])
    k = np.minimum((u * (nfree + 1)).astype(np.int64), nfree)
    movers = np.flatnonzero(k > 0)
    new = run.vertex.copy()
    if len(movers):
        # k-th free slot of each mover's row
        rank = np.cumsum(free[movers], axis=1)
        col = np.argmax(rank == k[movers, None], axis=1)
        dest = nb[movers, col]
        ok = ~occ[dest]
        movers, dest = movers[ok], dest[ok]
        if run.conflict == "random":
            order = np.argsort(run.conflict_rng.random(len(movers)), kind="stable")
        else:
            order = np.arange(len(movers))
        _, first = np.unique(dest[order], return_index=True)
        win = order[first]
        new[movers[win]] = dest[win]
    run.vertex = new
    run.steps_taken += 1
    run.tick += 1
    return run


def is_coverage_complete(run: CoverageRun, occupancy: OccupancyView | None = None) -> bool:
    if occupancy is None:
        occupancy = run.occupancy()
    return len(occupancy.occupied) == len(run.grid)


def snap_points(kind, r_s: float, seeds, points) -> np.ndarray:
    """Snap each point to the nearest vertex of the lattice seeded at its own belief."""
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 3)
    origin = LatticeSpec(kind, (0.0, 0.0, 0.0), r_s)
    keys = nearest_keys(origin, np.asarray(points, dtype=float) - seeds)
    return seeds + keys @ origin.basis.T


def agree_on_grid(kind, r_s: float, positions: np.ndarray, beliefs: np.ndarray, r_c: float,
                  budget: int = CONSENSUS_BUDGET, on_tick=None):
    """Consensus on the grid seed with snapping every tick.

    Returns ``(agreed_spec, positions, ticks, converged)``; positions are the
    agents' vertices on their own final beliefs.
    """
    kind = LatticeKind.parse(kind)
    pos = np.asarray(positions, dtype=float).copy()
    state = ConsensusState.from_seeds(beliefs)
    ticks = 0
    converged = consensus_spread(state, ("x", "y", "z")) < CONVERGED
    while not converged and ticks < budget:
        g = build_graph(pos, r_c)
        nxt = consensus_step(state, g)
        # snap with the tick-K belief, as the seed update and the move are simultaneous
        pos = snap_points(kind, r_s, state.seeds, pos)
        state = nxt
        ticks += 1
        converged = consensus_spread(state, ("x", "y", "z")) < CONVERGED
        if on_tick is not None:
            on_tick(ticks, pos)
    seed = state.seeds.mean(axis=0)
    spec = LatticeSpec(kind, tuple(seed), r_s)
    # beliefs agree to CONVERGED, so index triples transfer to the mean seed exactly
    origin = LatticeSpec(kind, (0.0, 0.0, 0.0), r_s)
    keys = nearest_keys(origin, pos - state.seeds)
    pos = spec.origin + keys @ spec.basis.T
    return spec, pos, ticks, converged


def run_coverage(kind, region: Region, n_agents: int, r_s: float, seed: int, *,
                 r_c: float | None = None, horizon: int = DEFAULT_HORIZON,
                 shape: ShapePredicate | None = None, oracle_occupancy: bool = True,
                 initial_positions=None, grid_seed=None, record: bool = True,
                 conflict: str = "random") -> CoverageRun:
    """Deploy ``n_agents`` at random in ``region`` and run until absorption or horizon.

    ``horizon`` bounds the total tick count (consensus plus spread). With a
    ``shape`` only covering vertices inside it are targeted. ``grid_seed`` gives
    every agent the same initial belief, which makes the covering set known in
    advance; otherwise each agent starts from a grid grown at its own position.
    """
    kind = LatticeKind.parse(kind)
    region.validate()
    if r_c is None:
        r_c = float("inf")
    if initial_positions is None:
        pos0 = region.sample(stream(seed, "deploy"), n_agents)
    else:
        pos0 = np.asarray(initial_positions, dtype=float).reshape(n_agents, 3)
    if grid_seed is None:
        beliefs = pos0.copy()
    else:
        beliefs = np.tile(np.asarray(grid_seed, dtype=float).reshape(1, 3), (n_agents, 1))

    trajectory = []
    if record:
        trajectory.append((0, "deploy", pos0.copy()))

    def on_tick(t, pos):
        if record:
            trajectory.append((t, "consensus", pos.copy()))

    budget = min(CONSENSUS_BUDGET, horizon)
    spec, pos, ticks, ok = agree_on_grid(kind, r_s, pos0, beliefs, r_c, budget, on_tick)
    mask = None if shape is None else shape.contains
    grid = CoveringGrid(spec, region, mask)
    if len(grid) == 0:
        raise GeometryError("no covering vertex lies inside the requested shape")

    # stage two: everyone walks to the closest admissible vertex
    vertex = grid.locate(pos)
    outside = vertex < 0
    if np.any(outside):
        vertex[outside] = grid.nearest_member(pos[outside])
    run = CoverageRun(spec, region, grid, vertex, seed, r_c=r_c,
                      oracle_occupancy=oracle_occupancy, consensus_ticks=ticks, tick=ticks,
                      conflict=conflict)
    run.trajectory = trajectory
    if np.any(outside):
        run.tick += 1
    if record:
        run.record("settle")

    if not ok:
        run.stop_reason = "horizon"
        return run
    while True:
        if is_coverage_complete(run):
            run.complete = True
            run.stop_reason = "complete"
            break
        if run.tick >= horizon:
            run.stop_reason = "horizon"
            break
        spread_step(run)
        if record:
            run.record("spread")
    return run


def run_shape_formation(kind, region: Region, shape: ShapePredicate, n_agents: int, r_s: float,
                        seed: int, **kw) -> CoverageRun:
    return run_coverage(kind, region, n_agents, r_s, seed, shape=shape, **kw)
