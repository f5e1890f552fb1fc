"""Neighbour-averaging consensus and the snap-to-agreed-lattice rule.

States are stored column-wise: one ``ConsensusState`` holds the variables of the
whole swarm as length-n arrays, which keeps the synchronous update a pair of
matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .geometry import LatticeSpec, nearest_vertex
from .network import CommGraph

# Spread below which agents treat the consensus variables as agreed.
CONVERGED = 1e-6

PLAIN_FIELDS = ("x", "y", "z", "theta", "psi", "v")


@dataclass(frozen=True)
class ConsensusState:
    """Per-agent consensus variables, one array entry per agent.

    ``x, y, z`` are grid-seed coordinates (coverage/search) or the centre
    corrections (formation); ``theta, psi`` are heading angles in radians;
    ``v`` is the speed variable.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = None
        for f in fields(self):
            arr = np.array(getattr(self, f.name), dtype=float).reshape(-1)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise ValueError("all consensus variables need one entry per agent")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite consensus variable {f.name}")
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)

    @classmethod
    def from_seeds(cls, seeds, theta=None, psi=None, v=None) -> "ConsensusState":
        s = np.asarray(seeds, dtype=float).reshape(-1, 3)
        zeros = np.zeros(len(s))
        return cls(s[:, 0], s[:, 1], s[:, 2],
                   zeros if theta is None else theta,
                   zeros if psi is None else psi,
                   zeros if v is None else v)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def seeds(self) -> np.ndarray:
        return np.stack([self.x, self.y, self.z], axis=1)

    def agent(self, i: int) -> dict:
        return {f.name: float(getattr(self, f.name)[i]) for f in fields(self)}


def _averaging_matrix(g: CommGraph) -> np.ndarray:
    w = np.asarray(g.adjacency, dtype=float) + np.eye(g.n)
    return w / w.sum(axis=1, keepdims=True)


def consensus_step(states: ConsensusState, g: CommGraph) -> ConsensusState:
    if states.n != g.n:
        raise ValueError(f"{states.n} states for a graph of {g.n} agents")
    w = _averaging_matrix(g)
    return ConsensusState(**{name: w @ getattr(states, name) for name in PLAIN_FIELDS})


def consensus_spread(states: ConsensusState, names=PLAIN_FIELDS) -> float:
    if states.n == 0:
        raise ValueError("empty swarm")
    return float(max(np.ptp(getattr(states, name)) for name in names))


def formation_center_consensus_step(states: ConsensusState, positions, next_positions,
                                    g: CommGraph) -> ConsensusState:
    """Centre corrections track the averaged ``position + correction`` sums.

    ``x~_i(k+1) = mean_{i and N_i}(x + x~)(k) - x_i(k+1)`` and likewise for y, z;
    heading and speed variables are plain-averaged.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    nxt = np.asarray(next_positions, dtype=float).reshape(-1, 3)
    if not (len(pos) == len(nxt) == states.n == g.n):
        raise ValueError("states, positions and graph must be aligned")
    w = _averaging_matrix(g)
    centre = w @ (pos + states.seeds) - nxt
    return ConsensusState(centre[:, 0], centre[:, 1], centre[:, 2],
                          w @ states.theta, w @ states.psi, w @ states.v)


def snap_to_grid(spec: LatticeSpec, state, p) -> np.ndarray:
    """Nearest vertex of the lattice seeded at the agent's current belief.

    ``state`` is either a mapping/object with x, y, z or a 3-sequence.
    """
    if isinstance(state, dict):
        seed = (state["x"], state["y"], state["z"])
    elif hasattr(state, "x"):
        seed = (float(np.asarray(state.x).reshape(-1)[0]), float(np.asarray(state.y).reshape(-1)[0]),
                float(np.asarray(state.z).reshape(-1)[0]))
    else:
        seed = tuple(np.asarray(state, dtype=float).reshape(3))
    return nearest_vertex(replace(spec, seed=seed), p)
