import numpy as np
import pytest

from swarmlattice.consensus import (ConsensusState, consensus_spread, consensus_step,
                                    formation_center_consensus_step, snap_to_grid)
from swarmlattice.geometry import LatticeSpec, lattice_vertex
from swarmlattice.network import CommGraph, build_graph, is_connected, union_graph


def state_x(x):
    x = np.asarray(x, dtype=float)
    z = np.zeros_like(x)
    return ConsensusState(x, z, z, z, z, z)


def random_connected(rng, n):
    while True:
        g = build_graph(rng.uniform(0, 5, size=(n, 3)), 2.5)
        if is_connected(g):
            return g


def test_two_agents_average():
    out = consensus_step(state_x([0, 2]), CommGraph.from_edges(2, [(0, 1)]))
    assert np.allclose(out.x, [1, 1])


def test_path_hand_evaluation():
    out = consensus_step(state_x([0, 3, 6]), CommGraph.from_edges(3, [(0, 1), (1, 2)]))
    assert np.allclose(out.x, [1.5, 3, 4.5])


def test_isolated_agent_unchanged():
    s = ConsensusState([1.0], [2.0], [3.0], [0.4], [0.5], [6.0])
    out = consensus_step(s, CommGraph.from_edges(1, []))
    assert out.agent(0) == s.agent(0)


def test_spread_examples():
    assert consensus_spread(state_x([1, 1, 1])) == 0
    assert consensus_spread(state_x([0, 2])) == 2


def test_mismatched_sizes_rejected():
    with pytest.raises(ValueError):
        consensus_step(state_x([0, 1]), CommGraph.from_edges(3, []))
    with pytest.raises(ValueError):
        ConsensusState([0, 1], [0], [0], [0], [0], [0])


def test_spread_strictly_decreases_on_connected_graphs():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        g = random_connected(rng, n)
        s = ConsensusState(*(rng.normal(size=n) for _ in range(6)))
        before = consensus_spread(s)
        assert consensus_spread(consensus_step(s, g)) < before


def test_converges_within_bound():
    rng = np.random.default_rng(1)
    for n in (5, 20, 50):
        g = random_connected(rng, n) if n < 50 else CommGraph.from_edges(
            n, [(i, i + 1) for i in range(n - 1)] + [(i, i + 2) for i in range(n - 2)]
            + [(i, j) for i in range(n) for j in range(i + 1, n) if (j - i) % 7 == 0])
        s = ConsensusState(*(rng.normal(size=n) for _ in range(6)))
        for k in range(200):
            prev = consensus_spread(s)
            s = consensus_step(s, g)
            assert consensus_spread(s) <= prev + 1e-15
            if consensus_spread(s) < 1e-6:
                break
        assert consensus_spread(s) < 1e-6


def test_complete_graph_preserves_mean():
    rng = np.random.default_rng(2)
    n = 7
    g = CommGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    s = ConsensusState(*(rng.normal(size=n) for _ in range(6)))
    out = consensus_step(s, g)
    for name in ("x", "y", "z", "theta", "psi", "v"):
        assert getattr(out, name).mean() == pytest.approx(getattr(s, name).mean())


def test_switching_union_connected_schedules():
    rng = np.random.default_rng(3)
    n = 6
    for _ in range(20):
        s = ConsensusState(*(rng.normal(size=n) for _ in range(6)))
        perm = rng.permutation(n)
        ring = [(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)]
        # each tick carries a single ring edge; every window of n ticks is union-connected
        graphs = [CommGraph.from_edges(n, [e]) for e in ring]
        assert is_connected(union_graph(graphs))
        for k in range(3000):
            s = consensus_step(s, graphs[k % n])
        assert consensus_spread(s) < 1e-6


def test_angles_stay_in_range():
    rng = np.random.default_rng(4)
    g = random_connected(rng, 10)
    s = ConsensusState(*(rng.uniform(0, np.pi, 10) for _ in range(6)))
    for _ in range(50):
        s = consensus_step(s, g)
        assert np.all((s.theta >= 0) & (s.theta < np.pi))
        assert np.all((s.psi >= 0) & (s.psi < np.pi))


def test_formation_center_stationary_converges():
    rng = np.random.default_rng(5)
    n = 5
    pos = rng.normal(size=(n, 3)) * 3
    g = CommGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    s = ConsensusState.from_seeds(rng.normal(size=(n, 3)))
    for _ in range(500):
        s = formation_center_consensus_step(s, pos, pos, g)
    total = pos + s.seeds
    assert np.ptp(total, axis=0).max() < 1e-6


def test_formation_center_single_agent():
    s = ConsensusState.from_seeds([[0.5, 0.5, 0.5]])
    p0, p1 = np.array([[1.0, 2.0, 3.0]]), np.array([[1.5, 1.0, 3.25]])
    out = formation_center_consensus_step(s, p0, p1, CommGraph.from_edges(1, []))
    assert np.allclose(out.seeds - s.seeds, -(p1 - p0))


def test_formation_center_pair_preserves_sum():
    s = ConsensusState.from_seeds([[1.0, -2.0, 0.5], [0.0, 3.0, -1.0]])
    p0 = np.array([[0.0, 0.0, 0.0], [4.0, 1.0, 2.0]])
    p1 = p0 + np.array([[0.3, 0.1, 0.0], [-0.2, 0.4, 0.1]])
    out = formation_center_consensus_step(s, p0, p1, CommGraph.from_edges(2, [(0, 1)]))
    assert np.allclose((p1 + out.seeds).sum(axis=0), (p0 + s.seeds).sum(axis=0))


def test_snap_on_own_lattice_is_identity():
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    belief = (0.3, -0.4, 1.2)
    p = lattice_vertex(spec.with_seed(belief), 2, -1, 3)
    assert np.allclose(snap_to_grid(spec, {"x": 0.3, "y": -0.4, "z": 1.2}, p), p)


def test_snap_after_consensus_shares_a_lattice():
    rng = np.random.default_rng(6)
    n = 4
    g = CommGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    s = ConsensusState.from_seeds(rng.normal(size=(n, 3)))
    s = consensus_step(s, g)
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    v = [snap_to_grid(spec, s.agent(i), rng.normal(size=3) * 5) for i in range(n)]
    for i in range(1, n):
        frac = np.linalg.solve(spec.basis, v[i] - v[0])
        assert np.allclose(frac, np.rint(frac), atol=1e-9)


def test_snap_periodic_in_seed():
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    p = np.array([0.7, -1.3, 2.2])
    shift = spec.basis[:, 0]
    a = snap_to_grid(spec, (0.1, 0.2, 0.3), p)
    b = snap_to_grid(spec, tuple(np.array([0.1, 0.2, 0.3]) + shift), p)
    assert np.allclose(a, b)
