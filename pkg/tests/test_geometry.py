import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from swarmlattice.geometry import (Cuboid, Ellipsoid, GeometryError, LatticeKind, LatticeSpec, Region, Sphere,
                                   Torus, CoveringGrid, covering_set, lattice_vertex, min_connectivity_ratio,
                                   nearest_vertex, neighbor_vertices, shape_contains, shape_from_dict,
                                   shape_to_dict, volumetric_quotient)

KINDS = list(LatticeKind)
FACES = {LatticeKind.TRUNCATED_OCTAHEDRON: 14, LatticeKind.CUBE: 6,
         LatticeKind.HEXAGONAL_PRISM: 8, LatticeKind.RHOMBIC_DODECAHEDRON: 12}


def brute_points(spec, centre, reach=4):
    """Every lattice point with index triple within ``reach`` of the nearest one to ``centre``."""
    frac = np.linalg.solve(spec.basis, np.asarray(centre) - spec.origin)
    base = np.floor(frac).astype(int)
    keys = np.array(list(itertools.product(range(-reach, reach + 1), repeat=3))) + base
    return spec.origin + keys @ spec.basis.T


def test_lattice_vertex_to_examples():
    spec = LatticeSpec("to", (0, 0, 0), math.sqrt(5) / 2)
    assert np.allclose(lattice_vertex(spec, 1, 0, 0), (2, 0, 0))
    assert np.allclose(lattice_vertex(spec, 0, 0, 1), (1, 1, 1))


def test_lattice_vertex_cube_example():
    spec = LatticeSpec("cube", (0, 0, 0), math.sqrt(3) / 2)
    assert np.allclose(lattice_vertex(spec, 1, 2, 3), (1, 2, 3))


def test_kind_aliases_and_unknown():
    assert LatticeKind.parse("TO") is LatticeKind.TRUNCATED_OCTAHEDRON
    assert LatticeKind.parse("rd") is LatticeKind.RHOMBIC_DODECAHEDRON
    with pytest.raises(GeometryError):
        LatticeKind.parse("hexagon")


def test_nonpositive_radius_rejected():
    with pytest.raises(GeometryError):
        LatticeSpec("to", (0, 0, 0), 0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_nearest_vertex_on_vertex(kind):
    spec = LatticeSpec(kind, (0.3, -0.2, 1.1), 1.3)
    v = lattice_vertex(spec, 2, -1, 3)
    assert np.allclose(nearest_vertex(spec, v), v)


@pytest.mark.parametrize("kind", KINDS)
def test_nearest_vertex_matches_brute_force(kind):
    spec = LatticeSpec(kind, (0.1, 0.2, 0.3), 1.0)
    rng = np.random.default_rng(7)
    for p in rng.uniform(-2.5, 2.5, size=(300, 3)):
        cand = brute_points(spec, p)
        d = np.linalg.norm(cand - p, axis=1)
        got = nearest_vertex(spec, p)
        assert np.linalg.norm(got - p) == pytest.approx(d.min(), abs=1e-9)


def test_nearest_vertex_tie_goes_to_lexicographic_minimum():
    spec = LatticeSpec("cube", (0, 0, 0), math.sqrt(3) / 2)  # unit spacing
    p = np.array([0.5, 0.0, 0.0])
    cand = brute_points(spec, p)
    d = np.linalg.norm(cand - p, axis=1)
    ties = cand[np.abs(d - d.min()) < 1e-9]
    expect = sorted(map(tuple, np.round(ties, 9)))[0]
    assert np.allclose(nearest_vertex(spec, p), expect)
    assert np.allclose(nearest_vertex(spec, (0.5, 0.5, 0.5)), (0, 0, 0))


@pytest.mark.parametrize("kind", KINDS)
def test_nearest_vertex_idempotent(kind):
    spec = LatticeSpec(kind, (0.0, 0.0, 0.0), 0.8)
    rng = np.random.default_rng(1)
    for p in rng.normal(size=(100, 3)) * 4:
        v = nearest_vertex(spec, p)
        assert np.allclose(nearest_vertex(spec, v), v)


@pytest.mark.parametrize("kind", KINDS)
def test_neighbor_counts(kind):
    spec = LatticeSpec(kind, (0, 0, 0), 1.0)
    assert len(neighbor_vertices(spec, (0, 0, 0))) == FACES[kind]


def test_to_neighbors_oracle():
    # face sharing via Voronoi relevance: midpoint strictly closer to the pair than to any other point
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    step = 4 / math.sqrt(5)
    pts = brute_points(spec, (0, 0, 0), reach=3)
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.5 * step + 1e-9]
    pts = pts[np.linalg.norm(pts, axis=1) > 1e-9]
    tree = cKDTree(brute_points(spec, (0, 0, 0), reach=5))
    oracle = set()
    for w in pts:
        mid = w / 2
        near = tree.query_ball_point(mid, np.linalg.norm(mid) + 1e-9)
        if len(near) == 2:
            oracle.add(tuple(np.round(w, 9)))
    got = {tuple(np.round(v, 9)) for v in neighbor_vertices(spec, (0, 0, 0))}
    assert got == oracle
    dists = sorted({round(float(np.linalg.norm(v)), 9) for v in neighbor_vertices(spec, (0, 0, 0))})
    assert dists == pytest.approx([2 * math.sqrt(3) / math.sqrt(5), step])


def test_cube_neighbors_axis_aligned():
    spec = LatticeSpec("cube", (0, 0, 0), 1.0)
    nb = np.array(neighbor_vertices(spec, (0, 0, 0)))
    a = 2 / math.sqrt(3)
    expect = {tuple(s * a * e) for e in np.eye(3) for s in (1, -1)}
    assert {tuple(np.round(v, 12)) for v in nb} == {tuple(np.round(v, 12)) for v in expect}


@pytest.mark.parametrize("kind", KINDS)
def test_neighbor_symmetry(kind):
    spec = LatticeSpec(kind, (0.2, 0.1, -0.3), 1.0)
    rng = np.random.default_rng(3)
    for key in rng.integers(-5, 6, size=(100, 3)):
        v = lattice_vertex(spec, *key)
        for w in neighbor_vertices(spec, v):
            back = neighbor_vertices(spec, w)
            assert any(np.allclose(v, b) for b in back)


def test_neighbor_of_non_vertex_rejected():
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    with pytest.raises(GeometryError):
        neighbor_vertices(spec, (0.3, 0.0, 0.0))


def test_covering_set_small_region_is_seed():
    spec = LatticeSpec("to", (1, 2, 3), 1.0)
    pts = covering_set(spec, Region.cube(0.2, center=(1, 2, 3)))
    assert np.allclose(pts, [[1, 2, 3]])


def test_covering_set_degenerate_region():
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    with pytest.raises(GeometryError):
        covering_set(spec, Region((0, 0, 0), (1, 0, 1)))


@pytest.mark.parametrize("kind", KINDS)
def test_covering_set_matches_enumeration(kind):
    spec = LatticeSpec(kind, (0.25, -0.1, 0.4), 1.0)
    region = Region((-3, -2, -2.5), (3.5, 2.7, 2.2))
    got = {tuple(np.round(p, 9)) for p in covering_set(spec, region)}
    cand = brute_points(spec, region.center, reach=8)
    expect = {tuple(np.round(p, 9)) for p in cand if region.contains(p)}
    assert got == expect


def test_covering_boundary_is_inclusive():
    spec = LatticeSpec("cube", (0, 0, 0), math.sqrt(3) / 2)
    pts = covering_set(spec, Region((0, 0, 0), (2, 2, 2)))
    assert len(pts) == 27


@pytest.mark.parametrize("kind", KINDS)
def test_coverage_completeness_samples(kind):
    # the inner region, shrunk by one cell, lies within r_s of some covering vertex
    spec = LatticeSpec(kind, (0.0, 0.0, 0.0), 1.0)
    region = Region.cube(8.0)
    tree = cKDTree(covering_set(spec, region))
    rng = np.random.default_rng(11)
    inner = Region.cube(8.0 - 2 * 2.0)
    d, _ = tree.query(inner.sample(rng, 100_000))
    assert np.all(d <= 1.0 + 1e-9)


def test_vertex_count_ordering():
    counts = {k: len(covering_set(LatticeSpec(k, (0, 0, 0), 1.0), Region.cube(10.0))) for k in KINDS}
    to, cube = counts[LatticeKind.TRUNCATED_OCTAHEDRON], counts[LatticeKind.CUBE]
    hexp, rd = counts[LatticeKind.HEXAGONAL_PRISM], counts[LatticeKind.RHOMBIC_DODECAHEDRON]
    assert to < min(hexp, rd) and max(hexp, rd) < cube


def test_volumetric_quotient_closed_forms():
    assert volumetric_quotient("cube") == pytest.approx(2 / (math.sqrt(3) * math.pi))
    assert volumetric_quotient("to") == pytest.approx(0.6833, abs=1e-4)
    vq = {k: volumetric_quotient(k) for k in KINDS}
    assert vq[LatticeKind.TRUNCATED_OCTAHEDRON] > vq[LatticeKind.HEXAGONAL_PRISM] > vq[LatticeKind.CUBE]
    assert vq[LatticeKind.TRUNCATED_OCTAHEDRON] > vq[LatticeKind.RHOMBIC_DODECAHEDRON] > vq[LatticeKind.CUBE]


@pytest.mark.parametrize("kind", KINDS)
def test_volumetric_quotient_from_basis(kind):
    # lattice cell volume over circumsphere volume, circumradius fixed by the covering radius
    spec = LatticeSpec(kind, (0, 0, 0), 1.0)
    cell = abs(np.linalg.det(spec.basis))
    assert volumetric_quotient(kind) == pytest.approx(cell / (4 * math.pi / 3), rel=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_covering_radius_is_r_s(kind):
    # the farthest point from the lattice (a deep hole) sits exactly r_s away
    spec = LatticeSpec(kind, (0, 0, 0), 1.0)
    tree = cKDTree(brute_points(spec, (0, 0, 0), reach=4))
    frac = np.random.default_rng(5).random((50_000, 3))
    d, _ = tree.query(frac @ spec.basis.T)
    assert d.max() <= 1.0 + 1e-9
    assert d.max() > 0.97


def test_connectivity_ratio_values():
    assert min_connectivity_ratio("to") == pytest.approx(4 / math.sqrt(5), abs=1e-12)
    for kind in KINDS:
        spec = LatticeSpec(kind, (0, 0, 0), 1.0)
        spacing = max(np.linalg.norm(v) for v in neighbor_vertices(spec, (0, 0, 0)))
        assert min_connectivity_ratio(kind) == pytest.approx(spacing)
    assert min_connectivity_ratio("cube") == pytest.approx(2 / math.sqrt(3))


@pytest.mark.parametrize("r_s", [0.5, 1.0, 7.0])
def test_connectivity_ratio_scale_invariant(r_s):
    spec = LatticeSpec("to", (0, 0, 0), r_s)
    spacing = max(np.linalg.norm(v) for v in neighbor_vertices(spec, (0, 0, 0)))
    assert spacing / r_s == pytest.approx(min_connectivity_ratio("to"))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(KINDS), st.tuples(*[st.integers(-20, 20)] * 3),
       st.tuples(*[st.floats(-50, 50)] * 3))
def test_translation_equivariance(kind, key, t):
    spec = LatticeSpec(kind, (0.5, -1.0, 2.0), 1.7)
    moved = spec.translated(t)
    assert np.allclose(lattice_vertex(moved, *key), lattice_vertex(spec, *key) + np.array(t))


def test_shape_examples():
    assert shape_contains(Sphere(2.0), (0, 0, 0))
    assert not shape_contains(Ellipsoid(1, 2, 3), (1, 0, 0))
    assert shape_contains(Torus(1, 3), (3, 0, 0))
    assert not shape_contains(Torus(1, 3), (0, 0, 0))
    assert not shape_contains(Cuboid((0, 0, 0), (1, 1, 1)), (1, 0.5, 0.5))
    assert shape_contains(Cuboid((0, 0, 0), (1, 1, 1)), (0.5, 0.5, 0.5))


def test_shape_invariants():
    with pytest.raises(GeometryError):
        Sphere(0.0)
    with pytest.raises(GeometryError):
        Cuboid((0, 0, 0), (1, -1, 1))
    with pytest.raises(GeometryError):
        Torus(-1, 2)


def test_shape_dict_round_trip():
    for shape in (Sphere(2.0, (1, 2, 3)), Cuboid((0, 0, 0), (1, 2, 3)), Torus(1, 3), Ellipsoid(1, 2, 3)):
        assert shape_from_dict(shape_to_dict(shape)) == shape
    with pytest.raises(GeometryError):
        shape_from_dict({"kind": "cone"})


def test_covering_grid_mask_and_neighbors():
    spec = LatticeSpec("to", (0, 0, 0), 1.0)
    region = Region.cube(8.0)
    shape = Sphere(3.0)
    grid = CoveringGrid(spec, region, shape.contains)
    expect = [p for p in covering_set(spec, region) if shape_contains(shape, p)]
    assert len(grid) == len(expect)
    for row, nb in enumerate(grid.neighbors):
        for j in nb:
            assert row in grid.neighbors[j]
    assert np.array_equal(grid.locate(grid.points), np.arange(len(grid)))
