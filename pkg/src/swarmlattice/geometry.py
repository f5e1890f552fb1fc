"""Space-filling lattices, nearest-vertex queries, covering sets and shape predicates.

Every lattice is stored as a seed point plus a 3x3 basis whose columns are the
primitive translation vectors, so a vertex is ``seed + basis @ (a1, a2, a3)``.
The basis is scaled so that the circumsphere of each Voronoi cell has radius
``r_s``; occupying every vertex of a region therefore covers it with sensing
spheres.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Relative tolerance used for vertex-on-lattice checks, ties and region boundaries.
TOL = 1e-9


class GeometryError(ValueError):
    pass


class LatticeKind(str, enum.Enum):
    TRUNCATED_OCTAHEDRON = "truncated_octahedron"
    CUBE = "cube"
    HEXAGONAL_PRISM = "hexagonal_prism"
    RHOMBIC_DODECAHEDRON = "rhombic_dodecahedron"

    @classmethod
    def parse(cls, value: "str | LatticeKind") -> "LatticeKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"to": "truncated_octahedron", "bcc": "truncated_octahedron",
                   "hex": "hexagonal_prism", "hexprism": "hexagonal_prism",
                   "rd": "rhombic_dodecahedron", "rhdo": "rhombic_dodecahedron",
                   "fcc": "rhombic_dodecahedron"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise GeometryError(f"unknown lattice kind {value!r}") from None


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite 3-vector from three scalars or one length-3 sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite coordinate {v}")
    return v


@dataclass(frozen=True)
class Region:
    """Axis-aligned box; membership is closed (faces included)."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(c) for c in self.min_corner)
        hi = tuple(float(c) for c in self.max_corner)
        if not all(math.isfinite(c) for c in lo + hi):
            raise GeometryError("region corners must be finite")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @classmethod
    def cube(cls, side: float, center=(0.0, 0.0, 0.0)) -> "Region":
        c = np.asarray(center, dtype=float)
        return cls(tuple(c - side / 2), tuple(c + side / 2))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.min_corner)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.max_corner)

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def validate(self) -> None:
        if not np.all(self.lo < self.hi):
            raise GeometryError(
                f"degenerate region: min {self.min_corner} not below max {self.max_corner}")

    def contains(self, p, tol: float = TOL) -> np.ndarray | bool:
        """Closed membership test; accepts one point or an (m, 3) array."""
        p = np.asarray(p, dtype=float)
        slack = tol * max(1.0, float(np.max(np.abs(self.size))))
        inside = np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def sample(self, rng: np.random.Generator, m: int | None = None) -> np.ndarray:
        shape = (3,) if m is None else (m, 3)
        return self.lo + rng.random(shape) * self.size


@dataclass(frozen=True)
class LatticeSpec:
    kind: LatticeKind
    seed: tuple[float, float, float]
    r_s: float

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind.parse(self.kind))
        object.__setattr__(self, "seed", tuple(float(c) for c in vec3(self.seed)))
        if not (self.r_s > 0 and math.isfinite(self.r_s)):
            raise GeometryError(f"sensing radius must be positive, got {self.r_s}")

    @property
    def basis(self) -> np.ndarray:
        return unit_basis(self.kind) * self.r_s

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.seed)

    def with_seed(self, seed) -> "LatticeSpec":
        return LatticeSpec(self.kind, tuple(vec3(seed)), self.r_s)

    def translated(self, t) -> "LatticeSpec":
        return self.with_seed(self.origin + vec3(t))


@lru_cache(maxsize=None)
def _unit_basis(kind: LatticeKind) -> np.ndarray:
    if kind is LatticeKind.TRUNCATED_OCTAHEDRON:
        # body-centred cubic; unit step 2/sqrt(5)
        s = 2 / math.sqrt(5)
        b = s * np.array([[2.0, 0.0, 1.0], [0.0, 2.0, 1.0], [0.0, 0.0, 1.0]])
    elif kind is LatticeKind.CUBE:
        b = (2 / math.sqrt(3)) * np.eye(3)
    elif kind is LatticeKind.HEXAGONAL_PRISM:
        # prism of side sqrt(2/3), height 2/sqrt(3): circumradius 1, maximal volume
        d = math.sqrt(2.0)
        h = 2 / math.sqrt(3)
        b = np.array([[d, d / 2, 0.0], [0.0, d * math.sqrt(3) / 2, 0.0], [0.0, 0.0, h]])
    elif kind is LatticeKind.RHOMBIC_DODECAHEDRON:
        # face-centred cubic with conventional cube side 2
        b = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    else:  # pragma: no cover
        raise GeometryError(kind)
    b.setflags(write=False)
    return b


def unit_basis(kind) -> np.ndarray:
    """Primitive basis (columns) for ``r_s == 1``."""
    return _unit_basis(LatticeKind.parse(kind))


def lattice_vertex(spec: LatticeSpec, a1: int, a2: int, a3: int) -> np.ndarray:
    return spec.origin + spec.basis @ np.array([a1, a2, a3], dtype=float)


def vertex_key(spec: LatticeSpec, v) -> tuple[int, int, int]:
    """Integer index triple of a lattice vertex (rounded)."""
    frac = np.linalg.solve(spec.basis, vec3(v) - spec.origin)
    return tuple(int(k) for k in np.rint(frac))


def keys_to_points(spec: LatticeSpec, keys) -> np.ndarray:
    keys = np.asarray(keys, dtype=float).reshape(-1, 3)
    return spec.origin + keys @ spec.basis.T


_SEARCH_OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)


def _lexmin(points: np.ndarray) -> int:
    order = np.lexsort(points.T[::-1])
    return int(order[0])


def nearest_keys(spec: LatticeSpec, points) -> np.ndarray:
    """Index triples of the nearest vertices for an (m, 3) array of points.

    Ties within a relative tolerance go to the lexicographically smallest vertex.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    basis = spec.basis
    frac = np.linalg.solve(basis, (pts - spec.origin).T).T
    base = np.floor(frac)
    cand = base[:, None, :] + _SEARCH_OFFSETS[None, :, :]
    cand_pts = spec.origin + cand @ basis.T
    d2 = np.sum((cand_pts - pts[:, None, :]) ** 2, axis=-1)
    best = d2.min(axis=1)
    slack = TOL * spec.r_s * spec.r_s
    tied = d2 <= best[:, None] + slack
    pick = np.argmax(tied, axis=1)
    for i in np.flatnonzero(tied.sum(axis=1) > 1):
        ties = np.flatnonzero(tied[i])
        # round so float noise cannot decide the lexicographic order
        pick[i] = ties[_lexmin(np.round(cand_pts[i, ties] / spec.r_s, 9))]
    return cand[np.arange(len(pts)), pick].astype(np.int64)


def nearest_vertex(spec: LatticeSpec, p) -> np.ndarray:
    key = nearest_keys(spec, vec3(p)[None, :])[0]
    return keys_to_points(spec, key)[0]


def _voronoi_relevant(basis: np.ndarray) -> np.ndarray:
    """Lattice vectors whose cells share a face with the origin cell.

    A vector ``v`` qualifies when the midpoint ``v/2`` is strictly closer to 0 and
    ``v`` than to any other lattice point.
    """
    rng = range(-3, 4)
    keys = np.array([k for k in itertools.product(rng, repeat=3) if any(k)], dtype=float)
    vecs = keys @ basis.T
    allpts = np.vstack([np.zeros(3), vecs])
    out = []
    scale = float(np.max(np.linalg.norm(basis, axis=0)))
    for k, v in zip(keys, vecs):
        mid = v / 2
        d = np.linalg.norm(allpts - mid, axis=1)
        dmin = np.linalg.norm(mid)
        if np.sum(d <= dmin + 1e-9 * scale) == 2:
            out.append(k)
    return np.array(out, dtype=np.int64)


@lru_cache(maxsize=None)
def _neighbor_offsets(kind: LatticeKind) -> np.ndarray:
    offs = _voronoi_relevant(unit_basis(kind))
    offs.setflags(write=False)
    return offs


def neighbor_offsets(kind) -> np.ndarray:
    """Index-space offsets of face-adjacent cells (14, 6, 8 or 12 rows)."""
    return _neighbor_offsets(LatticeKind.parse(kind))


def neighbor_vertices(spec: LatticeSpec, v) -> list[np.ndarray]:
    v = vec3(v)
    snapped = nearest_vertex(spec, v)
    if np.linalg.norm(snapped - v) > 1e-6 * spec.r_s:
        raise GeometryError(f"{v} is not a vertex of the lattice")
    key = np.array(vertex_key(spec, snapped))
    return list(keys_to_points(spec, key + neighbor_offsets(spec.kind)))


def region_keys(spec: LatticeSpec, region: Region) -> np.ndarray:
    """Index triples of every lattice vertex inside the closed region."""
    region.validate()
    corners = np.array(list(itertools.product(*zip(region.lo, region.hi))))
    frac = np.linalg.solve(spec.basis, (corners - spec.origin).T).T
    lo = np.floor(frac.min(axis=0)).astype(int) - 1
    hi = np.ceil(frac.max(axis=0)).astype(int) + 1
    grids = np.meshgrid(*(np.arange(a, b + 1) for a, b in zip(lo, hi)), indexing="ij")
    keys = np.stack([g.ravel() for g in grids], axis=1)
    pts = keys_to_points(spec, keys)
    return keys[region.contains(pts)]


def covering_set(spec: LatticeSpec, region: Region) -> np.ndarray:
    """Lattice vertices inside ``region`` as an (m, 3) array, in index order."""
    return keys_to_points(spec, region_keys(spec, region))


class CoveringGrid:
    """Covering set of a region with face adjacency restricted to the set.

    Vertices are addressed by row index; ``keys`` holds their index triples.
    An optional ``mask`` predicate keeps only vertices it accepts.
    """

    def __init__(self, spec: LatticeSpec, region: Region, mask=None):
        keys = region_keys(spec, region)
        points = keys_to_points(spec, keys)
        if mask is not None:
            keep = np.asarray(mask(points), dtype=bool).reshape(-1)
            keys, points = keys[keep], points[keep]
        self.spec = spec
        self.region = region
        self.keys = keys
        self.points = points
        self.index = {tuple(k): i for i, k in enumerate(keys.tolist())}
        offs = neighbor_offsets(spec.kind)
        self.neighbors: list[np.ndarray] = []
        for k in keys:
            nb = [self.index.get(tuple(row)) for row in (k + offs).tolist()]
            self.neighbors.append(np.array([j for j in nb if j is not None], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.keys)

    def locate(self, points) -> np.ndarray:
        """Row index of the nearest lattice vertex, or -1 when it is outside the set."""
        keys = nearest_keys(self.spec, points)
        return np.array([self.index.get(tuple(k), -1) for k in keys.tolist()], dtype=np.int64)

    def nearest_member(self, points) -> np.ndarray:
        """Row index of the closest vertex of the set itself (ties by lowest row)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = np.sum((pts[:, None, :] - self.points[None, :, :]) ** 2, axis=-1)
        return np.argmin(d2, axis=1)


# closed forms of cell volume / circumsphere volume for unit circumradius
_SPHERE = 4 * math.pi / 3
_VQ = {
    LatticeKind.TRUNCATED_OCTAHEDRON: 8 * math.sqrt(2) * (2 / math.sqrt(10)) ** 3 / _SPHERE,
    LatticeKind.CUBE: (2 / math.sqrt(3)) ** 3 / _SPHERE,
    LatticeKind.HEXAGONAL_PRISM: 2.0 / _SPHERE,
    LatticeKind.RHOMBIC_DODECAHEDRON: 2.0 / _SPHERE,
}


def volumetric_quotient(kind) -> float:
    return _VQ[LatticeKind.parse(kind)]


def cell_volume(kind, r_s: float = 1.0) -> float:
    return abs(float(np.linalg.det(unit_basis(kind)))) * r_s ** 3


def min_connectivity_ratio(kind) -> float:
    """Smallest r_c / r_s keeping every face-adjacent pair within range."""
    k = LatticeKind.parse(kind)
    vecs = neighbor_offsets(k) @ unit_basis(k).T
    return float(np.max(np.linalg.norm(vecs, axis=1)))


# --- target shapes -----------------------------------------------------------

@dataclass(frozen=True)
class Sphere:
    r: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.r <= 0:
            raise GeometryError("sphere radius must be positive")

    def contains(self, p) -> np.ndarray:
        q = np.asarray(p, dtype=float) - np.asarray(self.center)
        return np.sum(q * q, axis=-1) < self.r ** 2


@dataclass(frozen=True)
class Cuboid:
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        if not all(a < b for a, b in zip(self.min_corner, self.max_corner)):
            raise GeometryError("cuboid bounds must be ordered")

    def contains(self, p) -> np.ndarray:
        q = np.asarray(p, dtype=float)
        return np.all((q > np.asarray(self.min_corner)) & (q < np.asarray(self.max_corner)), axis=-1)


@dataclass(frozen=True)
class Torus:
    """Solid torus about the z axis: tube radius ``a``, centre-line radius ``c``."""

    a: float
    c: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0:
            raise GeometryError("torus radii must be positive")

    def contains(self, p) -> np.ndarray:
        q = np.asarray(p, dtype=float) - np.asarray(self.center)
        ring = np.hypot(q[..., 0], q[..., 1]) - self.c
        return ring ** 2 + q[..., 2] ** 2 < self.a ** 2


@dataclass(frozen=True)
class Ellipsoid:
    a: float
    b: float
    c: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise GeometryError("ellipsoid semi-axes must be positive")

    def contains(self, p) -> np.ndarray:
        q = (np.asarray(p, dtype=float) - np.asarray(self.center)) / np.array([self.a, self.b, self.c])
        return np.sum(q * q, axis=-1) < 1.0


ShapePredicate = Sphere | Cuboid | Torus | Ellipsoid

SHAPES = {"sphere": Sphere, "cuboid": Cuboid, "torus": Torus, "ellipsoid": Ellipsoid}


def shape_contains(shape: ShapePredicate, p) -> bool | np.ndarray:
    out = shape.contains(p)
    return bool(out) if np.ndim(out) == 0 else out


def shape_from_dict(d: dict) -> ShapePredicate:
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = SHAPES[kind]
    except KeyError:
        raise GeometryError(f"unknown shape {kind!r}") from None
    for k in ("center", "min_corner", "max_corner"):
        if k in d:
            d[k] = tuple(float(c) for c in d[k])
    return cls(**d)


def shape_to_dict(shape: ShapePredicate) -> dict:
    name = {v: k for k, v in SHAPES.items()}[type(shape)]
    out = {"kind": name}
    for f in shape.__dataclass_fields__:
        val = getattr(shape, f)
        out[f] = list(val) if isinstance(val, tuple) else val
    return out
