"""Consensus-based 3D formation building for nonholonomic robots.

Each robot moves along its unit centreline ``c`` at speed ``v`` and turns with
a control ``u`` orthogonal to ``c``. Robots agree on a formation centre,
heading and speed by neighbour averaging and chase a fictitious target placed
``c0`` ahead of their slot, which is expressed in a frame whose x axis points
along the agreed heading. With anonymous robots the slot index is renegotiated
every ``N`` ticks by random jumps to vacant adjacent slots.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import agent_streams, stream

log = logging.getLogger(__name__)

ALIGNED = 1e-9  # |d_u| below this fraction of |d| counts as already aligned


# ---------------------------------------------------------------- kinematics

def heading_vector(theta, psi) -> np.ndarray:
    """Unit centreline for pitch ``theta`` and yaw ``psi``."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return np.stack([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), -np.sin(theta)], axis=-1)


def frame_basis(theta, psi) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the centreline: ``A = dc/dtheta``, ``B = dc/dpsi``."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    a = np.stack([-np.sin(theta) * np.cos(psi), -np.sin(theta) * np.sin(psi), -np.cos(theta)], axis=-1)
    b = np.stack([-np.cos(theta) * np.sin(psi), np.cos(theta) * np.cos(psi), np.zeros_like(theta)], axis=-1)
    return a, b


def angles_of(c) -> tuple[np.ndarray, np.ndarray]:
    c = np.asarray(c, dtype=float)
    theta = -np.arcsin(np.clip(c[..., 2], -1.0, 1.0))
    psi = np.arctan2(c[..., 1], c[..., 0])
    return theta, psi


def frame_rotation(theta, psi) -> np.ndarray:
    """Rotation whose first column is ``heading_vector(theta, psi)``.

    Columns are the agreed heading, the horizontal left direction and the
    resulting up direction; zero angles give the identity.
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(psi), np.sin(psi)
    rot = np.empty(theta.shape + (3, 3))
    rot[..., 0, 0], rot[..., 1, 0], rot[..., 2, 0] = ct * cp, ct * sp, -st
    rot[..., 0, 1], rot[..., 1, 1], rot[..., 2, 1] = -sp, cp, 0.0
    rot[..., 0, 2], rot[..., 1, 2], rot[..., 2, 2] = st * cp, st * sp, ct
    return rot


@dataclass
class RobotState:
    xi: np.ndarray
    c: np.ndarray
    v: float

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(3)
        c = np.asarray(self.c, dtype=float).reshape(3)
        n = np.linalg.norm(c)
        if not n > 0:
            raise ValueError("centreline must be non-zero")
        self.c = c / n

    @classmethod
    def from_angles(cls, xi, theta: float, psi: float, v: float) -> "RobotState":
        return cls(xi, heading_vector(theta, psi), v)

    @property
    def theta(self) -> float:
        return float(angles_of(self.c)[0])

    @property
    def psi(self) -> float:
        return float(angles_of(self.c)[1])


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def control_vec(c: np.ndarray, d: np.ndarray, u_max: float) -> np.ndarray:
    """Row-wise switching control: full turn rate towards the part of ``d`` normal to ``c``."""
    c = np.atleast_2d(c)
    d = np.atleast_2d(d)
    # V = v c with v > 0, so projecting out V equals projecting out c
    du = d - _rowdot(d, c)[:, None] * c
    du -= _rowdot(du, c)[:, None] * c  # second pass removes rounding leftovers
    nu = np.sqrt(_rowdot(du, du))
    nd = np.sqrt(_rowdot(d, d))
    turn = nu > ALIGNED * nd
    u = np.zeros_like(d)
    u[turn] = u_max * du[turn] / nu[turn, None]
    u -= _rowdot(u, c)[:, None] * c
    return u


def control(robot: RobotState, target, u_max: float) -> np.ndarray:
    if not robot.v > 0:
        raise ValueError("speed must be positive")
    d = np.asarray(target, dtype=float).reshape(1, 3) - robot.xi
    return control_vec(robot.c, d, u_max)[0]


def speed_rule(x: float, h: float, v_bounds: tuple[float, float]) -> float:
    v_min, v_max = v_bounds
    return v_max if x <= h else v_min


def angular_rates(u, theta, psi) -> tuple[float, float]:
    """Pitch and yaw rates as projections of ``u`` on ``A`` and ``B``."""
    a, b = frame_basis(theta, psi)
    u = np.asarray(u, dtype=float)
    return float(np.dot(u, a)), float(np.dot(u, b))


def integrate_step(robot: RobotState, u, v: float, ts: float) -> RobotState:
    if not ts > 0:
        raise ValueError("sampling time must be positive")
    u = np.asarray(u, dtype=float).reshape(3)
    return RobotState(robot.xi + ts * v * robot.c, robot.c + ts * u, v)


def fictitious_target(robot: RobotState, consensus: dict, offset, t: float, c0: float) -> np.ndarray:
    """Pursuit point of one robot.

    ``consensus`` holds the robot's ``x, y, z`` centre corrections and its
    ``theta, psi, v`` agreed heading and speed.
    """
    tgt, _ = _targets(robot.xi[None, :],
                      np.array([[consensus["x"], consensus["y"], consensus["z"]]], dtype=float),
                      frame_rotation(np.array([consensus.get("theta", 0.0)]),
                                     np.array([consensus.get("psi", 0.0)])),
                      np.array([consensus["v"]], dtype=float),
                      np.asarray(offset, dtype=float).reshape(1, 3), t, c0)
    return tgt[0]


def _targets(xi, tilde, rot, v_tilde, offsets, t, c0):
    """World-frame targets and the behind-slot mask for all robots at once."""
    p = np.einsum("nji,nj->ni", rot, xi)      # R^T xi
    s = np.einsum("nji,nj->ni", rot, tilde)   # R^T xi~
    h = p[:, 0] + s[:, 0] + offsets[:, 0] + t * v_tilde
    behind = p[:, 0] <= h
    local = np.empty_like(p)
    local[:, 0] = np.where(behind, h, p[:, 0]) + c0
    local[:, 1] = p[:, 1] + s[:, 1] + offsets[:, 1]
    local[:, 2] = p[:, 2] + s[:, 2] + offsets[:, 2]
    return np.einsum("nij,nj->ni", rot, local), behind


# ---------------------------------------------------------------- configuration

@dataclass
class FormationConfig:
    offsets: np.ndarray
    edges: tuple = ()
    c0: float = 10.0
    v_bounds: tuple = (2.0, 8.0)
    u_max: float = 2.0
    N: int = 10
    lambda_vac: float = 20.0
    Ts: float = 0.01
    r_c: float = 100.0

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 3)
        self.edges = tuple(sorted({(min(a, b), max(a, b)) for a, b in self.edges}))

    @property
    def n_slots(self) -> int:
        return len(self.offsets)

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n_slots)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(x) for x in adj]

    def validate(self, anonymous: bool = False) -> None:
        v_min, v_max = self.v_bounds
        if not 0 < v_min < v_max:
            raise ValueError(f"need 0 < V_min < V_max, got {self.v_bounds}")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if not self.c0 > 2 * v_max / self.u_max:
            raise ValueError(f"c0 = {self.c0} must exceed 2 V_max / u_max = {2 * v_max / self.u_max}")
        if not self.Ts > 0:
            raise ValueError("Ts must be positive")
        if not self.r_c > 0:
            raise ValueError("r_c must be positive")
        if not 0 < self.lambda_vac < self.r_c / 2:
            raise ValueError(f"lambda_vac must lie in (0, r_c/2), got {self.lambda_vac}")
        if self.N <= 1:
            raise ValueError("N must be an integer above 1")
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n_slots and 0 <= b < self.n_slots):
                raise ValueError(f"bad configuration edge ({a}, {b})")
        if anonymous and self.n_slots > 1 and not _graph_connected(self.adjacency()):
            raise ValueError("configuration graph must be connected")


def _graph_connected(adj) -> bool:
    seen = {0}
    todo = [0]
    while todo:
        u = todo.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(adj)


# ---------------------------------------------------------------- anonymous slots

@dataclass
class PermutationState:
    assignment: np.ndarray
    epoch: int = 0

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64).copy()

    @property
    def distinct(self) -> bool:
        return len(set(self.assignment.tolist())) == len(self.assignment)


def vacancy_test(robot_positions, point, lambda_vac: float) -> bool:
    """True iff no robot lies inside the closed ``lambda_vac`` sphere at ``point``."""
    pos = np.asarray(robot_positions, dtype=float).reshape(-1, 3)
    if len(pos) == 0:
        return True
    return bool(np.min(np.linalg.norm(pos - np.asarray(point, dtype=float).reshape(3), axis=1)) > lambda_vac)


def slot_points(xi, tilde, rot, v_tilde, offsets, t) -> np.ndarray:
    """``(n_robots, n_slots, 3)`` world positions of every slot as seen by every robot."""
    p = np.einsum("nji,nj->ni", rot, xi) + np.einsum("nji,nj->ni", rot, tilde)
    local = p[:, None, :] + offsets[None, :, :]
    local[:, :, 0] += (t * v_tilde)[:, None]
    return np.einsum("nij,nkj->nki", rot, local)


def permutation_step(perm: PermutationState, positions, points, config: FormationConfig,
                     rngs) -> PermutationState:
    """One epoch of random slot renegotiation.

    ``points[i, j]`` is slot ``j`` as robot ``i`` sees it. A robot whose own
    slot has another robot within ``lambda_vac`` jumps uniformly among its
    slot and the vacant slots adjacent to it; all robots decide on the same
    snapshot.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    adj = config.adjacency()
    new = perm.assignment.copy()
    n = len(pos)
    for i in range(n):
        mine = int(perm.assignment[i])
        others = np.delete(pos, i, axis=0)
        crowded = not vacancy_test(others, points[i, mine], config.lambda_vac)
        if not crowded:
            continue
        support = [mine] + [j for j in adj[mine] if vacancy_test(pos, points[i, j], config.lambda_vac)]
        if len(support) > 1:
            new[i] = support[int(rngs[i].integers(len(support)))]
    return PermutationState(new, perm.epoch + 1)


# ---------------------------------------------------------------- simulation

@dataclass
class FormationScenario:
    config: FormationConfig
    seed: int = 0
    duration_s: float = 200.0
    anonymous: bool = False
    spawn_side: float = 50.0
    record_every: int = 10
    name: str = "formation"

    @property
    def n_robots(self) -> int:
        return self.config.n_slots


@dataclass
class FormationResult:
    times: np.ndarray
    ey: np.ndarray  # max pairwise |ey| per tick
    ez: np.ndarray
    u_norm_max: float
    v_range: tuple
    u_dot_c_max: float
    c_norm_dev_max: float
    qr_bound_ok: bool
    assignments: list  # (tick, assignment) after every epoch
    absorbed_epoch: int | None
    final_xi: np.ndarray
    final_c: np.ndarray
    trajectory: list = field(default_factory=list, repr=False)

    def converged(self, ratio: float = 0.1) -> bool:
        peak_y, peak_z = float(self.ey.max()), float(self.ez.max())
        ok_y = peak_y == 0 or self.ey[-1] < ratio * peak_y
        ok_z = peak_z == 0 or self.ez[-1] < ratio * peak_z
        return bool(ok_y and ok_z)


def _pitch_yaw_rates(u, c):
    """``u`` projected on ``A`` and ``B`` written straight from ``c``, plus ``cos(theta)``."""
    ct = np.hypot(c[:, 0], c[:, 1])
    vertical = ct == 0  # psi reads as 0 there, so A = (c_z, 0, 0)
    q = c[:, 2] * (u[:, 0] * c[:, 0] + u[:, 1] * c[:, 1]) / np.where(vertical, 1.0, ct) - u[:, 2] * ct
    q = np.where(vertical, u[:, 0] * c[:, 2], q)
    r = u[:, 1] * c[:, 0] - u[:, 0] * c[:, 1]
    return q, r, ct


def _averaging(xi, r_c):
    diff = xi[:, None, :] - xi[None, :, :]
    w = (np.einsum("ijk,ijk->ij", diff, diff) <= r_c * r_c).astype(float)
    return w / w.sum(axis=1, keepdims=True)


def _pair_errors(xi, offsets, theta, psi):
    """Spread of lateral and vertical slot deviations in the mean heading frame."""
    ct, st, cp, sp = math.cos(theta), math.sin(theta), math.cos(psi), math.sin(psi)
    dy = xi @ np.array([-sp, cp, 0.0]) - offsets[:, 1]
    dz = xi @ np.array([st * cp, st * sp, ct]) - offsets[:, 2]
    return float(dy.max() - dy.min()), float(dz.max() - dz.min())


def run_formation(sc: FormationScenario) -> FormationResult:
    cfg = sc.config
    cfg.validate(sc.anonymous)
    n = sc.n_robots
    v_min, v_max = cfg.v_bounds
    rng = stream(sc.seed, "formation-init")
    xi = rng.uniform(-sc.spawn_side / 2, sc.spawn_side / 2, size=(n, 3))
    c = heading_vector(rng.uniform(0, math.pi, n), rng.uniform(0, math.pi, n))
    tilde = np.zeros((n, 3))
    th_t = rng.uniform(0, math.pi, n)
    ps_t = rng.uniform(0, math.pi, n)
    v_t = rng.uniform(v_min, v_max, n)

    if sc.anonymous:
        perm = PermutationState(stream(sc.seed, "slot-guess").integers(cfg.n_slots, size=n))
        perm_rngs = agent_streams(sc.seed, "permutation", n)
    else:
        perm = PermutationState(np.arange(n))
        perm_rngs = []
    assignments = [(0, perm.assignment.copy())]

    ticks = int(round(sc.duration_s / cfg.Ts))
    times = np.arange(ticks + 1) * cfg.Ts
    ey = np.zeros(ticks + 1)
    ez = np.zeros(ticks + 1)
    # per-tick inputs, checked against the constraints after the loop
    u_hist = np.empty((ticks + 1, n, 3))
    c_hist = np.empty((ticks + 1, n, 3))
    v_hist = np.empty((ticks + 1, n))
    trajectory = []
    absorbed = None

    for k in range(ticks + 1):
        t = k * cfg.Ts
        offs = cfg.offsets[perm.assignment]
        theta_bar, psi_bar = float(th_t.sum()) / n, float(ps_t.sum()) / n
        ey[k], ez[k] = _pair_errors(xi, offs, theta_bar, psi_bar)
        rot = frame_rotation(th_t, ps_t)

        if sc.anonymous and k % cfg.N == 0 and k > 0:
            pts = slot_points(xi, tilde, rot, v_t, cfg.offsets, t)
            perm = permutation_step(perm, xi, pts, cfg, perm_rngs)
            assignments.append((k, perm.assignment.copy()))
            if absorbed is None and perm.distinct:
                own = pts[np.arange(n), perm.assignment]
                if np.all(np.linalg.norm(own - xi, axis=1) <= cfg.lambda_vac):
                    absorbed = perm.epoch
            offs = cfg.offsets[perm.assignment]

        target, behind = _targets(xi, tilde, rot, v_t, offs, t, cfg.c0)
        v = np.where(behind, v_max, v_min)
        u = control_vec(c, target - xi, cfg.u_max)

        u_hist[k], c_hist[k], v_hist[k] = u, c, v
        if sc.record_every and k % sc.record_every == 0:
            th, ps = angles_of(c)
            q, r, _ = _pitch_yaw_rates(u, c)
            trajectory.append((k, xi.copy(), th, ps, v.copy(), np.sqrt(_rowdot(u, u)), q, r,
                               perm.assignment.copy()))
        if k == ticks:
            break

        w = _averaging(xi, cfg.r_c)
        xi_next = xi + cfg.Ts * v[:, None] * c
        c_next = c + cfg.Ts * u
        c_next /= np.sqrt(_rowdot(c_next, c_next))[:, None]
        tilde = w @ (xi + tilde) - xi_next
        th_t, ps_t, v_t = w @ th_t, w @ ps_t, w @ v_t
        xi, c = xi_next, c_next

    u_flat, c_flat = u_hist.reshape(-1, 3), c_hist.reshape(-1, 3)
    q, r, ct = _pitch_yaw_rates(u_flat, c_flat)
    qr_ok = bool((np.abs(q) <= cfg.u_max + 1e-9).all() and (np.abs(r) <= cfg.u_max * ct + 1e-9).all())
    return FormationResult(times, ey, ez,
                           u_norm_max=float(np.sqrt(_rowdot(u_flat, u_flat)).max()),
                           v_range=(float(v_hist.min()), float(v_hist.max())),
                           u_dot_c_max=float(np.abs(_rowdot(u_flat, c_flat)).max()),
                           c_norm_dev_max=float(np.abs(np.sqrt(_rowdot(c_flat, c_flat)) - 1.0).max()),
                           qr_bound_ok=qr_ok, assignments=assignments, absorbed_epoch=absorbed,
                           final_xi=xi, final_c=c, trajectory=trajectory)


# ---------------------------------------------------------------- presets

def tetrahedron_config(edge: float = 40.0, **kw) -> FormationConfig:
    """Regular tetrahedron centred on the origin, every pair adjacent."""
    base = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    offsets = base * edge / (2 * math.sqrt(2))
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    return FormationConfig(offsets, tuple(edges), **kw)


def octahedron_config(radius: float = 30.0, complete: bool = False, **kw) -> FormationConfig:
    """Six slots on the coordinate axes.

    By default opposite slots are not adjacent in the configuration graph;
    ``complete=True`` links every pair.
    """
    offsets = np.array([[radius, 0, 0], [-radius, 0, 0], [0, radius, 0],
                        [0, -radius, 0], [0, 0, radius], [0, 0, -radius]], dtype=float)
    edges = [(i, j) for i in range(6) for j in range(i + 1, 6)
             if complete or j != i + 1 or i % 2 == 1]
    return FormationConfig(offsets, tuple(edges), **kw)


FORMATION_PRESETS = {
    "tetrahedron": lambda: FormationScenario(tetrahedron_config(), name="tetrahedron"),
    "six-robot": lambda: FormationScenario(octahedron_config(), name="six-robot"),
    "anonymous-six": lambda: FormationScenario(octahedron_config(complete=True), anonymous=True,
                                               duration_s=40.0, name="anonymous-six"),
}
