"""Discretized robot description and rigid-chain forward kinematics.

The robot is a chain of ``n`` rigid links joined by ideal universal joints.
Joint ``j`` rotates about the local x axis by ``alpha_j`` and then about the
resulting y axis by ``beta_j``; link ``j`` then extends ``link_lengths[j]``
along the new z axis. The joint state is ordered
``(alpha_1, beta_1, ..., alpha_n, beta_n)``. There is no roll degree of
freedom.

Frames:

* pose 0 is the base frame (identity); joint 1 sits at its origin.
* pose ``j`` is the frame at the distal end of link ``j``, which is also the
  centre of joint ``j + 1``.
* a tendon has ``2n + 1`` way points. Index 0 is expressed in the base frame,
  indices ``2j - 1`` and ``2j`` are expressed in the frame of link ``j``
  *before* its translation, i.e. relative to the centre of joint ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError

ORTHONORMAL_TOL = 1e-9
_LIMIT_SLACK = 1e-12


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(b: float) -> np.ndarray:
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector components must be finite")
    return v


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _frozen(self.rotation)
        t = _frozen(self.translation)
        if r.shape != (3, 3) or t.shape != (3,):
            raise DomainError("pose needs a 3x3 rotation and a 3-vector translation")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise DomainError("pose entries must be finite")
        resid = np.max(np.abs(r.T @ r - np.eye(3)))
        if resid > ORTHONORMAL_TOL or np.linalg.det(r) < 0:
            raise DomainError(f"rotation is not proper orthonormal (residual {resid:.3e})")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """Transform one point ``(3,)`` or a stack ``(k, 3)``."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """Return ``self * other`` (``other`` expressed in ``self``)."""
        return Pose(self.rotation @ other.rotation, self.apply(other.translation))

    @property
    def matrix(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.rotation
        h[:3, 3] = self.translation
        return h


@dataclass(frozen=True, eq=False)
class TendonRouting:
    """Way points of one tendon, each relative to its owning frame."""

    relative_waypoints: np.ndarray
    terminal_anchored: bool = True

    def __post_init__(self):
        w = _frozen(self.relative_waypoints)
        if w.ndim != 2 or w.shape[1] != 3:
            raise DomainError(f"way points must be a (k, 3) array, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("way points must be finite")
        object.__setattr__(self, "relative_waypoints", w)
        object.__setattr__(self, "terminal_anchored", bool(self.terminal_anchored))


@dataclass(frozen=True, eq=False)
class RobotGeometry:
    n: int
    link_lengths: np.ndarray
    joint_limit: float
    tendons: tuple[TendonRouting, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"joint count must be a positive integer, got {self.n!r}")
        n = int(self.n)
        object.__setattr__(self, "n", n)
        ell = _frozen(self.link_lengths)
        if ell.shape != (n,):
            raise DomainError(f"expected {n} link lengths, got shape {ell.shape}")
        if not np.all(np.isfinite(ell)) or np.any(ell <= 0):
            raise DomainError("link lengths must be finite and positive")
        object.__setattr__(self, "link_lengths", ell)
        lim = float(self.joint_limit)
        if not (0.0 < lim <= np.pi / 2):
            raise DomainError(f"joint limit must lie in (0, pi/2], got {lim}")
        object.__setattr__(self, "joint_limit", lim)
        tendons = tuple(self.tendons)
        if not tendons:
            raise DomainError("a robot needs at least one tendon")
        for i, t in enumerate(tendons):
            if not isinstance(t, TendonRouting):
                raise DomainError(f"tendon {i} is not a TendonRouting")
            if t.relative_waypoints.shape[0] != 2 * n + 1:
                raise DomainError(
                    f"tendon {i}: expected {2 * n + 1} way points, "
                    f"got {t.relative_waypoints.shape[0]}"
                )
        object.__setattr__(self, "tendons", tendons)

    @property
    def dof(self) -> int:
        return 2 * self.n

    @property
    def total_length(self) -> float:
        return float(np.sum(self.link_lengths))

    @property
    def n_tendons(self) -> int:
        return len(self.tendons)

    @cached_property
    def waypoint_array(self) -> np.ndarray:
        """Relative way points of all tendons stacked as ``(T, 2n+1, 3)``."""
        return _frozen(np.stack([t.relative_waypoints for t in self.tendons]))

    @cached_property
    def anchored_array(self) -> np.ndarray:
        return np.array([t.terminal_anchored for t in self.tendons], dtype=np.uint8)

    def with_tendons(self, tendons: Sequence[TendonRouting]) -> "RobotGeometry":
        return RobotGeometry(self.n, self.link_lengths, self.joint_limit, tuple(tendons))


def as_joint_state(geom: RobotGeometry, q, check_limits: bool = True) -> np.ndarray:
    """Validate ``q`` against ``geom`` and return it as a float array."""
    arr = np.asarray(q, dtype=float).reshape(-1)
    if arr.shape != (geom.dof,):
        raise DomainError(f"joint state must have length {geom.dof}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("joint state must be finite")
    if check_limits:
        over = np.abs(arr) - geom.joint_limit
        k = int(np.argmax(over))
        if over[k] > _LIMIT_SLACK * (1.0 + geom.joint_limit):
            raise DomainError(
                f"joint angle {k} = {arr[k]:.6g} exceeds the limit {geom.joint_limit:.6g}"
            )
    return arr


def joint_transform(alpha: float, beta: float, link_length: float) -> Pose:
    """Universal joint (x then y) followed by a link along the new z axis."""
    if abs(alpha) > np.pi / 2 + _LIMIT_SLACK or abs(beta) > np.pi / 2 + _LIMIT_SLACK:
        raise DomainError(f"joint angles must be within pi/2, got ({alpha}, {beta})")
    if not link_length > 0:
        raise DomainError(f"link length must be positive, got {link_length}")
    r = rot_x(alpha) @ rot_y(beta)
    return Pose(r, r[:, 2] * link_length)


def chain_frames(q: np.ndarray, link_lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotations ``(n+1, 3, 3)`` and origins ``(n+1, 3)`` of poses 0..n.

    No validation; callers pass checked arrays.
    """
    n = len(link_lengths)
    rots = np.empty((n + 1, 3, 3))
    orgs = np.zeros((n + 1, 3))
    rots[0] = np.eye(3)
    for j in range(n):
        rots[j + 1] = rots[j] @ rot_x(q[2 * j]) @ rot_y(q[2 * j + 1])
        orgs[j + 1] = orgs[j] + rots[j + 1][:, 2] * link_lengths[j]
    return rots, orgs


def forward_kinematics(geom: RobotGeometry, q) -> list[Pose]:
    """Poses of the base and of the distal end of every link (``n + 1`` items)."""
    qa = as_joint_state(geom, q)
    rots, orgs = chain_frames(qa, geom.link_lengths)
    return [Pose(r, o) for r, o in zip(rots, orgs)]


def frame_origins(geom: RobotGeometry, q) -> np.ndarray:
    """Origins of poses 0..n as an ``(n+1, 3)`` array (base first, tip last)."""
    qa = as_joint_state(geom, q)
    return chain_frames(qa, geom.link_lengths)[1]


def waypoints_world_from_frames(rel: np.ndarray, rots: np.ndarray, orgs: np.ndarray) -> np.ndarray:
    """Map relative way points ``(..., 2n+1, 3)`` into the base frame."""
    out = np.empty_like(rel)
    out[..., 0, :] = rel[..., 0, :]
    n = rots.shape[0] - 1
    for j in range(1, n + 1):
        sl = slice(2 * j - 1, 2 * j + 1)
        out[..., sl, :] = rel[..., sl, :] @ rots[j].T + orgs[j - 1]
    return out


def tendon_waypoints_world(geom: RobotGeometry, q, tendon_index: int) -> np.ndarray:
    """World-frame way points ``(2n+1, 3)`` of one tendon at state ``q``."""
    if not 0 <= int(tendon_index) < geom.n_tendons:
        raise DomainError(f"tendon index {tendon_index} out of range [0, {geom.n_tendons})")
    qa = as_joint_state(geom, q)
    rots, orgs = chain_frames(qa, geom.link_lengths)
    return waypoints_world_from_frames(geom.tendons[int(tendon_index)].relative_waypoints, rots, orgs)


def tendon_length(waypoints) -> float:
    """Polyline length through the way points."""
    w = np.asarray(waypoints, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 2:
        raise DomainError("tendon length needs at least two 3-D way points")
    return float(np.sum(np.linalg.norm(np.diff(w, axis=0), axis=1)))


def helical_routing(
    link_lengths: Sequence[float],
    radius: float,
    phase: float = 0.0,
    turns: float = 0.0,
    inset: float | None = None,
    terminal_anchored: bool = True,
) -> TendonRouting:
    """Tendon at a fixed radial offset winding ``turns`` times along the robot.

    ``turns = 0`` gives a parallel tendon at angle ``phase`` about the
    backbone. Grooves sit ``inset`` from each joint centre (default 15% of the
    shortest link); the base way point sits ``inset`` below joint 1.
    """
    ell = np.asarray(link_lengths, dtype=float)
    n = ell.size
    if radius <= 0:
        raise DomainError("routing radius must be positive")
    if inset is None:
        inset = 0.15 * float(ell.min())
    if not 0 < inset < 0.5 * ell.min():
        raise DomainError("inset must be positive and below half the shortest link")
    total = float(ell.sum())
    starts = np.concatenate([[0.0], np.cumsum(ell)[:-1]])

    def point(s, z):
        a = phase + 2.0 * np.pi * turns * s / total
        return [radius * np.cos(a), radius * np.sin(a), z]

    pts = [point(-inset, -inset)]
    for j in range(n):
        pts.append(point(starts[j] + inset, inset))
        pts.append(point(starts[j] + ell[j] - inset, ell[j] - inset))
    return TendonRouting(np.array(pts), terminal_anchored)
