"""Tendon tension propagation and joint moment aggregation.

Tension changes across each way point by the Capstan factor
``exp(gamma * mu * theta)``, where ``theta`` is the wrap angle there and
``gamma`` is -1 for a pulled tendon (tension decays distally) and +1 for a
released one. The net force a way point exerts on the robot is the vector
difference of outgoing and incoming tendon tensions; the terminal anchor
takes the full remaining pull.

Moments: every way point force acts on the rigid sub-chain distal to each
joint proximal to it, so joint ``j`` collects ``r x f`` from all way points
on links ``j..n`` with ``r`` measured from the centre of joint ``j``. The
alternative ``cumulative=False`` attributes each way point only to the joint
at the proximal end of its own link.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import RobotGeometry, as_joint_state

DEGENERATE_SEGMENT = 1e-12


@dataclass(frozen=True)
class FrictionParams:
    mu: float = 0.0
    gamma: int = -1

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise DomainError(f"friction coefficient must be finite and >= 0, got {self.mu}")
        if self.gamma not in (-1, 1):
            raise DomainError(f"gamma must be -1 or +1, got {self.gamma}")

    @property
    def exponent(self) -> float:
        return self.gamma * self.mu


@dataclass(frozen=True, eq=False)
class TendonPath:
    """One tendon at one state: way points, segment tensions, wrap angles."""

    world_waypoints: np.ndarray
    segment_tensions: np.ndarray
    wrap_angles: np.ndarray
    base_tension: float
    terminal_anchored: bool = True

    @property
    def unit_vectors(self) -> np.ndarray:
        seg = np.diff(self.world_waypoints, axis=0)
        return seg / np.linalg.norm(seg, axis=1)[:, None]


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    if nrm <= DEGENERATE_SEGMENT:
        raise DomainError(f"degenerate tendon segment at {what} (length {nrm:.3g})")
    return v / nrm


def wrap_angle(prev, cur, nxt) -> float:
    """Angle in ``[0, pi]`` between ``cur - prev`` and ``nxt - cur``."""
    p, c, n = (np.asarray(v, dtype=float) for v in (prev, cur, nxt))
    u = _unit(c - p, "incoming segment")
    v = _unit(n - c, "outgoing segment")
    # atan2 keeps full precision near 0 and pi, unlike arccos of the dot product
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), u @ v))


def propagate_tension(world_waypoints, friction: FrictionParams, base_tension: float = 1.0,
                      terminal_anchored: bool = True) -> TendonPath:
    w = np.asarray(world_waypoints, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 2:
        raise DomainError("tension propagation needs at least two 3-D way points")
    if not (np.isfinite(base_tension) and base_tension > 0):
        raise DomainError(f"base tension must be positive, got {base_tension}")
    theta = np.array([wrap_angle(w[k - 1], w[k], w[k + 1]) for k in range(1, w.shape[0] - 1)])
    if w.shape[0] == 2:
        _unit(w[1] - w[0], "segment 0")
    tensions = float(base_tension) * np.exp(np.concatenate([[0.0], np.cumsum(friction.exponent * theta)]))
    return TendonPath(w, tensions, theta, float(base_tension), bool(terminal_anchored))


def waypoint_net_force(path: TendonPath, index: int) -> np.ndarray:
    """Force exerted on the robot by the tendon at way point ``index``."""
    last = path.world_waypoints.shape[0] - 1
    if index == 0:
        raise DomainError("the base way point transmits its load to the actuator, not the robot")
    if not 0 < index <= last:
        raise DomainError(f"way point index {index} out of range (1..{last})")
    u = path.unit_vectors
    F = path.segment_tensions
    if index == last:
        if not path.terminal_anchored:
            return np.zeros(3)
        return -F[-1] * u[-1]
    return F[index] * u[index] - F[index - 1] * u[index - 1]


def _actuation_arrays(geom: RobotGeometry, actuated: Iterable[tuple[int, FrictionParams, float]]):
    base = np.zeros(geom.n_tendons)
    expo = np.zeros(geom.n_tendons)
    seen = set()
    for idx, fric, lam in actuated:
        idx = int(idx)
        if not 0 <= idx < geom.n_tendons:
            raise DomainError(f"tendon index {idx} out of range [0, {geom.n_tendons})")
        if idx in seen:
            raise DomainError(f"tendon {idx} listed twice")
        seen.add(idx)
        if not (np.isfinite(lam) and lam >= 0):
            raise DomainError(f"relative tension of tendon {idx} must be >= 0, got {lam}")
        base[idx] = lam
        expo[idx] = fric.exponent
    return base, expo


def joint_moments(geom: RobotGeometry, q, actuated: Sequence[tuple[int, FrictionParams, float]],
                  cumulative: bool = True) -> np.ndarray:
    """Joint moment vector ``m`` (length ``2n``) from the actuated tendons.

    ``actuated`` holds ``(tendon_index, friction, base_tension)`` triples.
    """
    qa = as_joint_state(geom, q)
    base, expo = _actuation_arrays(geom, actuated)
    try:
        m, _ = kernels.evaluate_model(qa, geom.link_lengths, geom.waypoint_array,
                                      geom.anchored_array, base, expo, cumulative)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    return m


def tendon_lengths(geom: RobotGeometry, q) -> np.ndarray:
    """Lengths of all tendons at state ``q``."""
    qa = as_joint_state(geom, q)
    zeros = np.zeros(geom.n_tendons)
    return kernels.evaluate_model(qa, geom.link_lengths, geom.waypoint_array,
                                  geom.anchored_array, zeros, zeros, True)[1]
