"""Helical shapes and rolling-gait tendon sequences.

A helix is described by its cylinder radius ``R`` and pitch angle ``psi``,
the angle between the helix tangent and the helix axis: ``psi -> 0`` is a
straight line and ``psi = pi/2`` a planar circle of radius ``R``. Curvature
and torsion are ``sin(psi)**2 / R`` and ``sin(psi) cos(psi) / R`` (negative
torsion for left-handed helices).

Target shapes are polygons inscribed in the helix whose sides equal the link
lengths. The helix is anchored by its Frenet frame at a virtual point half a
side before the base: tangent along base ``z``, normal along
``(cos(phase), sin(phase), 0)``. With this anchoring a planar circle gives
every joint the same bend ``2 asin(l / 2R)``, joint 1 included.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .errors import DomainError
from .geometry import RobotGeometry, as_joint_state, rot_x, rot_y
from .mechanics import tendon_lengths
from .nlp import NlpConfig, NlpProblem, minimize
from .statics import ActuationCommand

HANDEDNESS = ("right", "left")


@dataclass(frozen=True)
class HelixSpec:
    radius: float
    pitch_angle: float
    handedness: str = "right"
    phase: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"helix radius must be positive, got {self.radius}")
        if not 0.0 <= self.pitch_angle <= np.pi / 2:
            raise DomainError(f"pitch angle must lie in [0, pi/2], got {self.pitch_angle}")
        if self.handedness not in HANDEDNESS:
            raise DomainError(f"handedness must be one of {HANDEDNESS}")
        if not np.isfinite(self.phase):
            raise DomainError("phase must be finite")

    @property
    def curvature(self) -> float:
        if np.isinf(self.radius):
            return 0.0
        return float(np.sin(self.pitch_angle) ** 2 / self.radius)

    @property
    def torsion(self) -> float:
        if np.isinf(self.radius):
            return 0.0
        sign = 1.0 if self.handedness == "right" else -1.0
        return float(sign * np.sin(self.pitch_angle) * np.cos(self.pitch_angle) / self.radius)

    def with_phase(self, phase: float) -> "HelixSpec":
        return HelixSpec(self.radius, self.pitch_angle, self.handedness, phase)


def _frame(phase: float):
    t0 = np.array([0.0, 0.0, 1.0])
    n0 = np.array([np.cos(phase), np.sin(phase), 0.0])
    return t0, n0, np.cross(t0, n0)


def helix_curve(spec: HelixSpec, s) -> np.ndarray:
    """Points ``(k, 3)`` at arc lengths ``s`` from the anchoring point."""
    s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
    k, t = spec.curvature, spec.torsion
    t0, n0, b0 = _frame(spec.phase)
    if k == 0.0:
        return s * t0
    w2 = k * k + t * t
    w = np.sqrt(w2)
    ws = w * s
    return (t0 * (t * t * s / w2 + k * k * np.sin(ws) / w ** 3)
            + n0 * (k * (1.0 - np.cos(ws)) / w2)
            + b0 * (k * t * (s / w2 - np.sin(ws) / w ** 3)))


def helix_axis(spec: HelixSpec) -> tuple[np.ndarray, np.ndarray]:
    """A point on the helix axis and its unit direction, in curve coordinates."""
    k, t = spec.curvature, spec.torsion
    t0, n0, b0 = _frame(spec.phase)
    if k == 0.0:
        return np.zeros(3), t0
    w2 = k * k + t * t
    direction = (t * t0 + k * b0) / np.sqrt(w2)
    return n0 * (k / w2), direction


def helix_chord(spec: HelixSpec, ds) -> np.ndarray:
    """Straight-line distance between helix points ``ds`` apart in arc length."""
    ds = np.asarray(ds, dtype=float)
    k, t = spec.curvature, spec.torsion
    if k == 0.0:
        return np.abs(ds)
    w2 = k * k + t * t
    w = np.sqrt(w2)
    axial = t * ds / w
    across = 2.0 * (k / w2) * np.sin(0.5 * w * ds)
    return np.sqrt(axial * axial + across * across)


def _arc_for_chord(spec: HelixSpec, chord: float) -> float:
    k, t = spec.curvature, spec.torsion
    if k == 0.0:
        return chord
    w = np.sqrt(k * k + t * t)
    # chord is increasing in arc length up to half a turn of the projected circle
    hi = np.pi / w
    if helix_chord(spec, hi) < chord:
        raise DomainError(f"helix is too tight for a link of length {chord:.6g}")
    lo = chord
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if helix_chord(spec, mid) < chord:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)


def helix_targets(geom: RobotGeometry, spec: HelixSpec) -> np.ndarray:
    """Frame origins ``(n+1, 3)`` of the chain inscribed in the helix."""
    ds = np.array([_arc_for_chord(spec, float(l)) for l in geom.link_lengths])
    s = np.concatenate([[0.0], np.cumsum(ds)]) + 0.5 * ds[0]
    pts = helix_curve(spec, s)
    return pts - pts[0]


def max_bend_angle(joint_limit: float) -> float:
    """Largest bend a universal joint reaches (both axes at the limit)."""
    return float(np.arccos(np.cos(joint_limit) ** 2))


def check_realizable(geom: RobotGeometry, spec: HelixSpec) -> None:
    """Raise if some joint would need more bend than the joint limits allow."""
    k = spec.curvature
    if k == 0.0:
        return
    ell = geom.link_lengths
    # bend at joint j spans half of each adjacent link; joint 1 sees the virtual half link
    need = k * 0.5 * (np.concatenate([[ell[0]], ell[:-1]]) + ell)
    cap = max_bend_angle(geom.joint_limit)
    bad = np.flatnonzero(need > cap)
    if bad.size:
        j = int(bad[0])
        raise DomainError(
            f"helix curvature {k:.6g} 1/m needs a bend of {need[j]:.4g} rad at joint {j + 1}, "
            f"more than the {cap:.4g} rad its limits allow"
        )


def _origins_and_grad(q, ell, targets, scale):
    rots, orgs, axes = _kernels_py.chain(q, ell)
    e = orgs[1:] - targets[1:]
    f = float(np.sum(e * e)) * scale
    s = np.cumsum(np.cross(orgs[1:], e)[::-1], axis=0)[::-1]
    es = np.cumsum(e[::-1], axis=0)[::-1]
    lever = s - np.cross(orgs[:-1], es)
    g = np.empty(q.size)
    g[0::2] = np.einsum("ja,ja->j", axes[:, 0], lever)
    g[1::2] = np.einsum("ja,ja->j", axes[:, 1], lever)
    return f, 2.0 * scale * g, orgs


def _greedy_guess(geom: RobotGeometry, targets: np.ndarray) -> np.ndarray:
    """Aim each link at its target origin in turn, clipped to the limits."""
    n = geom.n
    q = np.zeros(2 * n)
    rot = np.eye(3)
    org = np.zeros(3)
    lim = geom.joint_limit
    for j in range(n):
        u = targets[j + 1] - org
        v = rot.T @ (u / np.linalg.norm(u))
        beta = float(np.clip(np.arcsin(np.clip(v[0], -1.0, 1.0)), -lim, lim))
        alpha = float(np.clip(np.arctan2(-v[1], v[2]), -lim, lim))
        q[2 * j], q[2 * j + 1] = alpha, beta
        rot = rot @ rot_x(alpha) @ rot_y(beta)
        org = org + rot[:, 2] * geom.link_lengths[j]
    return q


@dataclass
class HelixFit:
    q: np.ndarray
    rms: float
    targets: np.ndarray
    origins: np.ndarray
    converged: bool


def helix_joint_angles(geom: RobotGeometry, spec: HelixSpec,
                       nlp: NlpConfig | None = None) -> HelixFit:
    """Joint state whose frame origins best match the inscribed helix polygon."""
    check_realizable(geom, spec)
    targets = helix_targets(geom, spec)
    scale = 1.0 / geom.total_length ** 2
    ell = geom.link_lengths
    q0 = _greedy_guess(geom, targets)
    cache = {}

    def evaluate(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = _origins_and_grad(x, ell, targets, scale)
        return cache[key]

    problem = NlpProblem(
        objective=lambda x: evaluate(x)[0],
        gradient=lambda x: evaluate(x)[1],
        lower_bounds=np.full(geom.dof, -geom.joint_limit),
        upper_bounds=np.full(geom.dof, geom.joint_limit),
    )
    cfg = nlp or NlpConfig(kkt_tolerance=1e-14)
    sol = minimize(problem, q0, cfg)
    q = sol.x_star
    orgs = _kernels_py.chain(q, ell)[1]
    rms = float(np.sqrt(np.mean(np.sum((orgs - targets) ** 2, axis=1))))
    # an exact fit stalls the line search at the noise floor; that is success
    ok = sol.converged or sol.objective_value <= 1e-24
    return HelixFit(q, rms, targets, orgs, bool(ok))


def _axis_distance(geom: RobotGeometry, spec: HelixSpec, points) -> np.ndarray:
    """Distance of base-frame points from the axis of the anchored helix."""
    ds = _arc_for_chord(spec, float(geom.link_lengths[0]))
    anchor = helix_curve(spec, 0.5 * ds)[0]
    p_axis, d_axis = helix_axis(spec)
    rel = np.asarray(points, dtype=float) + anchor - p_axis
    radial = rel - np.outer(rel @ d_axis, d_axis)
    return np.linalg.norm(radial, axis=1)


def chain_curve_deviation(geom: RobotGeometry, spec: HelixSpec, q, samples: int = 8) -> float:
    """RMS distance from points along the links to the helix cylinder.

    Measures discretization error: the inscribed polygon touches the helix at
    its vertices and cuts inside the cylinder between them.
    """
    qa = as_joint_state(geom, q)
    orgs = _kernels_py.chain(qa, geom.link_lengths)[1]
    t = (np.arange(samples) + 0.5) / samples
    pts = orgs[:-1, None, :] * (1.0 - t)[None, :, None] + orgs[1:, None, :] * t[None, :, None]
    dist = _axis_distance(geom, spec, pts.reshape(-1, 3))
    k, tt = spec.curvature, spec.torsion
    radius = 0.0 if k == 0.0 else k / (k * k + tt * tt)
    return float(np.sqrt(np.mean((dist - radius) ** 2)))


def tendon_displacements_for_state(geom: RobotGeometry, q) -> np.ndarray:
    """``L(0) - L(q)`` per tendon; positive means the tendon must be pulled."""
    return tendon_lengths(geom, np.zeros(geom.dof)) - tendon_lengths(geom, q)


@dataclass
class GaitSequence:
    steps: list[ActuationCommand]
    period_steps: int
    frequency_hint: float = 0.33
    helices: list[HelixSpec] = field(default_factory=list)
    joint_states: list[np.ndarray] = field(default_factory=list)
    fit_rms: list[float] = field(default_factory=list)

    def command(self, k: int) -> ActuationCommand:
        return self.steps[k % self.period_steps]

    @property
    def displacements(self) -> np.ndarray:
        return np.stack([c.displacements for c in self.steps])


def _gait_step(args):
    geom, spec = args
    fit = helix_joint_angles(geom, spec)
    return fit.q, fit.rms, tendon_displacements_for_state(geom, fit.q)


def rolling_gait(geom: RobotGeometry, spec: HelixSpec, steps_per_cycle: int,
                 frequency_hint: float = 0.33, workers: int = 1) -> GaitSequence:
    """Roll the helix bending plane through one full turn in equal steps."""
    if steps_per_cycle < 3:
        raise DomainError("a rolling gait needs at least 3 steps per cycle")
    if geom.n_tendons < 3:
        raise DomainError("a rolling gait needs at least 3 tendons")
    specs = [spec.with_phase(spec.phase + 2.0 * np.pi * k / steps_per_cycle)
             for k in range(steps_per_cycle)]
    args = [(geom, s) for s in specs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_gait_step, args))
    else:
        out = [_gait_step(a) for a in args]
    return GaitSequence(
        steps=[ActuationCommand(d) for _, _, d in out],
        period_steps=steps_per_cycle,
        frequency_hint=frequency_hint,
        helices=specs,
        joint_states=[q for q, _, _ in out],
        fit_rms=[r for _, r, _ in out],
    )


@dataclass
class TubeClearance:
    max_axis_distance: float
    envelope: float
    ok: bool
    body_margin: float


def tube_clearance(geom: RobotGeometry, helices, joint_states,
                   tube_inner_diameter: float, body_diameter: float) -> TubeClearance:
    """Check frame origins against the envelope ``R + (ID - OD) / 2`` about each helix axis.

    ``helices`` and ``joint_states`` pair up step by step (a single
    ``HelixSpec`` applies to every state). ``body_margin`` is the physical gap
    ``ID/2 - (max distance + OD/2)``; negative means the body touches the wall.
    """
    if not tube_inner_diameter > 0 or not body_diameter > 0:
        raise DomainError("tube and body diameters must be positive")
    states = list(joint_states)
    if not states:
        raise DomainError("no joint states to check")
    specs = [helices] * len(states) if isinstance(helices, HelixSpec) else list(helices)
    if len(specs) != len(states):
        raise DomainError("need one helix per joint state")
    worst = 0.0
    for spec, q in zip(specs, states):
        orgs = _kernels_py.chain(as_joint_state(geom, q), geom.link_lengths)[1]
        worst = max(worst, float(np.max(_axis_distance(geom, spec, orgs))))
    envelope = max(s.radius for s in specs) + 0.5 * (tube_inner_diameter - body_diameter)
    margin = 0.5 * tube_inner_diameter - (worst + 0.5 * body_diameter)
    return TubeClearance(worst, envelope, worst <= envelope + 1e-12, margin)
