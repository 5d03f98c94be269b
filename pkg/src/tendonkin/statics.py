"""Dimensionless shape estimation from tendon displacements.

The shape ``q*`` minimizes the misalignment between normalized joint moments
and normalized joint angles,

    cost(q) = || m / (|m| + eps_m) - q / (|q| + eps_q) ||^2,

subject to each taut tendon shortening by its commanded displacement (less a
linear stretch term), joint limits, and non-negative relative tensions. The
lowest-indexed tensioned tendon is the unit-tension reference; every other
tensioned tendon contributes a free relative tension.

Released tendons (negative command) are treated as slack by default: they
carry no tension and only require that the tendon path is not longer than the
released length allows. ``release_model="taut"`` instead keeps them tensioned
with an equality constraint and ``gamma = +1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .geometry import RobotGeometry, as_joint_state
from .nlp import NlpConfig, NlpProblem, minimize

log = logging.getLogger(__name__)

RELEASE_MODELS = ("slack", "taut")
DEFAULT_EPSILON = 1e-9
INITIAL_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class ActuationCommand:
    """Commanded displacement per tendon in meters (positive = pulled)."""

    displacements: np.ndarray

    def __post_init__(self):
        d = np.array(self.displacements, dtype=float).reshape(-1)
        if d.size == 0:
            raise DomainError("actuation command has no tendons")
        if not np.all(np.isfinite(d)):
            raise DomainError("commanded displacements must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "displacements", d)

    @classmethod
    def from_pulls(cls, n_tendons: int, pulls: Mapping[int, float]) -> "ActuationCommand":
        d = np.zeros(n_tendons)
        for idx, value in pulls.items():
            if not 0 <= int(idx) < n_tendons:
                raise DomainError(f"tendon index {idx} out of range [0, {n_tendons})")
            d[int(idx)] = value
        return cls(d)

    @property
    def actuated(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.displacements != 0.0))

    @property
    def pulled(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.displacements > 0.0))

    @property
    def released(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.displacements < 0.0))


@dataclass(frozen=True)
class SolverConfig:
    q0: Optional[np.ndarray] = None
    normalization_epsilon: float = DEFAULT_EPSILON
    mu: float = 0.0
    stretch_compliance: float = 0.0
    nlp: NlpConfig = field(default_factory=NlpConfig)
    release_model: str = "slack"
    cumulative_moments: bool = True
    initial_relative_tension: float = 1.0

    def __post_init__(self):
        if not self.normalization_epsilon > 0:
            raise DomainError("normalization_epsilon must be positive")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise DomainError(f"mu must be finite and >= 0, got {self.mu}")
        if not (np.isfinite(self.stretch_compliance) and self.stretch_compliance >= 0):
            raise DomainError("stretch_compliance must be finite and >= 0")
        if self.release_model not in RELEASE_MODELS:
            raise DomainError(f"release_model must be one of {RELEASE_MODELS}")
        if not self.initial_relative_tension >= 0:
            raise DomainError("initial_relative_tension must be >= 0")


@dataclass
class SolveResult:
    q_star: np.ndarray
    relative_tensions: np.ndarray
    cost: float
    displacement_residuals: np.ndarray
    converged: bool
    iterations: int
    base_tensions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    actuated: tuple[int, ...] = ()
    taut: tuple[bool, ...] = ()
    kkt_residual: float = 0.0
    message: str = ""

    @property
    def max_constraint_violation(self) -> float:
        """Equality error of taut tendons and overshoot of slack ones."""
        r = self.displacement_residuals
        if r.size == 0:
            return 0.0
        taut = np.asarray(self.taut, dtype=bool)
        viol = np.where(taut, np.abs(r), np.maximum(-r, 0.0))
        return float(np.max(viol))


@dataclass(frozen=True)
class _Formulation:
    """Index bookkeeping shared by the cost, the constraints and the result."""

    dof: int
    actuated: tuple[int, ...]
    taut: tuple[bool, ...]
    reference: int
    free: tuple[int, ...]
    exponents: np.ndarray
    targets: np.ndarray

    def base_tensions(self, lam: np.ndarray, n_tendons: int) -> np.ndarray:
        base = np.zeros(n_tendons)
        if self.reference >= 0:
            base[self.reference] = 1.0
        base[list(self.free)] = lam
        return base


def _formulate(geom: RobotGeometry, command: ActuationCommand, mu: float,
               release_model: str) -> _Formulation:
    d = command.displacements
    if d.size != geom.n_tendons:
        raise DomainError(f"command has {d.size} displacements for {geom.n_tendons} tendons")
    actuated = command.actuated
    if release_model == "slack":
        taut = tuple(bool(d[i] > 0) for i in actuated)
    else:
        taut = (True,) * len(actuated)
    tensioned = [i for i, t in zip(actuated, taut) if t]
    reference = tensioned[0] if tensioned else -1
    exponents = np.where(d > 0, -mu, mu)
    exponents[d == 0] = 0.0
    return _Formulation(geom.dof, actuated, taut, reference, tuple(tensioned[1:]),
                        exponents, d[list(actuated)])


def _normalized_cost(m, q, eps, tension_sum):
    dim = q.size
    eps_q = eps * dim
    eps_m = eps * dim * tension_sum
    # without tension there is no moment to normalize
    mhat = m / (np.linalg.norm(m) + eps_m) if tension_sum > 0 else np.zeros_like(m)
    qhat = q / (np.linalg.norm(q) + eps_q)
    diff = mhat - qhat
    return float(diff @ diff)


def _evaluate(geom, q, base, exponents, cumulative):
    try:
        return kernels.evaluate_model(q, geom.link_lengths, geom.waypoint_array,
                                      geom.anchored_array, base, exponents, cumulative)
    except ValueError as exc:
        raise DomainError(str(exc)) from None


def _relative_array(form: _Formulation, relative_tensions) -> np.ndarray:
    lam = np.zeros(0) if relative_tensions is None else np.asarray(relative_tensions, dtype=float).reshape(-1)
    if lam.size != len(form.free):
        raise DomainError(f"expected {len(form.free)} relative tensions, got {lam.size}")
    if np.any(~np.isfinite(lam)) or np.any(lam < 0):
        raise DomainError("relative tensions must be finite and >= 0")
    return lam


def shape_cost(geom: RobotGeometry, q, command: ActuationCommand, mu: float = 0.0,
               relative_tensions: Sequence[float] | None = None, *,
               epsilon: float = DEFAULT_EPSILON, release_model: str = "slack",
               tension_scale: float = 1.0, cumulative: bool = True) -> float:
    """Normalized moment/angle misalignment at ``q``.

    ``tension_scale`` multiplies every base tension; the cost does not depend
    on it.
    """
    qa = as_joint_state(geom, q)
    if not tension_scale > 0:
        raise DomainError("tension_scale must be positive")
    form = _formulate(geom, command, mu, release_model)
    lam = _relative_array(form, relative_tensions)
    base = form.base_tensions(lam, geom.n_tendons) * tension_scale
    m, _ = _evaluate(geom, qa, base, form.exponents, cumulative)
    return _normalized_cost(m, qa, epsilon, float(base.sum()))


def displacement_residual(geom: RobotGeometry, q, command: ActuationCommand,
                          tension_estimates: Sequence[float] | None = None,
                          stretch_compliance: float = 0.0) -> np.ndarray:
    """``[L(0) - L(q)] - [d - c * F]`` for each actuated tendon, in meters.

    ``tension_estimates`` gives the base tension of each actuated tendon in
    index order (default 1 for all).
    """
    qa = as_joint_state(geom, q)
    actuated = list(command.actuated)
    if command.displacements.size != geom.n_tendons:
        raise DomainError(f"command has {command.displacements.size} displacements "
                          f"for {geom.n_tendons} tendons")
    if not actuated:
        raise DomainError("displacement residual needs at least one actuated tendon")
    F = np.ones(len(actuated)) if tension_estimates is None else np.asarray(tension_estimates, dtype=float)
    if F.shape != (len(actuated),):
        raise DomainError(f"expected {len(actuated)} tension estimates")
    zeros = np.zeros(geom.n_tendons)
    L0 = _evaluate(geom, np.zeros(geom.dof), zeros, zeros, True)[1]
    L = _evaluate(geom, qa, zeros, zeros, True)[1]
    d = command.displacements[actuated]
    return (L0[actuated] - L[actuated]) - (d - stretch_compliance * F)


def default_initial_guess(geom: RobotGeometry, command: ActuationCommand, mu: float = 0.0,
                          release_model: str = "slack", cumulative: bool = True) -> np.ndarray:
    """Small step from straight toward the bending direction of the reference tendon."""
    form = _formulate(geom, command, mu, release_model)
    ref = form.reference if form.reference >= 0 else (form.actuated[0] if form.actuated else -1)
    if ref < 0:
        return np.zeros(geom.dof)
    base = np.zeros(geom.n_tendons)
    base[ref] = 1.0
    m, _ = _evaluate(geom, np.zeros(geom.dof), base, np.zeros(geom.n_tendons), cumulative)
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return np.full(geom.dof, INITIAL_STEP)
    sign = 1.0 if command.displacements[ref] > 0 else -1.0
    return sign * INITIAL_STEP * m / scale


class _CachedModel:
    """Memoizes the kernel on the last decision vector.

    The NLP evaluates the objective and both constraint blocks at the same
    point in sequence; this turns three kernel calls into one.
    """

    def __init__(self, geom, form, eps, stretch, cumulative):
        self.geom = geom
        self.form = form
        self.eps = eps
        self.stretch = stretch
        self.cumulative = cumulative
        self.key = None
        zeros = np.zeros(geom.n_tendons)
        self.L0 = _evaluate(geom, np.zeros(geom.dof), zeros, zeros, True)[1][list(form.actuated)]
        self.taut = np.asarray(form.taut, dtype=bool)

    def _update(self, x):
        key = x.tobytes()
        if key == self.key:
            return
        q = x[:self.form.dof]
        lam = np.maximum(x[self.form.dof:], 0.0)
        base = self.form.base_tensions(lam, self.geom.n_tendons)
        m, L = _evaluate(self.geom, q, base, self.form.exponents, self.cumulative)
        F = base[list(self.form.actuated)]
        self.cost = _normalized_cost(m, q, self.eps, float(base.sum()))
        self.resid = (self.L0 - L[list(self.form.actuated)]) - (self.form.targets - self.stretch * F)
        self.key = key

    def objective(self, x):
        self._update(x)
        return self.cost

    def equalities(self, x):
        self._update(x)
        return self.resid[self.taut]

    def inequalities(self, x):
        self._update(x)
        return self.resid[~self.taut]


def _straight_result(geom, command, form, stretch):
    resid = (displacement_residual(geom, np.zeros(geom.dof), command, None, stretch)
             if form.actuated else np.zeros(0))
    taut = np.asarray(form.taut, dtype=bool)
    ok = not np.any(taut) and np.all(resid >= 0)
    return SolveResult(np.zeros(geom.dof), np.zeros(len(form.free)), 0.0, resid, bool(ok), 0,
                       np.zeros(geom.n_tendons), form.actuated, form.taut, 0.0,
                       "straight state" if ok else "no tensioned tendon")


def solve_statics(geom: RobotGeometry, command: ActuationCommand,
                  config: SolverConfig | None = None) -> SolveResult:
    """Estimate the robot shape for a displacement command.

    An all-zero command returns the straight state immediately. If only
    slack tendons remain, nothing bends the robot and the straight state is
    returned as well. Non-convergence is reported through the result.
    """
    cfg = config or SolverConfig()
    form = _formulate(geom, command, cfg.mu, cfg.release_model)
    if form.reference < 0:
        return _straight_result(geom, command, form, cfg.stretch_compliance)

    model = _CachedModel(geom, form, cfg.normalization_epsilon, cfg.stretch_compliance,
                         cfg.cumulative_moments)
    n_free = len(form.free)
    has_ineq = not all(form.taut)
    problem = NlpProblem(
        objective=model.objective,
        equality_constraints=model.equalities,
        inequality_constraints=model.inequalities if has_ineq else None,
        lower_bounds=np.concatenate([np.full(geom.dof, -geom.joint_limit), np.zeros(n_free)]),
        upper_bounds=np.concatenate([np.full(geom.dof, geom.joint_limit), np.full(n_free, np.inf)]),
    )
    if cfg.q0 is None:
        q0 = default_initial_guess(geom, command, cfg.mu, cfg.release_model, cfg.cumulative_moments)
    else:
        q0 = as_joint_state(geom, cfg.q0, check_limits=False)
    x0 = np.concatenate([q0, np.full(n_free, cfg.initial_relative_tension)])
    sol = minimize(problem, x0, cfg.nlp)

    q = sol.x_star[:geom.dof].copy()
    lam = np.maximum(sol.x_star[geom.dof:], 0.0)
    model._update(sol.x_star)
    base = form.base_tensions(lam, geom.n_tendons)
    return SolveResult(
        q_star=q,
        relative_tensions=lam.copy(),
        cost=float(model.cost),
        displacement_residuals=model.resid.copy(),
        converged=sol.converged,
        iterations=sol.iterations,
        base_tensions=base,
        actuated=form.actuated,
        taut=form.taut,
        kkt_residual=sol.kkt_residual,
        message=sol.message,
    )


def solve_baseline_frictionless(geom: RobotGeometry, command: ActuationCommand,
                                config: SolverConfig | None = None) -> SolveResult:
    """``solve_statics`` with the friction coefficient forced to zero."""
    cfg = config or SolverConfig()
    return solve_statics(geom, command, replace(cfg, mu=0.0))
