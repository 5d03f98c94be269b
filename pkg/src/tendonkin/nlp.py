"""Sequential quadratic programming for small dense constrained problems.

``minimize`` follows the SLSQP recipe: a damped BFGS approximation of the
Lagrangian Hessian, a strictly convex QP subproblem per iteration, and a
backtracking line search on the L1 exact-penalty merit function with
Powell-style penalty weights. Two additions keep convergence tight on the
statics problems: a second-order correction when the full step is rejected
(Maratos effect), and an elastic QP fallback when the linearized constraints
are inconsistent.

Besides the KKT test, a feasible iterate is accepted when the predicted merit
decrease falls below the rounding level of the merit itself and the KKT
residual is within ``NOISE_KKT_FACTOR`` of the tolerance.

Derivatives default to central finite differences of the user callbacks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NumericalError
from .qp import QPInfeasible, solve_qp

log = logging.getLogger(__name__)

Vector = np.ndarray
VectorFn = Callable[[Vector], Vector]

MAX_ELASTIC_WEIGHT = 1e8
# KKT slack allowed when no step can decrease the merit in floating point
NOISE_KKT_FACTOR = 100.0


@dataclass
class NlpProblem:
    """``min f(x)`` s.t. ``eq(x) = 0``, ``ineq(x) >= 0``, ``lower <= x <= upper``.

    Optional ``gradient`` / ``*_jacobian`` callbacks replace finite differences.
    """

    objective: Callable[[Vector], float]
    equality_constraints: Optional[VectorFn] = None
    inequality_constraints: Optional[VectorFn] = None
    lower_bounds: Optional[Vector] = None
    upper_bounds: Optional[Vector] = None
    gradient: Optional[VectorFn] = None
    equality_jacobian: Optional[Callable[[Vector], np.ndarray]] = None
    inequality_jacobian: Optional[Callable[[Vector], np.ndarray]] = None


@dataclass(frozen=True)
class NlpConfig:
    max_iterations: int = 500
    kkt_tolerance: float = 1e-8
    constraint_tolerance: float = 1e-8
    finite_difference_step: float = 1e-6

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise DomainError("max_iterations must be positive")
        for name in ("kkt_tolerance", "constraint_tolerance", "finite_difference_step"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


@dataclass
class NlpSolution:
    x_star: Vector
    objective_value: float
    max_equality_violation: float
    max_inequality_violation: float
    converged: bool
    iterations: int
    kkt_residual: float = np.inf
    message: str = ""
    equality_multipliers: Vector = field(default_factory=lambda: np.zeros(0))
    inequality_multipliers: Vector = field(default_factory=lambda: np.zeros(0))
    evaluations: int = 0


def finite_diff_gradient(f: Callable[[Vector], float], x, h: float = 1e-6) -> Vector:
    """Central-difference gradient of a scalar function."""
    if not h > 0:
        raise DomainError("finite difference step must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    xp = x.copy()
    for k in range(x.size):
        xp[k] = x[k] + h
        fp = float(f(xp))
        xp[k] = x[k] - h
        fm = float(f(xp))
        xp[k] = x[k]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value while differencing component {k}")
        g[k] = (fp - fm) / (2.0 * h)
    return g


def finite_diff_jacobian(fun: VectorFn, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian ``(m, n)`` of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    xp = x.copy()
    for k in range(x.size):
        xp[k] = x[k] + h
        fp = np.asarray(fun(xp), dtype=float)
        xp[k] = x[k] - h
        fm = np.asarray(fun(xp), dtype=float)
        xp[k] = x[k]
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericalError(f"non-finite function value while differencing component {k}")
        cols.append((fp - fm) / (2.0 * h))
    return np.stack(cols, axis=1) if cols else np.zeros((0, 0))


class _Evaluator:
    """Evaluates objective and constraints together and differentiates them."""

    def __init__(self, problem: NlpProblem, n: int, h: float):
        self.p = problem
        self.n = n
        self.h = h
        self.me = self.mi = None
        self.count = 0

    def values(self, x):
        self.count += 1
        f = float(self.p.objective(x))
        ce = (np.zeros(0) if self.p.equality_constraints is None
              else np.atleast_1d(np.asarray(self.p.equality_constraints(x), dtype=float)))
        ci = (np.zeros(0) if self.p.inequality_constraints is None
              else np.atleast_1d(np.asarray(self.p.inequality_constraints(x), dtype=float)))
        if self.me is None:
            self.me, self.mi = ce.size, ci.size
        elif ce.size != self.me or ci.size != self.mi:
            raise DomainError("constraint callbacks changed their output length")
        return f, ce, ci

    def derivatives(self, x):
        p, h = self.p, self.h
        need_fd = (p.gradient is None
                   or (self.me and p.equality_jacobian is None)
                   or (self.mi and p.inequality_jacobian is None))
        if need_fd:
            stacked = finite_diff_jacobian(
                lambda z: np.concatenate([[v] if np.ndim(v) == 0 else v for v in self.values(z)]),
                x, h)
        g = p.gradient(x) if p.gradient is not None else stacked[0]
        je = (p.equality_jacobian(x) if (self.me and p.equality_jacobian is not None)
              else (stacked[1:1 + self.me] if self.me else np.zeros((0, self.n))))
        ji = (p.inequality_jacobian(x) if (self.mi and p.inequality_jacobian is not None)
              else (stacked[1 + self.me:] if self.mi else np.zeros((0, self.n))))
        return (np.asarray(g, dtype=float).reshape(self.n),
                np.asarray(je, dtype=float).reshape(self.me, self.n),
                np.asarray(ji, dtype=float).reshape(self.mi, self.n))


def _violations(ce, ci):
    eq = float(np.max(np.abs(ce))) if ce.size else 0.0
    ineq = float(np.max(-ci)) if ci.size else 0.0
    return eq, max(ineq, 0.0)


def _merit(f, ce, ci, rho_e, rho_i):
    return f + float(rho_e @ np.abs(ce)) + float(rho_i @ np.maximum(-ci, 0.0))


def _solve_subproblem(B, g, je, ce, ji, ci, dl, du, elastic_weight):
    """QP for the step; returns (d, lam_e, lam_i, z_bounds, elastic_used)."""
    n = g.size
    finite_l = np.flatnonzero(np.isfinite(dl))
    finite_u = np.flatnonzero(np.isfinite(du))
    eye = np.eye(n)
    bound_rows = np.vstack([eye[finite_l], -eye[finite_u]]) if (finite_l.size + finite_u.size) else np.zeros((0, n))
    bound_rhs = np.concatenate([dl[finite_l], -du[finite_u]])
    try:
        res = solve_qp(B, g, je, -ce, np.vstack([ji, bound_rows]), np.concatenate([-ci, bound_rhs]))
        lam_i = res.ineq_multipliers[:ji.shape[0]]
        zb = res.ineq_multipliers[ji.shape[0]:]
        return res.x, res.eq_multipliers, lam_i, (finite_l, finite_u, zb), False
    except QPInfeasible:
        pass
    # elastic mode: slacks absorb the inconsistent part of the linearization
    me, mi = je.shape[0], ji.shape[0]
    ns = 2 * me + mi
    N = n + ns
    G = np.zeros((N, N))
    G[:n, :n] = B
    G[n:, n:] = np.eye(ns) * 1e-8
    a = np.concatenate([g, np.full(ns, elastic_weight)])
    A_eq = np.hstack([je, -np.eye(me), np.eye(me), np.zeros((me, mi))])
    A_in_c = np.hstack([ji, np.zeros((mi, 2 * me)), np.eye(mi)])
    A_in_s = np.hstack([np.zeros((ns, n)), np.eye(ns)])
    A_in_b = np.hstack([bound_rows, np.zeros((bound_rows.shape[0], ns))])
    res = solve_qp(G, a, A_eq, -ce, np.vstack([A_in_c, A_in_s, A_in_b]),
                   np.concatenate([-ci, np.zeros(ns), bound_rhs]))
    lam_i = res.ineq_multipliers[:mi]
    zb = res.ineq_multipliers[mi + ns:]
    return res.x[:n], res.eq_multipliers, lam_i, (finite_l, finite_u, zb), True


def minimize(problem: NlpProblem, x0, config: NlpConfig | None = None) -> NlpSolution:
    """Local constrained minimization by SQP; see the module docstring."""
    cfg = config or NlpConfig()
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    n = x.size
    if n == 0:
        raise DomainError("empty decision vector")
    lb = np.full(n, -np.inf) if problem.lower_bounds is None else np.asarray(problem.lower_bounds, dtype=float).reshape(-1)
    ub = np.full(n, np.inf) if problem.upper_bounds is None else np.asarray(problem.upper_bounds, dtype=float).reshape(-1)
    if lb.size != n or ub.size != n:
        raise DomainError(f"bounds must have length {n}")
    if np.any(lb > ub):
        raise DomainError("lower bounds exceed upper bounds")
    x = np.clip(x, lb, ub)

    ev = _Evaluator(problem, n, cfg.finite_difference_step)
    f, ce, ci = ev.values(x)
    if not np.isfinite(f):
        raise NumericalError("objective is not finite at the initial point")
    if not (np.all(np.isfinite(ce)) and np.all(np.isfinite(ci))):
        raise NumericalError("constraints are not finite at the initial point")
    me, mi = ce.size, ci.size
    g, je, ji = ev.derivatives(x)

    B = np.eye(n)
    first_update = True
    rho_e = np.zeros(me)
    rho_i = np.zeros(mi)
    lam_e = np.zeros(me)
    lam_i = np.zeros(mi)
    ctol, kktol = cfg.constraint_tolerance, cfg.kkt_tolerance

    best = None

    def consider(xc, fc, cec, cic):
        nonlocal best
        viol = max(_violations(cec, cic))
        key = (0.0 if viol <= ctol else viol, fc)
        if best is None or key < best[0]:
            best = (key, xc.copy(), fc, cec.copy(), cic.copy())

    consider(x, f, ce, ci)
    kkt = np.inf
    message = "iteration limit reached"
    converged = False
    stalls = 0
    iterations = 0

    for iterations in range(1, cfg.max_iterations + 1):
        viol = max(_violations(ce, ci))
        elastic_weight = float(np.clip(10.0 * np.max(np.abs(np.concatenate([lam_e, lam_i, [0.0]]))),
                                       100.0, MAX_ELASTIC_WEIGHT))
        try:
            d, lam_e_new, lam_i_new, (fl, fu, zb), elastic = _solve_subproblem(
                B, g, je, ce, ji, ci, lb - x, ub - x, elastic_weight)
        except (QPInfeasible, DomainError) as exc:
            message = f"QP subproblem failed: {exc}"
            break

        # first-order optimality measured at x with the QP multipliers
        z = np.zeros(n)
        nl = fl.size
        z[fl] += zb[:nl]
        z[fu] -= zb[nl:]
        stat = g - je.T @ lam_e_new - ji.T @ lam_i_new - z
        comp = 0.0
        if mi:
            comp = float(np.max(np.abs(lam_i_new * ci)))
        if nl:
            comp = max(comp, float(np.max(np.abs(zb[:nl] * (x[fl] - lb[fl])))))
        if fu.size:
            comp = max(comp, float(np.max(np.abs(zb[nl:] * (ub[fu] - x[fu])))))
        kkt = max(float(np.max(np.abs(stat))), comp)
        if not elastic and viol <= ctol and kkt <= kktol:
            converged = True
            message = "KKT conditions satisfied"
            lam_e, lam_i = lam_e_new, lam_i_new
            iterations -= 1
            break

        lam_e, lam_i = lam_e_new, lam_i_new
        rho_e = np.maximum(np.abs(lam_e), 0.5 * (rho_e + np.abs(lam_e)))
        rho_i = np.maximum(np.abs(lam_i), 0.5 * (rho_i + np.abs(lam_i)))
        if elastic:
            rho_e = np.maximum(rho_e, elastic_weight)
            rho_i = np.maximum(rho_i, elastic_weight)

        phi0 = _merit(f, ce, ci, rho_e, rho_i)
        dphi = float(g @ d) - float(rho_e @ np.abs(ce)) - float(rho_i @ np.maximum(-ci, 0.0))
        if (not elastic and viol <= ctol and kkt <= NOISE_KKT_FACTOR * kktol
                and -dphi <= 100.0 * np.finfo(float).eps * abs(phi0)):
            # the predicted decrease is below the rounding level of the merit
            converged = True
            message = "stationary to working precision"
            iterations -= 1
            break
        if dphi > -1e-300:
            dphi = min(dphi, -1e-16 * max(1.0, abs(phi0)))

        def trial(step):
            xt = np.clip(x + step, lb, ub)
            try:
                ft, cet, cit = ev.values(xt)
            except (ValueError, ArithmeticError):
                return xt, np.inf, None, None, np.inf
            if not (np.isfinite(ft) and np.all(np.isfinite(cet)) and np.all(np.isfinite(cit))):
                return xt, np.inf, None, None, np.inf
            return xt, ft, cet, cit, _merit(ft, cet, cit, rho_e, rho_i)

        alpha = 1.0
        xt, ft, cet, cit, phit = trial(d)
        accepted = phit <= phi0 + 1e-4 * dphi
        if not accepted and (me or mi) and np.isfinite(phit):
            # second-order correction: re-linearize constraints at x + d
            try:
                d2, *_ = _solve_subproblem(B, g, je, cet - je @ d, ji, cit - ji @ d,
                                           lb - x, ub - x, elastic_weight)
                xs, fs, ces, cis, phis = trial(d2)
                if phis <= phi0 + 1e-4 * dphi:
                    xt, ft, cet, cit, phit, d = xs, fs, ces, cis, phis, d2
                    accepted = True
            except (QPInfeasible, DomainError):
                pass
        while not accepted:
            if np.isfinite(phit):
                denom = 2.0 * (phit - phi0 - alpha * dphi)
                a_new = -dphi * alpha * alpha / denom if denom > 0 else 0.5 * alpha
                alpha = float(np.clip(a_new, 0.1 * alpha, 0.5 * alpha))
            else:
                alpha *= 0.1
            if alpha < 1e-10:
                break
            xt, ft, cet, cit, phit = trial(alpha * d)
            accepted = phit <= phi0 + 1e-4 * alpha * dphi

        if not accepted:
            stalls += 1
            if stalls >= 3 or np.max(np.abs(d)) <= 1e-15 * (1.0 + np.max(np.abs(x))):
                message = "line search failed"
                break
            B = np.eye(n)
            first_update = True
            continue
        stalls = 0

        s = xt - x
        x_new, f, ce, ci = xt, ft, cet, cit
        g_new, je_new, ji_new = ev.derivatives(x_new)
        y = (g_new - je_new.T @ lam_e - ji_new.T @ lam_i) - (g - je.T @ lam_e - ji.T @ lam_i)
        x, g, je, ji = x_new, g_new, je_new, ji_new
        consider(x, f, ce, ci)

        sy = float(s @ y)
        if float(s @ s) > 0:
            if first_update and sy > 0:
                B = np.eye(n) * (float(y @ y) / sy)
            first_update = False
            Bs = B @ s
            sBs = float(s @ Bs)
            if sBs > 0:
                if sy < 0.2 * sBs:
                    theta = 0.8 * sBs / (sBs - sy)
                    y = theta * y + (1.0 - theta) * Bs
                    sy = float(s @ y)
                B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs
                B = 0.5 * (B + B.T)
    else:
        iterations = cfg.max_iterations

    if converged:
        x_out, f_out = x, f
        eq_v, in_v = _violations(ce, ci)
    else:
        _, x_out, f_out, ce_b, ci_b = best
        eq_v, in_v = _violations(ce_b, ci_b)
        log.debug("minimize did not converge: %s", message)
    return NlpSolution(
        x_star=x_out,
        objective_value=float(f_out),
        max_equality_violation=eq_v,
        max_inequality_violation=in_v,
        converged=converged,
        iterations=iterations,
        kkt_residual=kkt,
        message=message,
        equality_multipliers=lam_e,
        inequality_multipliers=lam_i,
        evaluations=ev.count,
    )
