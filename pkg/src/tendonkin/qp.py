"""Dense strictly convex quadratic programming.

Solves

    minimize    0.5 x'Gx + a'x
    subject to  A_eq x  = b_eq
                A_in x >= b_in

with the dual active-set method of Goldfarb and Idnani. Problems here are
small (tens of variables), so the factorizations of the active set are
recomputed from scratch at every step instead of being updated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class QPInfeasible(Exception):
    """The constraint set of the QP is empty (to working precision)."""


@dataclass
class QPResult:
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    active: list[int]
    iterations: int


def _cholesky(g: np.ndarray) -> np.ndarray:
    jitter = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(g)))))
    for _ in range(12):
        try:
            return np.linalg.cholesky(g + jitter * np.eye(g.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else jitter * 100.0
    raise DomainError("QP Hessian is not positive definite")


def solve_qp(G, a, A_eq=None, b_eq=None, A_in=None, b_in=None,
             tol: float = 1e-12, max_iter: int | None = None) -> QPResult:
    G = np.asarray(G, dtype=float)
    a = np.asarray(a, dtype=float)
    n = a.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    A_in = np.zeros((0, n)) if A_in is None else np.atleast_2d(np.asarray(A_in, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float).reshape(-1)
    me, mi = A_eq.shape[0], A_in.shape[0]
    if G.shape != (n, n) or A_eq.shape[1] != n or A_in.shape[1] != n:
        raise DomainError("QP dimensions are inconsistent")
    if b_eq.size != me or b_in.size != mi:
        raise DomainError("QP right-hand sides do not match the constraint matrices")

    # unified constraint list; equalities may be sign-flipped while being added
    normals = np.vstack([A_eq, A_in])
    rhs = np.concatenate([b_eq, b_in])
    sign = np.ones(me + mi)
    L = _cholesky(G)
    Linv = np.linalg.solve(L, np.eye(n))
    x = -(Linv.T @ (Linv @ a))

    active: list[int] = []
    u = np.zeros(0)
    if max_iter is None:
        max_iter = 50 * (n + me + mi) + 100
    it = 0

    def directions(np_vec):
        w = Linv @ np_vec
        q = len(active)
        if q == 0:
            return Linv.T @ w, np.zeros(0)
        M = Linv @ (normals[active] * sign[active, None]).T
        Q, R = np.linalg.qr(M, mode="complete")
        d = Q.T @ w
        z = Linv.T @ (Q[:, q:] @ d[q:])
        r = np.linalg.solve(R[:q, :q], d[:q])
        return z, r

    def add_constraint(p: int, is_eq: bool):
        nonlocal x, u, it
        # work with n_p'x >= b_p where the current x violates it
        s_p = sign[p] * (normals[p] @ x - rhs[p])
        u_plus = np.append(u, 0.0)
        while True:
            it += 1
            if it > max_iter:
                raise QPInfeasible("QP iteration limit reached")
            n_p = sign[p] * normals[p]
            z, r = directions(n_p)
            t1, k_drop = np.inf, -1
            for idx, c in enumerate(active):
                if c >= me and r[idx] > tol:
                    ratio = u_plus[idx] / r[idx]
                    if ratio < t1:
                        t1, k_drop = ratio, idx
            zn = z @ n_p
            scale = max(1.0, np.linalg.norm(n_p)) ** 2
            t2 = -s_p / zn if abs(zn) > tol * scale else np.inf
            if not np.isfinite(t1) and not np.isfinite(t2):
                if is_eq and abs(s_p) <= 1e3 * tol * max(1.0, abs(rhs[p])):
                    return  # redundant equality already satisfied
                raise QPInfeasible(f"constraint {p} cannot be satisfied")
            t = min(t1, t2)
            x = x + (t * z if np.isfinite(t2) else 0.0)
            if len(active):
                u_plus[:-1] -= t * r
            u_plus[-1] += t
            s_p = sign[p] * (normals[p] @ x - rhs[p])
            if t2 <= t1:
                active.append(p)
                u = u_plus
                return
            del active[k_drop]
            u_plus = np.delete(u_plus, k_drop)

    for p in range(me):
        if normals[p] @ x - rhs[p] > 0:
            sign[p] = -1.0
        if abs(normals[p] @ x - rhs[p]) <= tol * max(1.0, abs(rhs[p])) and not np.any(normals[p]):
            continue
        add_constraint(p, True)

    while True:
        if mi == 0:
            break
        slack = A_in @ x - b_in
        for c in active:
            if c >= me:
                slack[c - me] = np.inf
        p_local = int(np.argmin(slack))
        scale = max(1.0, float(np.linalg.norm(A_in[p_local])), abs(b_in[p_local]))
        if slack[p_local] >= -tol * scale:
            break
        add_constraint(me + p_local, False)

    lam_eq = np.zeros(me)
    lam_in = np.zeros(mi)
    for idx, c in enumerate(active):
        if c < me:
            lam_eq[c] = sign[c] * u[idx]
        else:
            lam_in[c - me] = u[idx]
    return QPResult(x, lam_eq, lam_in, list(active), it)
