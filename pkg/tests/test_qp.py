import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tendonkin import DomainError
from tendonkin.qp import QPInfeasible, solve_qp


def random_qp(seed, n, me, mi):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    G = M @ M.T + 0.1 * np.eye(n)
    a = rng.normal(size=n)
    x_feas = rng.normal(size=n)
    A_eq = rng.normal(size=(me, n))
    b_eq = A_eq @ x_feas
    A_in = rng.normal(size=(mi, n))
    b_in = A_in @ x_feas - rng.uniform(0, 1, mi)  # x_feas is strictly feasible
    return G, a, A_eq, b_eq, A_in, b_in


class TestSolveQp:
    def test_unconstrained(self):
        G = np.array([[2.0, 0.0], [0.0, 4.0]])
        r = solve_qp(G, [-2.0, -4.0])
        np.testing.assert_allclose(r.x, [1.0, 1.0], rtol=1e-14)

    def test_single_active_bound(self):
        # min (x - 1)^2 with x >= 2
        r = solve_qp([[2.0]], [-2.0], A_in=[[1.0]], b_in=[2.0])
        np.testing.assert_allclose(r.x, [2.0], rtol=1e-14)
        np.testing.assert_allclose(r.ineq_multipliers, [2.0], rtol=1e-12)

    def test_equality_projection(self):
        r = solve_qp(2 * np.eye(2), [0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[1.0])
        np.testing.assert_allclose(r.x, [0.5, 0.5], rtol=1e-14)
        np.testing.assert_allclose(r.eq_multipliers, [1.0], rtol=1e-12)

    def test_infeasible(self):
        with pytest.raises(QPInfeasible):
            solve_qp(np.eye(1), [0.0], A_in=[[1.0], [-1.0]], b_in=[1.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            solve_qp(np.eye(2), [0.0, 0.0, 0.0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(1, 8), st.integers(0, 3), st.integers(0, 10))
    def test_kkt_conditions(self, seed, n, me, mi):
        me = min(me, n - 1) if n > 1 else 0
        G, a, A_eq, b_eq, A_in, b_in = random_qp(seed, n, me, mi)
        r = solve_qp(G, a, A_eq, b_eq, A_in, b_in)
        scale = 1.0 + np.max(np.abs(a))
        np.testing.assert_allclose(A_eq @ r.x, b_eq, atol=1e-9 * scale)
        slack = A_in @ r.x - b_in
        assert np.all(slack >= -1e-9 * scale)
        assert np.all(r.ineq_multipliers >= -1e-12)
        assert np.all(np.abs(r.ineq_multipliers * slack) <= 1e-8 * scale)
        grad = G @ r.x + a - A_eq.T @ r.eq_multipliers - A_in.T @ r.ineq_multipliers
        assert np.max(np.abs(grad)) <= 1e-8 * scale

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_matches_scipy(self, seed):
        from scipy.optimize import minimize as sp_minimize
        G, a, A_eq, b_eq, A_in, b_in = random_qp(seed, 4, 1, 5)
        r = solve_qp(G, a, A_eq, b_eq, A_in, b_in)
        ref = sp_minimize(lambda x: 0.5 * x @ G @ x + a @ x, np.zeros(4), jac=lambda x: G @ x + a,
                          method="SLSQP", options={"ftol": 1e-14, "maxiter": 500},
                          constraints=[{"type": "eq", "fun": lambda x: A_eq @ x - b_eq},
                                       {"type": "ineq", "fun": lambda x: A_in @ x - b_in}])
        f = lambda x: 0.5 * x @ G @ x + a @ x
        assert f(r.x) <= f(ref.x) + 1e-8
