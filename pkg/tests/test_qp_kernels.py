import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhlearn.errors import DimensionMismatch, IndefiniteReducedHessian, InfeasibleConstraints
from rhlearn.qp_kernels import EqQpProblem, min_norm_least_squares, numerical_rank, solve_eq_qp

from conftest import random_spd


def nullspace_oracle(H, f, Aeq, beq):
    # built independently of the library: QR of Aeq' for the range/null split
    c = Aeq.shape[0]
    Qf, Rf = np.linalg.qr(Aeq.T, mode="complete")
    Y, Z = Qf[:, :c], Qf[:, c:]
    w0 = Y @ np.linalg.solve(Rf[:c].T, beq)
    step = np.linalg.solve(Z.T @ H @ Z, -Z.T @ (H @ w0 + f))
    return w0 + Z @ step


def test_unconstrained_identity():
    w, value, y = solve_eq_qp(EqQpProblem(np.eye(2), np.zeros(2)))
    np.testing.assert_allclose(w, 0.0, atol=1e-15)
    assert value == 0.0
    assert y.size == 0


def test_symmetric_split():
    w, _, _ = solve_eq_qp(EqQpProblem(np.eye(2), np.zeros(2), [[1.0, 1.0]], [2.0]))
    np.testing.assert_allclose(w, [1.0, 1.0], rtol=1e-12)


def test_matches_nullspace_oracle(rng):
    for _ in range(20):
        H = random_spd(rng, 6)
        f = rng.normal(size=6)
        Aeq = rng.normal(size=(2, 6))
        beq = rng.normal(size=2)
        w, value, y = solve_eq_qp(EqQpProblem(H, f, Aeq, beq))
        w_ref = nullspace_oracle(H, f, Aeq, beq)
        assert np.linalg.norm(w - w_ref) <= 1e-10 * max(1.0, np.linalg.norm(w_ref))
        assert value == pytest.approx(0.5 * w_ref @ H @ w_ref + f @ w_ref, rel=1e-10)


def test_kkt_residuals(rng):
    for _ in range(20):
        d, c = 7, 3
        H = random_spd(rng, d)
        f = rng.normal(size=d)
        Aeq = rng.normal(size=(c, d))
        beq = rng.normal(size=c)
        w, _, y = solve_eq_qp(EqQpProblem(H, f, Aeq, beq))
        assert np.linalg.norm(Aeq @ w - beq) <= 1e-9 * (1 + np.linalg.norm(beq))
        assert np.linalg.norm(H @ w + f + Aeq.T @ y) <= 1e-8 * (1 + np.linalg.norm(f))


def test_unconstrained_equals_normal_equations(rng):
    H = random_spd(rng, 5)
    f = rng.normal(size=5)
    w, _, _ = solve_eq_qp(EqQpProblem(H, f))
    np.testing.assert_allclose(w, np.linalg.solve(H, -f), rtol=1e-10)


def test_redundant_constraints_use_fallback(rng):
    H = random_spd(rng, 5)
    f = rng.normal(size=5)
    a = rng.normal(size=(2, 5))
    Aeq = np.vstack([a, a[0] + a[1]])
    beq = np.array([1.0, 2.0, 3.0])
    w, _, y = solve_eq_qp(EqQpProblem(H, f, Aeq, beq))
    w_ref = nullspace_oracle(H, f, a, beq[:2])
    np.testing.assert_allclose(w, w_ref, rtol=1e-9, atol=1e-12)
    assert np.linalg.norm(H @ w + f + Aeq.T @ y) <= 1e-8 * (1 + np.linalg.norm(f))


def test_psd_hessian_definite_on_nullspace():
    # H singular, but positive definite on {w1 = w2}
    H = np.diag([1.0, 1.0, 0.0])
    w, _, _ = solve_eq_qp(EqQpProblem(H, np.zeros(3), [[0.0, 0.0, 1.0]], [4.0]))
    np.testing.assert_allclose(w, [0.0, 0.0, 4.0], atol=1e-12)


def test_infeasible_constraints():
    Aeq = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(InfeasibleConstraints):
        solve_eq_qp(EqQpProblem(np.eye(2), np.zeros(2), Aeq, [1.0, 2.0]))


def test_indefinite_reduced_hessian():
    H = np.diag([1.0, -1.0])
    with pytest.raises(IndefiniteReducedHessian):
        solve_eq_qp(EqQpProblem(H, np.zeros(2)))


def test_problem_validation():
    with pytest.raises(ValueError):
        EqQpProblem([[1.0, 2.0], [0.0, 1.0]], np.zeros(2))
    with pytest.raises(DimensionMismatch):
        EqQpProblem(np.eye(2), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        EqQpProblem(np.eye(1), np.zeros(1), np.ones((2, 1)), np.ones(2))
    EqQpProblem(np.eye(1), np.zeros(1), np.ones((2, 1)), np.ones(2), overdetermined=True)
    with pytest.raises(ValueError):
        EqQpProblem(np.eye(2), [np.nan, 0.0])


def test_min_norm_identity(rng):
    b = rng.normal(size=3)
    np.testing.assert_allclose(min_norm_least_squares(np.eye(3), b), b)


def test_min_norm_line():
    np.testing.assert_allclose(min_norm_least_squares([[1.0, 1.0]], [2.0]), [1.0, 1.0])


def test_min_norm_matches_svd_oracle(rng):
    for _ in range(10):
        M = rng.normal(size=(5, 3)) @ rng.normal(size=(3, 8))
        b = rng.normal(size=5)
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        keep = s > 1e-10 * s[0]
        x_ref = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])
        x = min_norm_least_squares(M, b)
        assert np.linalg.norm(x - x_ref) <= 1e-10 * max(1.0, np.linalg.norm(x_ref))
        # orthogonal to the null space
        proj = x - np.linalg.pinv(M) @ M @ x
        assert np.linalg.norm(proj) <= 1e-9 * np.linalg.norm(x)


def test_min_norm_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        min_norm_least_squares(np.eye(3), np.ones(2))


def test_numerical_rank_examples():
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.eye(4), 1e-8) == 4
    assert numerical_rank(np.diag([1.0, 1e-3, 1e-12]), 1e-8) == 2
    with pytest.raises(ValueError):
        numerical_rank(np.eye(2), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_kkt_invariants_property(d, c, seed):
    c = min(c, d - 1)
    rng = np.random.default_rng(seed)
    H = random_spd(rng, d)
    f = rng.normal(size=d)
    Aeq = rng.normal(size=(c, d))
    beq = rng.normal(size=c)
    w, value, y = solve_eq_qp(EqQpProblem(H, f, Aeq, beq))
    assert np.linalg.norm(Aeq @ w - beq) <= 1e-9 * (1 + np.linalg.norm(beq))
    assert np.linalg.norm(H @ w + f + Aeq.T @ y) <= 1e-8 * (1 + np.linalg.norm(f))
    assert value == pytest.approx(0.5 * w @ H @ w + f @ w)
