"""
Dense linear-algebra and equality-constrained QP primitives.

The QP convention used here is

    minimize    1/2 w' H w + f' w
    subject to  Aeq w = beq

with multipliers ``y`` satisfying ``H w + f + Aeq' y = 0``.  Callers whose
objectives carry no factor 1/2 (everything in :mod:`rhlearn.rhc`) scale H
and f accordingly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, IndefiniteReducedHessian, InfeasibleConstraints

__all__ = [
    "DEFAULT_RANK_TOL",
    "EqQpProblem",
    "solve_eq_qp",
    "min_norm_least_squares",
    "numerical_rank",
]

DEFAULT_RANK_TOL = 1e-8

_SYMMETRY_TOL = 1e-12
_FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class EqQpProblem:
    """Equality-constrained quadratic program ``min 1/2 w'Hw + f'w, Aeq w = beq``.

    ``Aeq`` and ``beq`` may be omitted for an unconstrained problem.  Set
    ``overdetermined=True`` to allow more constraint rows than variables
    (the rows must then be consistent).
    """

    H: np.ndarray
    f: np.ndarray
    Aeq: np.ndarray = None
    beq: np.ndarray = None
    overdetermined: bool = False

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        d = H.shape[0]
        if H.shape != (d, d):
            raise DimensionMismatch(f"H must be square, got shape {H.shape}")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.shape != (d,):
            raise DimensionMismatch(f"f must have length {d}, got {f.size}")
        if self.Aeq is None:
            Aeq = np.zeros((0, d))
            beq = np.zeros(0)
        else:
            Aeq = np.asarray(self.Aeq, dtype=float).reshape(-1, d)
            beq = np.asarray(self.beq, dtype=float).reshape(-1)
            if beq.shape != (Aeq.shape[0],):
                raise DimensionMismatch(
                    f"beq must have length {Aeq.shape[0]}, got {beq.size}")
        for name, arr in (("H", H), ("f", f), ("Aeq", Aeq), ("beq", beq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        scale = max(np.max(np.abs(H), initial=0.0), 1.0)
        if np.max(np.abs(H - H.T), initial=0.0) > _SYMMETRY_TOL * scale:
            raise ValueError("H is not symmetric")
        if Aeq.shape[0] > d and not self.overdetermined:
            raise DimensionMismatch(
                f"{Aeq.shape[0]} constraints for {d} variables; "
                "pass overdetermined=True if intended")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "Aeq", Aeq)
        object.__setattr__(self, "beq", beq)

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def n_constraints(self):
        return self.Aeq.shape[0]

    def objective(self, w):
        w = np.asarray(w, dtype=float)
        return 0.5 * w @ self.H @ w + self.f @ w


def _ldl_solve(K, rhs):
    """Solve ``K x = rhs`` with a Bunch-Kaufman factorization.

    Returns the solution and the eigenvalues of the block-diagonal factor,
    whose signs give the inertia of ``K``.
    """
    lu, d, perm = sla.ldl(K, lower=True)
    T = lu[perm]
    y = sla.solve_triangular(T, rhs[perm], lower=True, unit_diagonal=True)
    z = np.linalg.solve(d, y)
    w = sla.solve_triangular(T.T, z, lower=False, unit_diagonal=True)
    x = np.empty_like(w)
    x[perm] = w
    return x, np.linalg.eigvalsh(d)


def _solve_kkt(p):
    d, c = p.dim, p.n_constraints
    K = np.zeros((d + c, d + c))
    K[:d, :d] = p.H
    K[:d, d:] = p.Aeq.T
    K[d:, :d] = p.Aeq
    rhs = np.concatenate([-p.f, p.beq])
    try:
        sol, eig = _ldl_solve(K, rhs)
    except (np.linalg.LinAlgError, ValueError):
        return None
    zero_tol = 1e-13 * max(np.max(np.abs(eig), initial=0.0), 1.0)
    n_pos = int(np.sum(eig > zero_tol))
    n_neg = int(np.sum(eig < -zero_tol))
    # inertia (d, c, 0) <=> Aeq full row rank and H positive definite on null(Aeq)
    if n_pos != d or n_neg != c or not np.all(np.isfinite(sol)):
        return None
    w, y = sol[:d], sol[d:]
    if not _is_accurate(p, w, y):
        return None
    return w, y


def _is_accurate(p, w, y):
    primal = np.linalg.norm(p.Aeq @ w - p.beq)
    dual = np.linalg.norm(p.H @ w + p.f + p.Aeq.T @ y)
    hscale = np.linalg.norm(p.H, 2) * np.linalg.norm(w)
    return (primal <= _FEASIBILITY_TOL * (1.0 + np.linalg.norm(p.beq))
            and dual <= 1e-10 * (1.0 + np.linalg.norm(p.f) + hscale))


def _solve_nullspace(p):
    d = p.dim
    if p.n_constraints:
        U, s, Vt = np.linalg.svd(p.Aeq)
        rank = int(np.sum(s > DEFAULT_RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        w_part = Vt[:rank].T @ ((U[:, :rank].T @ p.beq) / s[:rank])
        resid = np.linalg.norm(p.Aeq @ w_part - p.beq)
        if resid > _FEASIBILITY_TOL * (1.0 + np.linalg.norm(p.beq)):
            raise InfeasibleConstraints(
                f"constraints are inconsistent (residual {resid:.3e})")
        Z = Vt[rank:].T
    else:
        w_part = np.zeros(d)
        Z = np.eye(d)
    if Z.shape[1]:
        reduced = Z.T @ p.H @ Z
        try:
            cf = sla.cho_factor(0.5 * (reduced + reduced.T))
        except np.linalg.LinAlgError:
            raise IndefiniteReducedHessian(
                "H is not positive definite on the constraint null space") from None
        step = sla.cho_solve(cf, -(Z.T @ (p.H @ w_part + p.f)))
        w = w_part + Z @ step
    else:
        w = w_part
    if p.n_constraints:
        y = np.linalg.lstsq(p.Aeq.T, -(p.H @ w + p.f), rcond=None)[0]
    else:
        y = np.zeros(0)
    return w, y


def solve_eq_qp(p):
    """Solve an equality-constrained convex QP.

    The KKT system is factorized with a symmetric indefinite (LDL')
    decomposition.  When its inertia reveals redundant constraints or the
    solve is inaccurate, the problem is re-solved by null-space elimination,
    which also classifies the failure.

    Parameters
    ----------
    p : EqQpProblem

    Returns
    -------
    w : ndarray
        Minimizer.
    value : float
        ``1/2 w'Hw + f'w`` at the minimizer.
    multipliers : ndarray
        Lagrange multipliers, ``H w + f + Aeq' multipliers = 0``.

    Raises
    ------
    InfeasibleConstraints
        If ``Aeq w = beq`` has no solution.
    IndefiniteReducedHessian
        If H is not positive definite on the null space of ``Aeq``.
    """
    out = _solve_kkt(p)
    if out is None:
        out = _solve_nullspace(p)
    w, y = out
    return w, float(p.objective(w)), y


def min_norm_least_squares(M, b, rcond=None):
    """Minimum-norm minimizer of ``||M x - b||``, i.e. ``pinv(M) @ b``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != M.shape[0]:
        raise DimensionMismatch(
            f"M has {M.shape[0]} rows but b has length {b.shape[0]}")
    if M.size == 0:
        return np.zeros(M.shape[1])
    x, *_ = sla.lstsq(M, b, cond=rcond, lapack_driver="gelsd")
    return x


def numerical_rank(M, tol=DEFAULT_RANK_TOL):
    """Number of singular values above ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
