"""
Receding-horizon control with a time-varying terminal weight.

Three finite-horizon problems share the predictor ``x_i = A_i x + sum B_{i-1-l} u_l``:

* ``V1``: stage cost plus ``Gamma(x)/eps * x_N' Q_N x_N`` (the control law),
* ``V2``: terminal cost ``x_N' Q_N x_N`` only, least-norm minimizer,
* ``V3``: stage cost with the terminal state pinned to ``r``.

Objectives carry no factor 1/2; :func:`rhlearn.qp_kernels.solve_eq_qp` is
called with doubled Hessian and linear term.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NumericalFailure, TerminalInfeasible
from .qp_kernels import EqQpProblem, min_norm_least_squares, solve_eq_qp

__all__ = [
    "EpsilonSchedule",
    "RhcConfig",
    "RhcSolution",
    "gamma",
    "epsilon_at",
    "stage_cost",
    "stacked_prediction",
    "solve_v1",
    "solve_v2",
    "solve_v3",
    "policy_step",
]

_REACH_TOL = 1e-6


@dataclass(frozen=True)
class EpsilonSchedule:
    """``eps(k) = c0 / (1 + c1 k)``."""

    c0: float = 1.0
    c1: float = 1000.0

    def __post_init__(self):
        if self.c0 <= 0 or self.c1 < 0:
            raise ValueError("epsilon schedule needs c0 > 0 and c1 >= 0")

    def __call__(self, k):
        return epsilon_at(k, self)


def _check_pd(name, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be a symmetric matrix")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return M


@dataclass(frozen=True)
class RhcConfig:
    N: int
    Q: np.ndarray
    R: np.ndarray
    Q_N: np.ndarray
    alpha: float = 1.0
    eps: EpsilonSchedule = EpsilonSchedule()

    def __post_init__(self):
        Q = _check_pd("Q", self.Q)
        R = _check_pd("R", self.R)
        Q_N = _check_pd("Q_N", self.Q_N)
        if Q.shape != Q_N.shape:
            raise DimensionMismatch("Q and Q_N must have the same size")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.N < Q.shape[0]:
            raise ValueError(f"horizon N={self.N} is shorter than the state dimension {Q.shape[0]}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q_N", Q_N)

    @classmethod
    def scaled(cls, n, q, N, q_scale, r_scale, qn_scale, alpha=1.0, eps=EpsilonSchedule()):
        """Configuration with weights that are multiples of the identity."""
        return cls(N, q_scale * np.eye(n), r_scale * np.eye(q), qn_scale * np.eye(n), alpha, eps)

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def q(self):
        return self.R.shape[0]


@dataclass(frozen=True)
class RhcSolution:
    inputs: np.ndarray  # (N, q)
    states: np.ndarray  # (N + 1, n)
    value: float

    @property
    def u0(self):
        return self.inputs[0]

    @property
    def terminal(self):
        return self.states[-1]


def gamma(x, alpha=1.0):
    x = np.asarray(x, dtype=float)
    return float(alpha * (x @ x))


def epsilon_at(k, sched):
    if k < 0:
        raise ValueError("time index must be nonnegative")
    return sched.c0 / (1.0 + sched.c1 * k)


def stacked_prediction(maps, N=None):
    """Return ``(Phi, S)`` with ``x_i = Phi[i] x + S[i] U`` for stacked inputs U."""
    N = maps.N if N is None else N
    if N > maps.N:
        raise DimensionMismatch(f"maps cover {maps.N} steps, {N} requested")
    n, q = maps.n, maps.q
    S = np.zeros((N + 1, n, N * q))
    for i in range(1, N + 1):
        for l in range(i):
            S[i, :, l * q:(l + 1) * q] = maps.B[i - 1 - l]
    return np.array(maps.A[: N + 1]), S


def stage_cost(sol, cfg):
    """``sum_{i<N} x_i'Q x_i + u_i'R u_i`` of a solution."""
    X = sol.states[:-1]
    U = sol.inputs
    return float(np.einsum("ij,jk,ik->", X, cfg.Q, X) + np.einsum("ij,jk,ik->", U, cfg.R, U))


def _solution(Phi, S, x, U, q):
    states = Phi @ x + S @ U
    return U.reshape(-1, q), states


def _check_inputs(maps, x, cfg):
    x = np.asarray(x, dtype=float).reshape(-1)
    if maps.N < cfg.N:
        raise DimensionMismatch(f"maps cover {maps.N} steps, horizon is {cfg.N}")
    if x.size != maps.n or cfg.n != maps.n or cfg.q != maps.q:
        raise DimensionMismatch("state, maps and weights have inconsistent dimensions")
    return x


def _stage_hessian(S, cfg):
    N = cfg.N
    H = sla.block_diag(*([cfg.R] * N))
    for i in range(N):
        H = H + S[i].T @ cfg.Q @ S[i]
    return H


def solve_v1(maps, x, k, eps, cfg):
    """Minimize stage cost plus ``Gamma(x)/eps`` times the terminal cost.

    The objective is written as ``||M U + b||^2`` in the stacked inputs and
    solved by orthogonal factorization; the normal equations become too
    ill-conditioned once ``Gamma(x)/eps`` is large.  ``k`` is the time index
    of the predictor family and enters only through ``maps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = _check_inputs(maps, x, cfg)
    Phi, S = stacked_prediction(maps, cfg.N)
    weight = gamma(x, cfg.alpha) / eps
    Lq = np.linalg.cholesky(cfg.Q).T
    Lr = np.linalg.cholesky(cfg.R).T
    Ln = np.sqrt(weight) * np.linalg.cholesky(cfg.Q_N).T
    M = np.vstack([Lq @ S[i] for i in range(cfg.N)]
                  + [sla.block_diag(*([Lr] * cfg.N))]
                  + [Ln @ S[-1]])
    b = np.concatenate([Lq @ Phi[i] @ x for i in range(cfg.N)]
                       + [np.zeros(cfg.N * cfg.q)]
                       + [Ln @ Phi[-1] @ x])
    U = np.linalg.lstsq(M, -b, rcond=None)[0]
    if not np.all(np.isfinite(U)):
        raise NumericalFailure("V1 solve produced non-finite inputs")
    inputs, states = _solution(Phi, S, x, U, cfg.q)
    sol = RhcSolution(inputs, states, 0.0)
    xN = states[-1]
    value = stage_cost(sol, cfg) + weight * float(xN @ cfg.Q_N @ xN)
    if not np.isfinite(value):
        raise NumericalFailure("V1 value is not finite")
    return RhcSolution(inputs, states, value)


def solve_v2(maps, x, cfg, rcond=None):
    """Least-norm input sequence minimizing the terminal cost alone."""
    x = _check_inputs(maps, x, cfg)
    Phi, S = stacked_prediction(maps, cfg.N)
    L = np.linalg.cholesky(cfg.Q_N)
    U = min_norm_least_squares(L.T @ S[-1], -(L.T @ Phi[-1] @ x), rcond=rcond)
    inputs, states = _solution(Phi, S, x, U, cfg.q)
    xN = states[-1]
    return RhcSolution(inputs, states, float(xN @ cfg.Q_N @ xN))


def solve_v3(maps, x, r, cfg):
    """Minimize the stage cost subject to ``x_N = r``.

    Raises
    ------
    TerminalInfeasible
        If ``r`` is not reachable from ``x`` in ``N`` steps.
    """
    x = _check_inputs(maps, x, cfg)
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.size != maps.n:
        raise DimensionMismatch("terminal target has the wrong size")
    Phi, S = stacked_prediction(maps, cfg.N)
    Aeq = S[-1]
    beq = r - Phi[-1] @ x
    U_ls = min_norm_least_squares(Aeq, beq)
    resid = np.linalg.norm(Aeq @ U_ls - beq)
    if resid > _REACH_TOL * (1.0 + np.linalg.norm(r)):
        raise TerminalInfeasible(f"terminal state not reachable (residual {resid:.3e})")
    H = _stage_hessian(S, cfg)
    f = sum(S[i].T @ cfg.Q @ Phi[i] @ x for i in range(cfg.N))
    H = 0.5 * (H + H.T)
    U, _, _ = solve_eq_qp(EqQpProblem(2.0 * H, 2.0 * f, Aeq, beq, overdetermined=True))
    inputs, states = _solution(Phi, S, x, U, cfg.q)
    sol = RhcSolution(inputs, states, 0.0)
    return RhcSolution(inputs, states, stage_cost(sol, cfg))


def policy_step(maps, x, k, cfg):
    """Receding-horizon input: first element of the V1 solution at ``eps(k)``."""
    sol = solve_v1(maps, x, k, epsilon_at(k, cfg.eps), cfg)
    return sol.u0.copy(), sol
