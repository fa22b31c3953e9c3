"""
Proximal estimation of a linear signal model from lifted data.

Each update solves

    theta* = argmin  c(s - R theta) + D(theta, theta_prev)

over a sliding window of ``N_bar`` regression equations, then blends
``theta*`` towards ``theta_prev`` only as far as needed to keep the decoded
model controllable.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.optimize

from .errors import DimensionMismatch, NumericalFailure
from .qp_kernels import DEFAULT_RANK_TOL
from .signal_model import (canonical_controllable_model, is_controllable,
                           model_to_theta, restore_controllability, theta_to_model)

__all__ = [
    "RegressionData",
    "BregmanGenerator",
    "ConvexLoss",
    "EstimatorState",
    "UpdateDiagnostics",
    "build_regression",
    "bregman_distance",
    "proximal_step",
    "estimator_update",
    "init_estimator",
]


@dataclass(frozen=True)
class RegressionData:
    s: np.ndarray
    R: np.ndarray

    def residual(self, theta):
        return self.s - self.R @ theta


def build_regression(x_hist, u_hist, N_bar):
    """Stack the window equations ``x(j) = A x(j-1) + B u(j-1)``.

    Parameters
    ----------
    x_hist : sequence of ndarray
        Lifted states, most recent first: ``x(k), x(k-1), ..., x(k-N_bar)``.
        Missing entries are treated as zeros.
    u_hist : sequence of ndarray
        Lifted inputs, most recent first: ``u(k-1), ..., u(k-N_bar)``.
    N_bar : int
        Window length.

    Returns
    -------
    RegressionData
        ``s`` has length ``n*N_bar`` and ``R`` has ``n*(n+q)`` columns, so
        that ``s = R [vec(A); vec(B)]`` holds for an exact model.
    """
    if N_bar < 1:
        raise ValueError("N_bar must be at least 1")
    if not len(x_hist) or not len(u_hist):
        raise DimensionMismatch("histories must contain at least one entry to fix dimensions")
    n = np.asarray(x_hist[0]).size
    q = np.asarray(u_hist[0]).size
    xs = [np.asarray(x, dtype=float).reshape(-1) for x in list(x_hist)[: N_bar + 1]]
    us = [np.asarray(u, dtype=float).reshape(-1) for u in list(u_hist)[:N_bar]]
    if any(x.size != n for x in xs) or any(u.size != q for u in us):
        raise DimensionMismatch("history entries have inconsistent sizes")
    xs += [np.zeros(n)] * (N_bar + 1 - len(xs))
    us += [np.zeros(q)] * (N_bar - len(us))
    eye = np.eye(n)
    s = np.concatenate(xs[:N_bar])
    R = np.vstack([np.hstack([np.kron(xs[j + 1], eye), np.kron(us[j], eye)])
                   for j in range(N_bar)])
    return RegressionData(s, R)


@dataclass(frozen=True)
class BregmanGenerator:
    """Quadratic generator ``g(x) = x'Px`` with ``P`` positive definite.

    ``D(x, y) = g(x) - g(y) - (x - y)' grad g(y) = (x - y)' P (x - y)``.
    Non-quadratic generators can be supplied through ``g`` and ``grad``;
    they are only used by the iterative solver path.
    """

    P: np.ndarray
    g: object = None
    grad: object = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise ValueError("Bregman generator matrix must be positive definite") from None
        object.__setattr__(self, "P", P)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @property
    def is_quadratic(self):
        return self.g is None

    def value(self, x):
        if self.g is not None:
            return float(self.g(x))
        return float(x @ self.P @ x)

    def gradient(self, x):
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return 2.0 * self.P @ x


def bregman_distance(gen, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch("arguments have different shapes")
    if gen.is_quadratic:
        d = x - y
        return float(d @ gen.P @ d)
    return gen.value(x) - gen.value(y) - float((x - y) @ gen.gradient(y))


@dataclass(frozen=True)
class ConvexLoss:
    """Custom loss ``c(e)`` given by value and gradient callables."""

    value: object
    gradient: object


@dataclass(frozen=True)
class EstimatorState:
    """Current estimate, window history and update settings.

    ``restore_margin`` is the conditioning preferred for blended models (see
    :func:`rhlearn.signal_model.restore_controllability`); ``None`` selects
    the smallest passing blending weight.
    """

    theta: np.ndarray
    n: int
    q: int
    N_bar: int
    W: np.ndarray
    gen: BregmanGenerator
    lam_max: float = 0.5
    tol: float = DEFAULT_RANK_TOL
    loss: ConvexLoss = None
    restore_margin: float = 1e-6
    # most recent first; x_hist holds N_bar + 1 states, u_hist N_bar inputs
    x_hist: tuple = field(default=())
    u_hist: tuple = field(default=())

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size != self.n * (self.n + self.q):
            raise DimensionMismatch("theta length does not match (n, q)")
        if not 0.0 < self.lam_max < 1.0:
            raise ValueError("lam_max must lie in (0, 1)")
        if self.gen.P.shape != (theta.size, theta.size):
            raise DimensionMismatch("Bregman generator has the wrong dimension")
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if W.shape != (self.n * self.N_bar,) * 2:
            raise DimensionMismatch("loss weight W has the wrong dimension")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "W", W)
        if not self.x_hist:
            object.__setattr__(self, "x_hist",
                               tuple(np.zeros(self.n) for _ in range(self.N_bar + 1)))
        if not self.u_hist:
            object.__setattr__(self, "u_hist",
                               tuple(np.zeros(self.q) for _ in range(self.N_bar)))

    @property
    def model(self):
        return theta_to_model(self.theta, self.n, self.q)

    def regression(self):
        return build_regression(self.x_hist, self.u_hist, self.N_bar)


def init_estimator(n, q, N_bar, theta0=None, W=None, P=None, lam_max=0.5,
                   tol=DEFAULT_RANK_TOL, loss=None, restore_margin=1e-6):
    """Estimator with identity weights and the canonical controllable start."""
    if theta0 is None:
        theta0 = model_to_theta(canonical_controllable_model(n, q))
    theta0 = np.asarray(theta0, dtype=float)
    if not is_controllable(theta_to_model(theta0, n, q), tol):
        raise ValueError("initial model must be controllable")
    dim = n * (n + q)
    W = np.eye(n * N_bar) if W is None else W
    gen = BregmanGenerator(np.eye(dim) if P is None else P)
    return EstimatorState(theta0, n, q, N_bar, W, gen, lam_max, tol, loss, restore_margin)


def proximal_step(state, reg):
    """Minimizer of ``(s - R t)' W (s - R t) + D(t, theta)``.

    For the quadratic loss and generator this is the closed form
    ``(R'WR + P)^{-1} (R'W s + P theta)``.
    """
    theta = state.theta
    if state.loss is None and state.gen.is_quadratic:
        RtW = reg.R.T @ state.W
        lhs = RtW @ reg.R + state.gen.P
        rhs = RtW @ reg.s + state.gen.P @ theta
        try:
            theta_star = sla.cho_solve(sla.cho_factor(lhs), rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"proximal step factorization failed: {exc}") from None
        if not np.all(np.isfinite(theta_star)):
            raise NumericalFailure("proximal step produced non-finite parameters")
        return theta_star
    return _proximal_step_iterative(state, reg)


def _proximal_step_iterative(state, reg):
    gen = state.gen
    loss = state.loss
    if loss is None:
        W = state.W
        loss = ConvexLoss(lambda e: float(e @ W @ e), lambda e: 2.0 * W @ e)
    grad_prev = gen.gradient(state.theta)

    def fun(t):
        e = reg.residual(t)
        return loss.value(e) + bregman_distance(gen, t, state.theta)

    def jac(t):
        e = reg.residual(t)
        return -reg.R.T @ loss.gradient(e) + gen.gradient(t) - grad_prev

    res = scipy.optimize.minimize(fun, state.theta, jac=jac, method="Newton-CG",
                                  options={"xtol": 1e-12, "maxiter": 500})
    if not np.all(np.isfinite(res.x)):
        raise NumericalFailure(f"iterative proximal step failed: {res.message}")
    return res.x


@dataclass(frozen=True)
class UpdateDiagnostics:
    residual: float
    lam: float
    controllable: bool
    skipped: bool
    candidate_controllable: bool = True


def estimator_update(state, new_x, new_u):
    """Push ``x(k)`` and ``u(k-1)``, then run one proximal update.

    Returns the new state and an :class:`UpdateDiagnostics` record.  The
    update is skipped (parameters held) while the regression matrix is
    identically zero, since the proximal step would return the anchor.
    """
    new_x = np.asarray(new_x, dtype=float).reshape(-1)
    new_u = np.asarray(new_u, dtype=float).reshape(-1)
    if new_x.size != state.n or new_u.size != state.q:
        raise DimensionMismatch("new data does not match estimator dimensions")
    x_hist = (new_x,) + state.x_hist[: state.N_bar]
    u_hist = (new_u,) + state.u_hist[: state.N_bar - 1]
    state = replace(state, x_hist=x_hist, u_hist=u_hist)
    reg = state.regression()

    if not np.any(reg.R):
        resid = float(np.linalg.norm(reg.residual(state.theta)))
        ctrb = is_controllable(state.model, state.tol)
        return state, UpdateDiagnostics(resid, 0.0, ctrb, True, ctrb)

    theta_star = proximal_step(state, reg)
    theta, lam = restore_controllability(theta_star, state.theta, state.n, state.q,
                                         state.lam_max, state.tol, state.restore_margin)
    diag = UpdateDiagnostics(
        residual=float(np.linalg.norm(reg.residual(theta_star))),
        lam=lam,
        controllable=is_controllable(theta_to_model(theta, state.n, state.q), state.tol),
        skipped=False,
        candidate_controllable=lam == 0.0,
    )
    return replace(state, theta=theta), diag
