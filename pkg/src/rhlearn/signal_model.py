"""
Linear signal models ``x(k+1) = A x(k) + B u(k)`` and their predictor maps.

A model is stored either as a :class:`SignalModel` or as the flat parameter
vector ``theta = [vec(A); vec(B)]`` with column-major vectorization.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, HorizonExceeded, RestorationFailed
from .qp_kernels import DEFAULT_RANK_TOL, numerical_rank

__all__ = [
    "SignalModel",
    "PredictorMaps",
    "theta_to_model",
    "model_to_theta",
    "build_predictor_maps",
    "predict",
    "controllability_matrix",
    "is_controllable",
    "controllability_margin",
    "blend",
    "blend_grid",
    "restore_controllability",
    "canonical_controllable_model",
]


@dataclass(frozen=True)
class SignalModel:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatch(
                f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("model has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.B.shape[1]

    def step(self, x, u):
        return self.A @ x + self.B @ u


def theta_to_model(theta, n, q):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != n * (n + q):
        raise DimensionMismatch(
            f"theta has length {theta.size}, expected {n * (n + q)} for n={n}, q={q}")
    A = theta[: n * n].reshape((n, n), order="F")
    B = theta[n * n:].reshape((n, q), order="F")
    return SignalModel(A.copy(), B.copy())


def model_to_theta(model):
    return np.concatenate([model.A.reshape(-1, order="F"),
                           model.B.reshape(-1, order="F")])


@dataclass(frozen=True)
class PredictorMaps:
    """Power maps ``A_i = A^i`` (i = 0..N) and ``B_i = A^i B`` (i = 0..N-1)."""

    N: int
    A: tuple
    B: tuple

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def q(self):
        return self.B[0].shape[1]

    def propagate(self, x0, inputs):
        """Predicted states ``x_0 .. x_N`` for a full input sequence."""
        inputs = np.asarray(inputs, dtype=float).reshape(self.N, self.q)
        return np.array([predict(self, x0, inputs[:i], i) for i in range(self.N + 1)])


def build_predictor_maps(model, N):
    if N < 1:
        raise ValueError("horizon N must be at least 1")
    A_i = [np.eye(model.n)]
    for _ in range(N):
        A_i.append(model.A @ A_i[-1])
    B_i = [a @ model.B for a in A_i[:N]]
    return PredictorMaps(N, tuple(A_i), tuple(B_i))


def predict(maps, x0, inputs, i):
    """i-step prediction ``A_i x0 + sum_l B_{i-1-l} u_l``."""
    if not 0 <= i <= maps.N:
        raise HorizonExceeded(f"step {i} outside horizon 0..{maps.N}")
    inputs = np.asarray(inputs, dtype=float).reshape(-1, maps.q) if i else ()
    if len(inputs) != i:
        raise DimensionMismatch(f"{len(inputs)} inputs supplied for a {i}-step prediction")
    x = maps.A[i] @ np.asarray(x0, dtype=float)
    for l in range(i):
        x = x + maps.B[i - 1 - l] @ inputs[l]
    return x


def controllability_matrix(model):
    blocks = [model.B]
    for _ in range(model.n - 1):
        blocks.append(model.A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(model, tol=DEFAULT_RANK_TOL):
    return numerical_rank(controllability_matrix(model), tol) == model.n


def controllability_margin(model):
    """Ratio of smallest to largest singular value of the controllability matrix."""
    s = np.linalg.svd(controllability_matrix(model), compute_uv=False)
    if s.size < model.n or s[0] == 0.0:
        return 0.0
    return float(s[model.n - 1] / s[0])


def blend(m_u, m_c, lam):
    """Convex combination ``(1 - lam) m_u + lam m_c`` of both A and B."""
    if m_u.A.shape != m_c.A.shape or m_u.B.shape != m_c.B.shape:
        raise DimensionMismatch("models to blend have different dimensions")
    return SignalModel((1.0 - lam) * m_u.A + lam * m_c.A,
                       (1.0 - lam) * m_u.B + lam * m_c.B)


def blend_grid(n, lam_max):
    """The ``2n^2 + 1`` equispaced weights strictly inside ``(0, lam_max)``."""
    count = 2 * n * n + 1
    return np.arange(1, count + 1) * (lam_max / (count + 1))


def restore_controllability(candidate, previous, n, q, lam_max=0.5, tol=DEFAULT_RANK_TOL,
                            margin=None):
    """Blend an estimate towards the previous one until it is controllable.

    Parameters
    ----------
    candidate, previous : ndarray
        Parameter vectors; ``previous`` must decode to a controllable model.
    n, q : int
        State and input dimension of the encoded models.
    lam_max : float
        Upper end of the admissible blending weights, in ``(0, 1)``.
    tol : float
        Relative rank tolerance of the controllability test.
    margin : float, optional
        Preferred conditioning of a blended model.  When given, the smallest
        grid weight whose blend has :func:`controllability_margin` above
        ``margin`` is used, falling back to the smallest weight passing
        ``tol``.  Without it the smallest weight passing ``tol`` is used,
        which can leave the result barely controllable and make the next
        restoration fail.

    Returns
    -------
    theta : ndarray
        ``(1 - lam) candidate + lam previous``.
    lam : float
        The selected grid weight, or 0 if ``candidate`` is already
        controllable.
    """
    if not 0.0 < lam_max < 1.0:
        raise ValueError("lam_max must lie in (0, 1)")
    candidate = np.asarray(candidate, dtype=float)
    previous = np.asarray(previous, dtype=float)
    m_u = theta_to_model(candidate, n, q)
    if is_controllable(m_u, tol):
        return candidate, 0.0
    if q > n:
        warnings.warn(f"input dimension {q} exceeds state dimension {n}; "
                      "the blending grid is not guaranteed to succeed",
                      RuntimeWarning, stacklevel=2)
    m_c = theta_to_model(previous, n, q)
    first_pass = None
    for lam in blend_grid(n, lam_max):
        ratio = controllability_margin(blend(m_u, m_c, lam))
        if ratio > tol and first_pass is None:
            first_pass = float(lam)
            if margin is None:
                break
        if margin is not None and ratio > margin:
            first_pass = float(lam)
            break
    if first_pass is None:
        raise RestorationFailed(
            f"no blending weight in (0, {lam_max}) gave a controllable model")
    return (1.0 - first_pass) * candidate + first_pass * previous, first_pass


def canonical_controllable_model(n, q, scale=1.0):
    """Block shift model: A moves each q-block up by one, B feeds the last block."""
    if q > n:
        raise DimensionMismatch(f"canonical model needs q <= n, got q={q}, n={n}")
    A = np.zeros((n, n))
    A[np.arange(n - q), np.arange(q, n)] = scale
    B = np.zeros((n, q))
    B[n - q:, :] = scale * np.eye(q)
    return SignalModel(A, B)
