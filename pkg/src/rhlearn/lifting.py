"""
ARX lifting of raw input/output streams and integrator-chain augmentation.

With ``m`` stacked samples the lifted signals are

    x(k) = [y(k); y(k-1); ...; y(k-m+1)]        (length m*p)
    u(k) = [v(k); v(k-1); ...; v(k-m+1)]        (length m*q)

and samples before time zero are exact zeros.  Because ``u(k)`` contains
past raw inputs, a lifted model ``x+ = A x + B u`` is turned into a model
driven by ``v(k)`` alone by appending shift states ``zeta_1 .. zeta_{m-1}``
with ``zeta_{m-j}(k) = v(k-j)``.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .signal_model import SignalModel

__all__ = [
    "LiftingConfig",
    "HistoryBuffer",
    "AugmentedModel",
    "lift_output",
    "lift_input",
    "augment_model",
    "augmented_state",
    "extract_raw_input",
]


@dataclass(frozen=True)
class LiftingConfig:
    m: int
    p: int
    q: int

    def __post_init__(self):
        if self.m < 1 or self.p < 1 or self.q < 1:
            raise ValueError("m, p and q must be positive")

    @property
    def n_lifted(self):
        return self.m * self.p

    @property
    def q_lifted(self):
        return self.m * self.q

    @property
    def n_augmented(self):
        return self.m * self.p + (self.m - 1) * self.q


class HistoryBuffer:
    """The last ``m`` raw outputs and inputs, newest first, zero-initialized."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.y = deque([np.zeros(cfg.p) for _ in range(cfg.m)], maxlen=cfg.m)
        self.v = deque([np.zeros(cfg.q) for _ in range(cfg.m)], maxlen=cfg.m)

    def push_output(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.cfg.p:
            raise DimensionMismatch(f"output has size {y.size}, expected {self.cfg.p}")
        self.y.appendleft(y)

    def push_input(self, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.cfg.q:
            raise DimensionMismatch(f"input has size {v.size}, expected {self.cfg.q}")
        self.v.appendleft(v)

    def copy(self):
        other = HistoryBuffer(self.cfg)
        other.y = deque(self.y, maxlen=self.cfg.m)
        other.v = deque(self.v, maxlen=self.cfg.m)
        return other


def lift_output(buf, m=None):
    m = buf.cfg.m if m is None else m
    return np.concatenate(list(buf.y)[:m])


def lift_input(buf, m=None):
    m = buf.cfg.m if m is None else m
    return np.concatenate(list(buf.v)[:m])


@dataclass(frozen=True)
class AugmentedModel:
    """Lifted model extended by input shift states.

    State layout is ``[x; zeta_1; ...; zeta_{m-1}]`` with ``x`` occupying
    the first ``m*p`` entries and each ``zeta`` block ``q`` entries.
    """

    A: np.ndarray
    B: np.ndarray
    cfg: LiftingConfig

    @property
    def model(self):
        return SignalModel(self.A, self.B)

    def zeta_slice(self, j):
        """Index range of ``zeta_j`` (1-based) in the augmented state."""
        start = self.cfg.n_lifted + (j - 1) * self.cfg.q
        return slice(start, start + self.cfg.q)


def augment_model(model, cfg):
    n, q, m = cfg.n_lifted, cfg.q, cfg.m
    if model.A.shape != (n, n) or model.B.shape != (n, cfg.q_lifted):
        raise DimensionMismatch(
            f"model dimensions {model.A.shape}, {model.B.shape} do not match "
            f"lifting with m={m}, p={cfg.p}, q={q}")
    if m == 1:
        return AugmentedModel(model.A.copy(), model.B.copy(), cfg)
    na = cfg.n_augmented
    A = np.zeros((na, na))
    B = np.zeros((na, q))
    A[:n, :n] = model.A
    B[:n] = model.B[:, :q]
    # B_j multiplies v(k-j) = zeta_{m-j}
    for j in range(1, m):
        zj = m - j
        start = n + (zj - 1) * q
        A[:n, start:start + q] = model.B[:, j * q:(j + 1) * q]
    for zj in range(1, m - 1):
        row = n + (zj - 1) * q
        A[row:row + q, row + q:row + 2 * q] = np.eye(q)
    B[n + (m - 2) * q:, :] = np.eye(q)
    return AugmentedModel(A, B, cfg)


def augmented_state(buf):
    """``[x(k); zeta_1(k); ...; zeta_{m-1}(k)]`` before ``v(k)`` is pushed."""
    cfg = buf.cfg
    x = lift_output(buf)
    past = list(buf.v)  # v(k-1), v(k-2), ..., v(k-m)
    zetas = [past[cfg.m - 1 - zj] for zj in range(1, cfg.m)]
    return np.concatenate([x] + zetas) if zetas else x


def extract_raw_input(u0, cfg):
    """Raw input ``v(k)`` from the controller's first input."""
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if u0.size not in (cfg.q, cfg.q_lifted):
        raise DimensionMismatch(f"input of size {u0.size} is neither raw nor lifted")
    return u0[: cfg.q].copy()
