"""
Plants, the closed-loop runner and trajectory logging.

The loop sees only raw outputs ``y`` and the inputs it applied; plant
states are read by the harness for diagnostics only.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyLog, NumericalFailure
from .estimator import estimator_update
from .lifting import (HistoryBuffer, augment_model, augmented_state, extract_raw_input,
                      lift_input, lift_output)
from .rhc import epsilon_at, gamma, policy_step
from .signal_model import SignalModel, build_predictor_maps

__all__ = [
    "Plant",
    "LinearPlant",
    "RobotArmPlant",
    "sec6a_plant",
    "robot_arm_plant",
    "linear_plant_step",
    "robot_arm_step",
    "ROBOT_ARM_COEFFS",
    "lifted_model_of",
    "StepRecord",
    "TrajectoryLog",
    "ClosedLoopResult",
    "run_closed_loop",
    "convergence_metrics",
]


class Plant:
    """Deterministic discrete-time plant ``z+ = step(z, v)``, ``y = output(z)``."""

    n = p = q = None
    z0 = None

    def step(self, z, v):
        raise NotImplementedError

    def output(self, z):
        raise NotImplementedError


class LinearPlant(Plant):
    def __init__(self, F, G, H, z0=None):
        self.F = np.atleast_2d(np.asarray(F, dtype=float))
        G = np.asarray(G, dtype=float)
        self.G = G.reshape(-1, 1) if G.ndim == 1 else G
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        self.n = self.F.shape[0]
        self.q = self.G.shape[1]
        self.p = self.H.shape[0]
        if self.F.shape != (self.n, self.n) or self.G.shape[0] != self.n or self.H.shape[1] != self.n:
            raise DimensionMismatch("F, G, H have inconsistent dimensions")
        self.z0 = np.zeros(self.n) if z0 is None else np.asarray(z0, dtype=float).reshape(self.n)

    def step(self, z, v):
        return linear_plant_step(self, z, v)

    def output(self, z):
        return self.H @ z


def linear_plant_step(plant, z, v):
    return plant.F @ np.asarray(z, dtype=float) + plant.G @ np.atleast_1d(np.asarray(v, dtype=float))


SEC6A_F = np.array([[0.0, 1.0, 0.1],
                    [0.0, 1.02, 0.0],
                    [0.0, 0.0, 0.92]])
SEC6A_G = np.array([[0.0], [1.0], [0.0]])
SEC6A_H = np.array([[1.0, 0.0, 1.0]])


def sec6a_plant(z0=(0.1, 0.1, -10.0)):
    """Unstable, stabilizable and observable third-order linear benchmark."""
    return LinearPlant(SEC6A_F, SEC6A_G, SEC6A_H, z0)


ROBOT_ARM_COEFFS = (36.4, 1.7, 1309.0, 1000.0, 3.6, 100.0)


def robot_arm_step(x, u, h=0.01, coeffs=ROBOT_ARM_COEFFS):
    """Euler-forward single-link robot arm driven by a DC motor.

    State is (angle, angular velocity, motor current); the input is the
    motor voltage.  ``coeffs = (c1, ..., c6)`` enter as

        x2+ = x2 + h (c1 x3 - c2 x2 - c3 sin x1)
        x3+ = x3 + h (-c4 x3 - c5 x2 + c6 u)
    """
    x1, x2, x3 = np.asarray(x, dtype=float)
    u = float(np.asarray(u, dtype=float).reshape(-1)[0])
    c1, c2, c3, c4, c5, c6 = coeffs
    return np.array([
        x1 + h * x2,
        x2 + h * (c1 * x3 - c2 * x2 - c3 * math.sin(x1)),
        x3 + h * (-c4 * x3 - c5 * x2 + c6 * u),
    ])


class RobotArmPlant(Plant):
    n, p, q = 3, 3, 1

    def __init__(self, z0=(5.0, -5.0, 1.0), h=0.01, coeffs=ROBOT_ARM_COEFFS):
        self.h = h
        self.coeffs = tuple(float(c) for c in coeffs)
        if len(self.coeffs) != 6:
            raise ValueError("robot arm needs six coefficients")
        self.z0 = np.asarray(z0, dtype=float).reshape(3)

    def step(self, z, v):
        return robot_arm_step(z, v, self.h, self.coeffs)

    def output(self, z):
        return np.asarray(z, dtype=float).copy()


def robot_arm_plant(z0=(5.0, -5.0, 1.0), coeffs=ROBOT_ARM_COEFFS):
    return RobotArmPlant(z0, coeffs=coeffs)


def lifted_model_of(plant, m, tol=1e-9):
    """An exact lifted model ``x(k+1) = A x(k) + B u(k)`` of a linear plant.

    Lifted signals at time k are linear in ``w = (z(k-m+1), v(k-m+1), ..., v(k))``;
    writing ``x(k) = L1 w``, ``u(k) = L2 w`` and ``x(k+1) = L3 w`` gives
    ``[A B] = L3 pinv([L1; L2])``, which is exact when the plant is
    observable with ``m >= n``.  Valid for ``k >= m - 1``.
    """
    n, p, q = plant.n, plant.p, plant.q
    dim = n + m * q
    F, G, H = plant.F, plant.G, plant.H

    def outputs(w, steps):
        # y at times k-m+1 .. k-m+steps, driven by the first steps-1 inputs
        z = w[:n]
        vs = w[n:].reshape(m, q)
        ys = []
        for j in range(steps):
            ys.append(H @ z)
            if j < m:
                z = F @ z + G @ vs[j]
        return ys

    L1 = np.zeros((m * p, dim))
    L2 = np.zeros((m * q, dim))
    L3 = np.zeros((m * p, dim))
    for c in range(dim):
        w = np.zeros(dim)
        w[c] = 1.0
        ys = outputs(w, m + 1)
        vs = w[n:].reshape(m, q)
        L1[:, c] = np.concatenate(ys[m - 1::-1])
        L3[:, c] = np.concatenate(ys[m:0:-1])
        L2[:, c] = np.concatenate(vs[::-1])
    L = np.vstack([L1, L2])
    AB = L3 @ np.linalg.pinv(L)
    if np.linalg.norm(AB @ L - L3) > tol * max(1.0, np.linalg.norm(L3)):
        raise ValueError("plant admits no exact lifted model for this m")
    return SignalModel(AB[:, : m * p], AB[:, m * p:])


@dataclass(frozen=True)
class StepRecord:
    k: int
    y: np.ndarray
    v: np.ndarray
    z_norm: float
    eps: float
    gamma_over_eps: float
    v1_value: float
    est_residual: float
    lambda_used: float
    controllable: bool


@dataclass
class TrajectoryLog:
    records: list = field(default_factory=list)
    failure: str = None

    def append(self, rec):
        if self.records and rec.k <= self.records[-1].k:
            raise ValueError("records must have increasing k")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ok(self):
        return self.failure is None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def y(self):
        return np.array([r.y for r in self.records])

    @property
    def v(self):
        return np.array([r.v for r in self.records])


@dataclass
class ClosedLoopResult:
    log: TrajectoryLog
    states: np.ndarray
    estimator: object


def run_closed_loop(plant, lift_cfg, est_state, rhc_cfg, T, log_sink=None, fixed_model=None):
    """Run the adaptive receding-horizon loop for ``T`` steps.

    Each step pushes the measured ``y(k)`` into the history, updates the
    estimator with ``(x(k), u(k-1))``, augments the estimated model with
    input shift states, solves the V1 problem at ``eps(k)`` and applies the
    first raw input.

    Parameters
    ----------
    plant : Plant
    lift_cfg : LiftingConfig
    est_state : EstimatorState or None
        Ignored when ``fixed_model`` is given.
    rhc_cfg : RhcConfig
        Weights on the augmented state of dimension ``lift_cfg.n_augmented``.
    T : int
        Number of steps.
    log_sink : callable, optional
        Called with every :class:`StepRecord` as it is produced.
    fixed_model : SignalModel, optional
        Use this lifted model throughout instead of estimating one.

    Returns
    -------
    ClosedLoopResult
        Log, plant states ``z(0) .. z(T)`` and the final estimator state.
        A numerical breakdown stops the loop early and is recorded in
        ``log.failure``.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if (plant.p, plant.q) != (lift_cfg.p, lift_cfg.q):
        raise DimensionMismatch("plant and lifting dimensions differ")
    if rhc_cfg.n != lift_cfg.n_augmented or rhc_cfg.q != lift_cfg.q:
        raise DimensionMismatch(
            f"controller weights must be sized for the augmented state "
            f"({lift_cfg.n_augmented}) and raw input ({lift_cfg.q})")
    if fixed_model is None and (est_state.n, est_state.q) != (lift_cfg.n_lifted, lift_cfg.q_lifted):
        raise DimensionMismatch("estimator dimensions do not match the lifting")

    log = TrajectoryLog()
    buf = HistoryBuffer(lift_cfg)
    z = plant.z0.copy()
    states = [z]
    for k in range(T):
        y = plant.output(z)
        buf.push_output(y)
        x = lift_output(buf)
        try:
            if fixed_model is None:
                est_state, diag = estimator_update(est_state, x, lift_input(buf))
                model = est_state.model
                resid, lam, ctrb = diag.residual, diag.lam, diag.controllable
            else:
                model, resid, lam, ctrb = fixed_model, 0.0, 0.0, True
            aug = augment_model(model, lift_cfg)
            maps = build_predictor_maps(aug.model, rhc_cfg.N)
            xi = augmented_state(buf)
            u0, sol = policy_step(maps, xi, k, rhc_cfg)
        except NumericalFailure as exc:
            log.failure = f"k={k}: {type(exc).__name__}: {exc}"
            break
        v = extract_raw_input(u0, lift_cfg)
        eps = epsilon_at(k, rhc_cfg.eps)
        rec = StepRecord(k=k, y=np.asarray(y, dtype=float), v=v,
                         z_norm=float(np.linalg.norm(z)), eps=eps,
                         gamma_over_eps=gamma(xi, rhc_cfg.alpha) / eps,
                         v1_value=sol.value, est_residual=resid,
                         lambda_used=lam, controllable=bool(ctrb))
        log.append(rec)
        if log_sink is not None:
            log_sink(rec)
        buf.push_input(v)
        z = plant.step(z, v)
        states.append(z)
    return ClosedLoopResult(log, np.array(states), est_state)


def convergence_metrics(log, tau=1e-3):
    """Peak output norm, maximum over the last 10% of steps, settling index.

    The settling index is the first k from which ``||y||`` stays at or below
    ``tau``; it is ``None`` if the log ends above ``tau``.
    """
    if not len(log):
        raise EmptyLog("log has no records")
    norms = np.linalg.norm(np.atleast_2d(log.y).reshape(len(log), -1), axis=1)
    tail = max(1, math.ceil(0.1 * len(norms)))
    above = np.nonzero(norms > tau)[0]
    if above.size == 0:
        settle = 0
    elif above[-1] == len(norms) - 1:
        settle = None
    else:
        settle = int(above[-1] + 1)
    return float(norms.max()), float(norms[-tail:].max()), settle
