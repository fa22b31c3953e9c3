import math

import numpy as np
import pytest

from rhlearn.errors import DimensionMismatch, EmptyLog
from rhlearn.estimator import estimator_update, init_estimator
from rhlearn.lifting import (HistoryBuffer, LiftingConfig, augment_model, augmented_state,
                             lift_input, lift_output)
from rhlearn.rhc import EpsilonSchedule, RhcConfig, policy_step
from rhlearn.signal_model import build_predictor_maps
from rhlearn.simulation import (LinearPlant, StepRecord, TrajectoryLog, convergence_metrics,
                                lifted_model_of, linear_plant_step, robot_arm_plant,
                                robot_arm_step, run_closed_loop, sec6a_plant)


def sec6a_setup(T=41, z0=(0.1, 0.1, -10.0)):
    plant = sec6a_plant(z0)
    lift = LiftingConfig(4, 1, 1)
    est = init_estimator(4, 4, 8)
    rhc = RhcConfig.scaled(lift.n_augmented, 1, 20, 100, 10000, 100, 1.0, EpsilonSchedule(1, 1000))
    return plant, lift, est, rhc, T


def test_linear_step_examples(rng):
    plant = sec6a_plant()
    np.testing.assert_array_equal(linear_plant_step(plant, np.zeros(3), [0.0]), 0.0)
    z1 = plant.step(plant.z0, [0.0])
    np.testing.assert_allclose(z1, [-0.9, 0.102, -9.2], rtol=1e-14)
    assert plant.output(z1)[0] == pytest.approx(-10.1, rel=1e-14)
    assert plant.output(plant.z0)[0] == pytest.approx(-9.9, rel=1e-14)
    F, G, H = rng.normal(size=(4, 4)), rng.normal(size=(4, 2)), rng.normal(size=(1, 4))
    z, v = rng.normal(size=4), rng.normal(size=2)
    ref = [sum(F[i, j] * z[j] for j in range(4)) + sum(G[i, j] * v[j] for j in range(2))
           for i in range(4)]
    np.testing.assert_allclose(LinearPlant(F, G, H).step(z, v), ref, rtol=1e-12)


def test_linear_plant_validation():
    with pytest.raises(DimensionMismatch):
        LinearPlant(np.eye(3), np.ones((2, 1)), np.ones((1, 3)))


def test_robot_arm_examples():
    np.testing.assert_array_equal(robot_arm_step(np.zeros(3), 0.0), 0.0)
    x1 = robot_arm_step([5.0, -5.0, 1.0], 0.0)
    assert x1[0] == pytest.approx(4.95, rel=1e-15)
    x = robot_arm_step([math.pi / 2, 0.0, 0.0], 0.0)
    assert x[1] == pytest.approx(-13.09, rel=1e-12)
    # third equation by direct evaluation
    x = robot_arm_step([0.0, 2.0, 1.0], 3.0)
    assert x[2] == pytest.approx(1.0 + 0.01 * (-1000.0 - 7.2 + 300.0), rel=1e-14)
    plant = robot_arm_plant()
    assert (plant.n, plant.p, plant.q) == (3, 3, 1)
    np.testing.assert_array_equal(plant.output(plant.z0), [5.0, -5.0, 1.0])


def test_lifted_model_is_exact(rng):
    plant = sec6a_plant()
    model = lifted_model_of(plant, 4)
    lift = LiftingConfig(4, 1, 1)
    buf = HistoryBuffer(lift)
    z = plant.z0.copy()
    xs, us = [], []
    for k in range(15):
        buf.push_output(plant.output(z))
        v = rng.normal(size=1)
        buf.push_input(v)
        xs.append(lift_output(buf))
        us.append(lift_input(buf))
        z = plant.step(z, v)
        # y(k+1) pushed next iteration
    for k in range(3, 14):
        np.testing.assert_allclose(model.step(xs[k], us[k]), xs[k + 1], atol=1e-10)


def test_lifted_model_rejects_short_window():
    with pytest.raises(ValueError):
        lifted_model_of(sec6a_plant(), 1)


def test_zero_plant_stays_zero():
    plant, lift, est, rhc, _ = sec6a_setup(z0=(0.0, 0.0, 0.0))
    res = run_closed_loop(plant, lift, est, rhc, 10)
    assert res.log.ok and len(res.log) == 10
    assert not res.log.v.any() and not res.log.y.any()
    assert not res.log.column("gamma_over_eps").any()
    np.testing.assert_array_equal(res.estimator.theta, est.theta)


def test_single_step_composition():
    plant, lift, est, rhc, _ = sec6a_setup()
    res = run_closed_loop(plant, lift, est, rhc, 2)
    # compose the module calls by hand for k = 0 and k = 1
    buf = HistoryBuffer(lift)
    z = plant.z0.copy()
    state = est
    for k in range(2):
        buf.push_output(plant.output(z))
        state, diag = estimator_update(state, lift_output(buf), lift_input(buf))
        maps = build_predictor_maps(augment_model(state.model, lift).model, rhc.N)
        u0, sol = policy_step(maps, augmented_state(buf), k, rhc)
        rec = res.log.records[k]
        np.testing.assert_array_equal(rec.v, u0[:1])
        assert rec.v1_value == sol.value
        assert rec.lambda_used == diag.lam
        buf.push_input(u0[:1])
        z = plant.step(z, u0[:1])
    np.testing.assert_array_equal(res.states[2], z)


def test_determinism():
    a = run_closed_loop(*sec6a_setup(T=15))
    b = run_closed_loop(*sec6a_setup(T=15))
    np.testing.assert_array_equal(a.log.y, b.log.y)
    np.testing.assert_array_equal(a.log.v, b.log.v)
    np.testing.assert_array_equal(a.states, b.states)


def test_gamma_over_eps_consistency():
    plant, lift, est, rhc, _ = sec6a_setup()
    buf = HistoryBuffer(lift)
    recs = []
    z = plant.z0.copy()
    res = run_closed_loop(plant, lift, est, rhc, 20)
    for rec in res.log:
        buf.push_output(plant.output(z))
        xi = augmented_state(buf)
        expect = 1.0 * (xi @ xi) * (1 + 1000 * rec.k) / 1.0
        assert rec.gamma_over_eps >= 0
        assert rec.gamma_over_eps == pytest.approx(expect, rel=1e-9)
        buf.push_input(rec.v)
        z = plant.step(z, rec.v)
        recs.append(rec)
    assert [r.k for r in recs] == list(range(20))


def test_known_model_sanity():
    plant = sec6a_plant()
    lift = LiftingConfig(4, 1, 1)
    rhc = RhcConfig.scaled(lift.n_augmented, 1, 20, 1, 1, 1, 1.0, EpsilonSchedule(1, 1000))
    res = run_closed_loop(plant, lift, None, rhc, 61, fixed_model=lifted_model_of(plant, 4))
    assert res.log.ok
    assert np.abs(res.log.y[-1]).max() < 1e-3
    y = np.abs(res.log.y[:, 0])
    assert y[-1] < 1e-2 * y[0]


def test_log_sink_receives_records():
    seen = []
    res = run_closed_loop(*sec6a_setup(T=5), log_sink=seen.append)
    assert seen == res.log.records


def test_dimension_checks():
    plant, lift, est, rhc, _ = sec6a_setup()
    with pytest.raises(DimensionMismatch):
        run_closed_loop(plant, LiftingConfig(4, 2, 1), est, rhc, 5)
    bad = RhcConfig.scaled(4, 1, 20, 1, 1, 1)
    with pytest.raises(DimensionMismatch):
        run_closed_loop(plant, lift, est, bad, 5)
    with pytest.raises(ValueError):
        run_closed_loop(plant, lift, est, rhc, 0)


def _log(norms):
    log = TrajectoryLog()
    for k, y in enumerate(norms):
        log.append(StepRecord(k, np.array([y]), np.zeros(1), 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, True))
    return log


def test_metrics_examples(rng):
    assert convergence_metrics(_log([0.0] * 10)) == (0.0, 0.0, 0)
    assert convergence_metrics(_log([0.0, 5.0] + [0.0] * 8)) == (5.0, 0.0, 2)
    assert convergence_metrics(_log([1.0] * 5))[2] is None
    with pytest.raises(EmptyLog):
        convergence_metrics(TrajectoryLog())
    for _ in range(20):
        ys = np.abs(rng.normal(size=30)) * (rng.random(30) < 0.3) * 1e-2
        peak, tail, settle = convergence_metrics(_log(ys), tau=1e-3)
        assert peak == ys.max()
        assert tail == ys[-3:].max()
        ref = None
        for k in range(len(ys)):
            if all(v <= 1e-3 for v in ys[k:]):
                ref = k
                break
        assert settle == ref


def test_log_monotone_k():
    log = _log([1.0, 2.0])
    with pytest.raises(ValueError):
        log.append(StepRecord(1, np.zeros(1), np.zeros(1), 0, 1, 0, 0, 0, 0, True))
