"""
A nonlinear plant: single-link robot arm
========================================

The arm angle, angular velocity and motor current are all measured and the
motor voltage is the input.  The model is an Euler discretization with step
0.01 of a stiff electrical loop, so the current's discrete update has factor
1 - 0.01 * 1000 = -9 and the open loop is violently unstable in that state.
"""

import numpy as np

from rhlearn import (ROBOT_ARM_COEFFS, EpsilonSchedule, LiftingConfig, RhcConfig,
                     RobotArmPlant, init_estimator, run_closed_loop)

print("open-loop current factor:", 1 - 0.01 * ROBOT_ARM_COEFFS[3])

lift = LiftingConfig(m=2, p=3, q=1)
rhc = RhcConfig.scaled(lift.n_augmented, 1, N=15, q_scale=10, r_scale=100, qn_scale=10,
                       eps=EpsilonSchedule(1.0, 10.0))

plant = RobotArmPlant((5.0, -5.0, 1.0))
est = init_estimator(lift.n_lifted, lift.q_lifted, N_bar=10)
res = run_closed_loop(plant, lift, est, rhc, T=61)

x1 = res.states[:, 0]
for k in (0, 1, 2, 5, 10, 20, 40, 60):
    print(f"k={k:2d}  x1={x1[k]:10.4f}  x3={res.states[k, 2]:12.4f}")

# During the first steps the estimator has almost no data and the shift
# model it starts from predicts no effect of v(0), so v(0) = 0.  The current
# mode is amplified nine-fold per step before the model catches up, and the
# loop does not recover on this horizon.
print("first inputs:", np.round(res.log.v[:5, 0], 3))
