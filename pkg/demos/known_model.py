"""
Receding-horizon control with an exact predictor
================================================

Before trusting the learned loop it helps to look at the controller alone.
For a linear plant observed through enough stacked outputs there is an exact
lifted model, so the estimator can be bypassed.  The closed loop is then the
time-varying terminal-weight controller acting on a perfect predictor.
"""

import numpy as np

from rhlearn import (EpsilonSchedule, LiftingConfig, RhcConfig, lifted_model_of,
                     run_closed_loop, sec6a_plant)

plant = sec6a_plant()
lift = LiftingConfig(4, 1, 1)
model = lifted_model_of(plant, 4)
print("lifted model A:\n", np.round(model.A, 4))

for weights in [(1, 1, 1), (100, 10000, 100)]:
    rhc = RhcConfig.scaled(lift.n_augmented, 1, 20, *weights, eps=EpsilonSchedule(1, 1000))
    res = run_closed_loop(plant, lift, None, rhc, 61, fixed_model=model)
    y = np.abs(res.log.y[:, 0])
    print(f"Q, R, Q_N = {weights}: |y(20)| = {y[20]:.2e}, |y(40)| = {y[40]:.2e}, |y(60)| = {y[60]:.2e}")

# With an expensive input the controller lets the slow 0.92 mode decay on its
# own; with equal weights it cancels that mode in the output.
