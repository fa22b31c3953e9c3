"""Adaptive receding-horizon control of unknown linear systems from input/output data."""

from .errors import *  # noqa: F401,F403
from .estimator import (BregmanGenerator, EstimatorState, build_regression, bregman_distance,
                        estimator_update, init_estimator, proximal_step)
from .lifting import (AugmentedModel, HistoryBuffer, LiftingConfig, augment_model,
                      augmented_state, extract_raw_input, lift_input, lift_output)
from .qp_kernels import EqQpProblem, min_norm_least_squares, numerical_rank, solve_eq_qp
from .rhc import (EpsilonSchedule, RhcConfig, RhcSolution, epsilon_at, gamma, policy_step,
                  solve_v1, solve_v2, solve_v3)
from .config import ExperimentConfig, ParseError, ValidationError, parse_config, serialize_config
from .signal_model import (PredictorMaps, SignalModel, blend, build_predictor_maps,
                           canonical_controllable_model, controllability_margin, is_controllable,
                           model_to_theta, predict, restore_controllability, theta_to_model)
from .simulation import (ROBOT_ARM_COEFFS, LinearPlant, RobotArmPlant, TrajectoryLog,
                         convergence_metrics, lifted_model_of, robot_arm_plant, run_closed_loop,
                         sec6a_plant)

__version__ = "0.1.0"
