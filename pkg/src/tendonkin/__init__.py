"""Optimization-based kinematics for universal-jointed tendon-driven continuum robots."""

from .errors import DomainError, NumericalError
from .geometry import (Pose, RobotGeometry, TendonRouting, as_joint_state, forward_kinematics,
                       frame_origins, helical_routing, joint_transform, tendon_length,
                       tendon_waypoints_world)
from .kernels import BACKEND
from .mechanics import (FrictionParams, TendonPath, joint_moments, propagate_tension,
                        tendon_lengths, waypoint_net_force, wrap_angle)
from .nlp import NlpConfig, NlpProblem, NlpSolution, finite_diff_gradient, minimize
from .statics import (ActuationCommand, SolveResult, SolverConfig, displacement_residual,
                      shape_cost, solve_baseline_frictionless, solve_statics)
from .calibration import CalibrationResult, SearchRanges, calibrate
from .gait import (GaitSequence, HelixSpec, helix_joint_angles, rolling_gait,
                   tendon_displacements_for_state, tube_clearance)
from .io import GroundTruthShape, load_robot, tip_error, write_robot

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ActuationCommand", "CalibrationResult", "DomainError", "FrictionParams",
    "GaitSequence", "GroundTruthShape", "HelixSpec", "NlpConfig", "NlpProblem", "NlpSolution",
    "NumericalError", "Pose", "RobotGeometry", "SearchRanges", "SolveResult", "SolverConfig",
    "TendonPath", "TendonRouting", "as_joint_state", "calibrate", "displacement_residual",
    "finite_diff_gradient", "forward_kinematics", "frame_origins", "helical_routing",
    "helix_joint_angles", "joint_moments", "joint_transform", "load_robot", "minimize",
    "propagate_tension", "rolling_gait", "shape_cost", "solve_baseline_frictionless",
    "solve_statics", "tendon_displacements_for_state", "tendon_length", "tendon_lengths",
    "tendon_waypoints_world", "tip_error", "tube_clearance", "waypoint_net_force", "wrap_angle",
    "write_robot",
]
