"""Predictor-feedback CACC for heterogeneous platoons with a multiple-predecessor topology.

Submodules:

``model``       vehicle/platoon types, third-order dynamics, Euler step
``predictor``   controller matrices, matrix exponential, predictor and control laws
``frequency``   transfer functions, H-infinity norms, stability conditions, sweeps
``leader``      leader speed profiles
``simulation``  closed-loop runs and metrics
``cli``         command-line front end
"""

from .errors import PlatoonError
from .frequency import (
    Axis,
    ChannelParams,
    StabilityVerdict,
    corollary1_conditions,
    denominator_coeffs,
    hinf_norm,
    minimal_stable,
    parameterized_sigma_norm,
    pole_placement_gains,
    region_sweep,
    routh_stable,
    string_stable_norm,
    tf_magnitude,
    tf_parameterized_magnitude,
    theorem1_conditions,
)
from .history import SignalHistory
from .leader import LeaderProfile, constant_profile, load_leader_profile, pulse_profile
from .model import (
    PlatoonConfig,
    ValidatedConfig,
    VehicleParams,
    VehicleState,
    euler_step,
    validate_platoon,
    vehicle_derivative,
)
from .predictor import (
    ControllerRealization,
    build_gain_vector,
    build_gamma,
    build_realization,
    matrix_exponential,
    nominal_control,
    predictor_control,
    predictor_state,
)
from .simulation import SimulationResult, compute_metrics, run_scenario

__version__ = "0.1.0"
