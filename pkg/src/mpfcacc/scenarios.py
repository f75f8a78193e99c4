"""Ready-made platoons used in the case studies."""

from __future__ import annotations

from dataclasses import replace

from .leader import pulse_profile
from .model import PlatoonConfig, VehicleParams, default_initial_state, equilibrium_state

# (tau, h, dc, m) per vehicle; the leader has no headway or MPF depth.
TEN_VEHICLE = [
    (0.3, None, 0.03, None),
    (0.3, 0.4, 0.09, 1),
    (0.25, 0.4, 0.12, 2),
    (0.25, 0.5, 0.14, 3),
    (0.2, 0.5, 0.09, 3),
    (0.25, 0.3, 0.18, 3),
    (0.3, 0.25, 0.1, 3),
    (0.25, 0.25, 0.12, 3),
    (0.25, 0.5, 0.14, 3),
    (0.3, 0.3, 0.0, 3),
]

# The recorded-trace scenario leaves the leader lag open; 0.3 s is used.
TRACE_FOLLOWING = [
    (0.3, None, 0.1, None),
    (0.3, 1.0, 0.2, 2),
    (0.25, 0.7, 0.1, 2),
    (0.25, 1.0, 0.1, 2),
    (0.2, 0.7, 0.0, 2),
]

DEFAULT_GAINS = (5.0, 10.0, 2.0)


def build_vehicles(rows, gains=DEFAULT_GAINS, single_predecessor=False, length=0.0):
    alpha, b, c = gains
    vehicles = []
    for i, (tau, h, dc, m) in enumerate(rows):
        if i == 0:
            vehicles.append(VehicleParams(0, tau, dc=dc, length=length))
            continue
        depth = min(1 if single_predecessor else m, i)
        vehicles.append(VehicleParams(i, tau, h, dc, depth, alpha, b, c, length))
    return tuple(vehicles)


def ten_vehicle_platoon(single_predecessor=False, gains=DEFAULT_GAINS):
    return build_vehicles(TEN_VEHICLE, gains, single_predecessor)


def trace_platoon(gains=DEFAULT_GAINS):
    return build_vehicles(TRACE_FOLLOWING, gains)


def ten_vehicle_config(single_predecessor=False, D=0.7, Ts=0.01, horizon=120.0,
                  leader_profile=None, equilibrium=False):
    """Ten-vehicle study. By default the cut-in start (followers at 15 m/s,
    leader at 14 m/s, vehicle 1 six metres behind) and an accelerate/decelerate
    pulse of the leader; ``equilibrium=True`` starts everyone at 14 m/s."""
    vehicles = ten_vehicle_platoon(single_predecessor)
    if leader_profile is None:
        leader_profile = pulse_profile(Ts=Ts)
    if equilibrium:
        initial = equilibrium_state(vehicles, float(leader_profile.speed[0]))
    else:
        initial = default_initial_state(vehicles)
    return PlatoonConfig(vehicles, D, Ts, horizon, leader_profile, initial)


def with_single_predecessor(config: PlatoonConfig) -> PlatoonConfig:
    """Same platoon with every follower listening to its direct predecessor only."""
    vehicles = tuple(v if v.is_leader else replace(v, m=1) for v in config.vehicles)
    return replace(config, vehicles=vehicles)
