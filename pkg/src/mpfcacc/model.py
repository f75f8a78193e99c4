"""Vehicle and platoon types, third-order longitudinal dynamics and the Euler step.

Each vehicle ``i`` is described by spacing ``s_i = x_{i-1} - x_i - l_i``, speed
``v_i`` and acceleration ``a_i`` with

    ds_i/dt = v_{i-1} - v_i
    dv_i/dt = a_i
    da_i/dt = (u_i(t - D) - a_i) / tau_i

Vehicle 0 is the leader; its spacing state is unused and held at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    BadMpfDepth,
    EmptyPlatoon,
    InvalidParameter,
    NonPositiveLag,
    OffGridDelay,
)

GRID_TOL = 1e-9


class VehicleState(NamedTuple):
    s: float
    v: float
    a: float


class StateDerivative(NamedTuple):
    ds: float
    dv: float
    da: float


@dataclass(frozen=True)
class VehicleParams:
    """Physical and control parameters of one vehicle.

    ``dc`` is the latency other vehicles see on this vehicle's broadcasts.
    ``h``, ``m`` and the gains may be left as ``None`` for the leader.
    """

    index: int
    tau: float
    h: Optional[float] = None
    dc: float = 0.0
    m: Optional[int] = None
    alpha: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    length: float = 0.0

    @property
    def is_leader(self) -> bool:
        return self.index == 0


@dataclass(frozen=True)
class PlatoonConfig:
    """A leader plus ``N`` followers sharing one actuation delay ``D``.

    ``initial_state`` holds one :class:`VehicleState` per vehicle; when empty,
    :func:`validate_platoon` fills in the cut-in defaults from
    :func:`default_initial_state`.
    """

    vehicles: Sequence[VehicleParams]
    actuation_delay: float
    sample_time: float = 0.01
    horizon: float = 60.0
    leader_profile: object = None
    initial_state: Sequence[VehicleState] = field(default_factory=tuple)
    leader_mode: str = "lag"  # "lag" drives the leader model, "override" replays data

    @property
    def n_followers(self) -> int:
        return len(self.vehicles) - 1


@dataclass(frozen=True)
class ValidatedConfig:
    """A :class:`PlatoonConfig` whose delays are snapped to the sampling grid."""

    config: PlatoonConfig
    delay_steps: int
    dc_steps: tuple

    @property
    def vehicles(self):
        return self.config.vehicles

    @property
    def Ts(self) -> float:
        return self.config.sample_time

    @property
    def D(self) -> float:
        return self.config.actuation_delay

    @property
    def n_steps(self) -> int:
        return int(round(self.config.horizon / self.config.sample_time))


def snap_to_grid(delay: float, Ts: float, name: str = "delay") -> int:
    """Return ``delay / Ts`` as an integer, or raise if it is off the grid."""
    k = int(round(delay / Ts))
    if abs(delay - k * Ts) > GRID_TOL:
        raise OffGridDelay(f"{name}={delay!r} is not a multiple of Ts={Ts!r}")
    return k


def default_initial_state(vehicles, v_follower=15.0, v_leader=14.0, s_first=6.0):
    """Cut-in initial condition: followers at ``v_follower`` with ``s_i = h_i v_i``
    except vehicle 1, which starts ``s_first`` metres behind the leader."""
    states = [VehicleState(0.0, v_leader, 0.0)]
    for veh in vehicles[1:]:
        s0 = s_first if veh.index == 1 and s_first is not None else veh.h * v_follower
        states.append(VehicleState(s0, v_follower, 0.0))
    return tuple(states)


def equilibrium_state(vehicles, speed):
    """Uniform-speed equilibrium ``v_i = speed``, ``a_i = 0``, ``s_i = h_i speed``."""
    states = [VehicleState(0.0, speed, 0.0)]
    states += [VehicleState(veh.h * speed, speed, 0.0) for veh in vehicles[1:]]
    return tuple(states)


def _check_vehicle(veh: VehicleParams, position: int) -> None:
    if veh.index != position:
        raise InvalidParameter(f"vehicle at position {position} has index {veh.index}")
    if not veh.tau > 0:
        raise NonPositiveLag(f"vehicle {veh.index}: tau must be > 0, got {veh.tau!r}")
    if not veh.dc >= 0:
        raise InvalidParameter(f"vehicle {veh.index}: dc must be >= 0, got {veh.dc!r}")
    if not veh.length >= 0:
        raise InvalidParameter(f"vehicle {veh.index}: length must be >= 0")
    if veh.is_leader:
        return
    for name in ("h", "alpha", "b", "c"):
        value = getattr(veh, name)
        if value is None or not value > 0:
            raise InvalidParameter(f"vehicle {veh.index}: {name} must be > 0, got {value!r}")
    if veh.m is None or not 1 <= veh.m <= veh.index:
        raise BadMpfDepth(f"vehicle {veh.index}: need 1 <= m <= {veh.index}, got {veh.m!r}")


def validate_platoon(config: PlatoonConfig) -> ValidatedConfig:
    """Check all invariants and snap delays onto the ``Ts`` grid."""
    if not config.vehicles:
        raise EmptyPlatoon("platoon has no vehicles")
    Ts = config.sample_time
    if not Ts > 0:
        raise InvalidParameter(f"sample_time must be > 0, got {Ts!r}")
    if not config.horizon > Ts:
        raise InvalidParameter("horizon must exceed sample_time")
    if not config.actuation_delay >= 0:
        raise InvalidParameter("actuation delay must be >= 0")
    if config.leader_mode not in ("lag", "override"):
        raise InvalidParameter(f"unknown leader_mode {config.leader_mode!r}")
    for pos, veh in enumerate(config.vehicles):
        _check_vehicle(veh, pos)

    delay_steps = snap_to_grid(config.actuation_delay, Ts, "D")
    dc_steps = tuple(
        snap_to_grid(veh.dc, Ts, f"dc[{veh.index}]") for veh in config.vehicles
    )
    vehicles = tuple(
        replace(veh, dc=k * Ts) for veh, k in zip(config.vehicles, dc_steps)
    )
    initial = tuple(config.initial_state) or default_initial_state(vehicles)
    if len(initial) != len(vehicles):
        raise InvalidParameter(
            f"initial_state has {len(initial)} entries for {len(vehicles)} vehicles"
        )
    initial = tuple(VehicleState(*map(float, st)) for st in initial)
    if not all(math.isfinite(x) for st in initial for x in st):
        raise InvalidParameter("initial state must be finite")

    snapped = replace(
        config,
        vehicles=vehicles,
        actuation_delay=delay_steps * Ts,
        initial_state=initial,
    )
    return ValidatedConfig(snapped, delay_steps, dc_steps)


def vehicle_derivative(state, v_pred, u_delayed, tau) -> StateDerivative:
    """Right-hand side of the third-order model. Works elementwise on arrays."""
    s, v, a = state
    return StateDerivative(v_pred - v, a, (u_delayed - a) / tau)


def euler_step(state, deriv, Ts) -> VehicleState:
    return VehicleState(
        state[0] + Ts * deriv[0],
        state[1] + Ts * deriv[1],
        state[2] + Ts * deriv[2],
    )


def reconstruct_positions(spacing: np.ndarray, lengths: Sequence[float], x0=None) -> np.ndarray:
    """Positions from spacings, ``x_i = x_{i-1} - s_i - l_i``.

    ``spacing`` has shape ``(n_steps, n_vehicles)``; column 0 is ignored.
    ``x0`` is the leader position series (defaults to zeros).
    """
    spacing = np.asarray(spacing, dtype=float)
    x = np.empty_like(spacing)
    x[:, 0] = 0.0 if x0 is None else x0
    for i in range(1, spacing.shape[1]):
        x[:, i] = x[:, i - 1] - spacing[:, i] - lengths[i]
    return x
