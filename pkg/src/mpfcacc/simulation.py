"""Closed-loop platoon simulation with actuation and communication delays.

Every follower runs the predictor-feedback law; vehicles are updated in index
order so that a predecessor's current input is available when it is read with
zero communication delay. The continuous dynamics are advanced with explicit
Euler steps of length ``Ts``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .history import SignalHistory
from .leader import LeaderProfile, constant_profile
from .model import (
    ValidatedConfig,
    VehicleState,
    euler_step,
    reconstruct_positions,
    vehicle_derivative,
)
from .predictor import (
    ControllerRealization,
    assemble_measurement_vector,
    build_realization,
)


@dataclass
class VehicleHistory:
    s: SignalHistory
    v: SignalHistory
    a: SignalHistory
    u: SignalHistory

    @classmethod
    def create(cls, Ts, capacity, state: VehicleState):
        return cls(
            SignalHistory(Ts, capacity, state.s),
            SignalHistory(Ts, capacity, state.v),
            SignalHistory(Ts, capacity, state.a),
            SignalHistory(Ts, capacity, 0.0),
        )


@dataclass
class SimulationResult:
    """Sampled trajectories; arrays have shape ``(n_samples, n_vehicles)``."""

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    vehicles: tuple
    metrics: dict = field(default_factory=dict)

    @property
    def n_vehicles(self) -> int:
        return self.v.shape[1]

    def positions(self) -> np.ndarray:
        """Positions with the leader anchored at ``x_0(0) = 0``."""
        x0 = np.concatenate(([0.0], np.cumsum(self.v[:-1, 0]) * (self.t[1] - self.t[0])))
        return reconstruct_positions(self.s, [veh.length for veh in self.vehicles], x0)


class FollowerController:
    """Predictor-feedback controller of one follower wired to the histories."""

    def __init__(self, realization: ControllerRealization):
        self.real = realization
        m = realization.m
        self.n_window = realization.delay_steps + 1
        self.weighted = realization.kernels * realization.quad_weights[None, :, None]
        KB = realization.gain @ realization.b_vectors[0]
        # ego input at the current instant enters the trapezoid with weight Ts/2
        self.implicit_gain = 1.0 - realization.quad_weights[0] * KB
        self.dc_seconds = [p.dc for p in realization.predecessors]
        self.m = m

    def control(self, k, ego_state, ego_hist: VehicleHistory, pred_hists) -> float:
        real = self.real
        t = k * real.Ts
        xbar = assemble_measurement_vector(ego_state, pred_hists, self.dc_seconds, t)
        q = real.exp_gamma_D @ xbar
        if real.delay_steps > 0:
            n = self.n_window
            u_ego = np.empty(n)
            u_ego[0] = 0.0
            u_ego[1:] = ego_hist.u.window(k - 1, n - 1)[::-1]
            q = q + self.weighted[0].T @ u_ego
            for j, (hist, dcs) in enumerate(zip(pred_hists, real.dc_steps), start=1):
                q = q + self.weighted[j].T @ hist.u.window(k - dcs, n)[::-1]
        return float(real.gain @ q) / self.implicit_gain


def _leader_command(profile: LeaderProfile, mode: str, k: int, delay_steps: int, tau0: float,
                    Ts: float) -> float:
    if mode == "lag":
        return profile.accel_at(k)
    # replayed data: the command that makes the lagged, delayed model reproduce it
    ka = k + delay_steps
    a_now, a_next = profile.accel_at(ka), profile.accel_at(ka + 1)
    return a_now + tau0 * (a_next - a_now) / Ts


def run_scenario(config: ValidatedConfig) -> SimulationResult:
    """Simulate the platoon over ``[0, T)`` with ``T / Ts`` samples."""
    cfg = config.config
    vehicles = tuple(cfg.vehicles)
    Ts, nD, n_steps = config.Ts, config.delay_steps, config.n_steps
    N = len(vehicles) - 1
    profile = cfg.leader_profile
    if profile is None:
        profile = constant_profile(cfg.initial_state[0].v, Ts)
    capacity = nD + max(config.dc_steps, default=0) + 2

    controllers = [None]
    for i in range(1, N + 1):
        preds = [vehicles[i - n] for n in range(1, vehicles[i].m + 1)]
        controllers.append(FollowerController(build_realization(vehicles[i], preds, cfg.actuation_delay, Ts)))

    state = [VehicleState(*st) for st in cfg.initial_state]
    state[0] = VehicleState(0.0, state[0].v, state[0].a)
    if cfg.leader_mode == "override":
        state[0] = VehicleState(0.0, profile.speed_at(0), profile.accel_at(0))
    hists = [VehicleHistory.create(Ts, capacity, st) for st in state]
    taus = np.array([veh.tau for veh in vehicles])

    S = np.empty((n_steps, N + 1))
    V = np.empty_like(S)
    A = np.empty_like(S)
    U = np.empty_like(S)
    u_now = np.zeros(N + 1)

    for k in range(n_steps):
        for i, (st, hist) in enumerate(zip(state, hists)):
            hist.s.append(st.s)
            hist.v.append(st.v)
            hist.a.append(st.a)
        u_now[0] = _leader_command(profile, cfg.leader_mode, k, nD, vehicles[0].tau, Ts)
        hists[0].u.append(u_now[0])
        for i in range(1, N + 1):
            ctrl = controllers[i]
            preds = [hists[i - n] for n in range(1, ctrl.m + 1)]
            u_now[i] = ctrl.control(k, state[i], hists[i], preds)
            hists[i].u.append(u_now[i])

        arr = np.array(state)
        S[k], V[k], A[k], U[k] = arr[:, 0], arr[:, 1], arr[:, 2], u_now
        if k == n_steps - 1:
            break

        u_delayed = np.array([h.u.at(k - nD) for h in hists])
        v_pred = np.concatenate(([arr[0, 1]], arr[:-1, 1]))
        deriv = vehicle_derivative((arr[:, 0], arr[:, 1], arr[:, 2]), v_pred, u_delayed, taus)
        nxt = euler_step((arr[:, 0], arr[:, 1], arr[:, 2]), deriv, Ts)
        s_next = np.asarray(nxt[0]).copy()
        s_next[0] = 0.0
        state = [VehicleState(float(s), float(v), float(a)) for s, v, a in zip(s_next, nxt[1], nxt[2])]
        if cfg.leader_mode == "override":
            state[0] = VehicleState(0.0, profile.speed_at(k + 1), profile.accel_at(k + 1))

    t = np.arange(n_steps) * Ts
    return SimulationResult(t, S, V, A, U, vehicles)


# ---------------------------------------------------------------------------
# metrics


def _trapezoid(y, t):
    if len(t) < 2:
        return 0.0
    return float(np.sum((y[1:] + y[:-1]) * np.diff(t)) / 2)


def compute_metrics(result: SimulationResult, v_ss=None, tail_fraction=0.1) -> dict:
    """Per-vehicle summary of a run.

    ``v_ss`` defaults to the leader's final speed. Steady-state errors are
    the largest absolute errors over the final ``tail_fraction`` of the run.
    """
    if result.v.shape[0] == 0:
        raise ValueError("empty simulation result")
    if v_ss is None:
        v_ss = float(result.v[-1, 0])
    n = result.v.shape[0]
    tail = slice(min(n - 1, int(np.floor(n * (1 - tail_fraction)))), n)
    out = {"v_ss": v_ss, "vehicles": []}
    l2 = []
    for i, veh in enumerate(result.vehicles):
        dv = result.v[:, i] - v_ss
        l2_i = float(np.sqrt(_trapezoid(dv**2, result.t)))
        l2.append(l2_i)
        row = {
            "index": i,
            "overshoot": float(max(result.v[:, i].max() - v_ss, 0.0)),
            "peak_speed": float(result.v[:, i].max()),
            "l2_speed_dev": l2_i,
            "ss_speed_error": float(np.abs(dv[tail]).max()),
            "min_spacing": float(result.s[:, i].min()) if i else 0.0,
        }
        if i == 0:
            row["ss_spacing_error"] = 0.0
            row["terminal_spacing_error"] = 0.0
            row["amplifies"] = False
        else:
            err = result.s[:, i] - veh.h * result.v[:, i]
            row["ss_spacing_error"] = float(np.abs(err[tail]).max())
            row["terminal_spacing_error"] = float(err[-1])
            worst_pred = max(l2[i - n] for n in range(1, veh.m + 1))
            row["amplifies"] = bool(l2_i > worst_pred)
        out["vehicles"].append(row)
    result.metrics = out
    return out
