"""Predictor-feedback CACC law for a multiple-predecessor-following platoon.

Vehicle ``i`` communicating with ``m`` predecessors works on the stacked
measurement vector (length ``3m + 2``)::

    [s_i, s_{i-1}, ..., s_{i-m+1},  v_i, v_{i-1}, ..., v_{i-m},  a_i, ..., a_{i-m}]

where every predecessor entry is read through that predecessor's
communication delay. The control is ``u_i = K^T q_i`` with the predictor

    q_i(t) = e^{Gamma D} xbar(t) + sum_j int_{t-D}^{t} e^{Gamma (t - theta)} B_j u_j(theta - dc_j) dtheta

evaluated with the trapezoidal rule on the simulation grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .model import VehicleParams, snap_to_grid

# ---------------------------------------------------------------------------
# matrix exponential

_PADE_ORDER = 8
_PADE_COEFFS = [
    math.factorial(2 * _PADE_ORDER - j)
    * math.factorial(_PADE_ORDER)
    / (math.factorial(2 * _PADE_ORDER) * math.factorial(j) * math.factorial(_PADE_ORDER - j))
    for j in range(_PADE_ORDER + 1)
]


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring with a diagonal [8/8] Pade approximant.

    The argument is scaled by ``2**-s`` until its 1-norm is at most 1/2, where
    the Pade truncation error is far below double precision.
    """
    X = np.asarray(A, dtype=float) * t
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {X.shape}")
    n = X.shape[0]
    norm = np.linalg.norm(X, 1) if n else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = X / (2.0**s)

    ident = np.eye(n)
    power = ident
    num = _PADE_COEFFS[0] * ident
    den = _PADE_COEFFS[0] * ident
    for j in range(1, _PADE_ORDER + 1):
        power = power @ X
        term = _PADE_COEFFS[j] * power
        num = num + term
        den = den + term if j % 2 == 0 else den - term
    E = np.linalg.solve(den, num)
    for _ in range(s):
        E = E @ E
    return E


# ---------------------------------------------------------------------------
# controller matrices


def _check_predecessors(ego: VehicleParams, predecessors: Sequence[VehicleParams]) -> int:
    m = ego.m
    if m is None or len(predecessors) != m:
        raise DimensionMismatch(
            f"vehicle {ego.index}: expected {m} predecessors, got {len(predecessors)}"
        )
    return m


def state_dim(m: int) -> int:
    return 3 * m + 2


def build_gamma(ego: VehicleParams, predecessors: Sequence[VehicleParams]) -> np.ndarray:
    """System matrix of the stacked measurement vector.

    ``predecessors`` is ordered ``i-1, i-2, ..., i-m``.
    """
    m = _check_predecessors(ego, predecessors)
    n = state_dim(m)
    vel0, acc0 = m, 2 * m + 1
    G = np.zeros((n, n))
    for k in range(m):
        # ds_{i-k}/dt = v_{i-k-1} - v_{i-k}
        G[k, vel0 + k] = -1.0
        G[k, vel0 + k + 1] = 1.0
    for k in range(m + 1):
        G[vel0 + k, acc0 + k] = 1.0
    taus = [ego.tau] + [p.tau for p in predecessors]
    for k, tau in enumerate(taus):
        G[acc0 + k, acc0 + k] = -1.0 / tau
    return G


def build_b_vectors(ego: VehicleParams, predecessors: Sequence[VehicleParams]) -> list:
    """Input vectors ``[B_i, B_{i-1}, ..., B_{i-m}]``, each of length ``3m + 2``."""
    m = _check_predecessors(ego, predecessors)
    n = state_dim(m)
    taus = [ego.tau] + [p.tau for p in predecessors]
    vectors = []
    for j, tau in enumerate(taus):
        B = np.zeros(n)
        B[2 * m + 1 + j] = 1.0 / tau
        vectors.append(B)
    return vectors


def build_gain_vector(ego: VehicleParams, predecessors: Sequence[VehicleParams]) -> np.ndarray:
    """Gain ``K_i`` such that ``K_i^T xbar`` reproduces the delay-free MPF law."""
    m = _check_predecessors(ego, predecessors)
    tau, alpha, b, c, h = ego.tau, ego.alpha, ego.b, ego.c, ego.h
    heads = [ego.h] + [p.h for p in predecessors]
    K = np.zeros(state_dim(m))
    for k in range(m):
        K[k] = (m - k) * tau * alpha / h
    vel0, acc0 = m, 2 * m + 1
    K[vel0] = -m * tau * (alpha + b)
    for k in range(1, m):
        K[vel0 + k] = tau * b - tau * alpha * (m - k) * heads[k] / h
    K[vel0 + m] = tau * b
    K[acc0] = -m * tau * c
    K[acc0 + 1 :] = tau * c
    return K


def trapezoid_weights(n_steps: int, Ts: float) -> np.ndarray:
    """Weights of the composite trapezoidal rule over ``n_steps`` intervals.

    Index ``l`` corresponds to the sample ``l`` steps in the past.
    """
    if n_steps == 0:
        return np.zeros(1)
    w = np.full(n_steps + 1, Ts)
    w[0] = w[-1] = Ts / 2
    return w


@dataclass(frozen=True)
class ControllerRealization:
    """Precomputed matrices for one follower.

    ``kernels[j, l]`` is ``exp(Gamma * l * Ts) @ B_{i-j}`` and ``quad_weights[l]``
    the trapezoidal weight of the sample ``l`` steps in the past.
    """

    ego: VehicleParams
    predecessors: tuple
    D: float
    Ts: float
    delay_steps: int
    dc_steps: tuple
    gamma: np.ndarray
    exp_gamma_D: np.ndarray
    b_vectors: tuple
    gain: np.ndarray
    quad_weights: np.ndarray
    kernels: np.ndarray

    @property
    def m(self) -> int:
        return self.ego.m

    @property
    def dim(self) -> int:
        return state_dim(self.ego.m)


def build_realization(
    ego: VehicleParams, predecessors: Sequence[VehicleParams], D: float, Ts: float
) -> ControllerRealization:
    """Assemble and cache everything the predictor needs for vehicle ``ego``."""
    predecessors = tuple(predecessors)
    gamma = build_gamma(ego, predecessors)
    b_vectors = build_b_vectors(ego, predecessors)
    gain = build_gain_vector(ego, predecessors)
    nD = snap_to_grid(D, Ts, "D")
    dc_steps = tuple(snap_to_grid(p.dc, Ts, f"dc[{p.index}]") for p in predecessors)
    Bmat = np.column_stack(b_vectors)
    kernels = np.empty((len(b_vectors), nD + 1, gamma.shape[0]))
    for l in range(nD + 1):
        kernels[:, l, :] = (matrix_exponential(gamma, l * Ts) @ Bmat).T
    return ControllerRealization(
        ego=ego,
        predecessors=predecessors,
        D=nD * Ts,
        Ts=Ts,
        delay_steps=nD,
        dc_steps=dc_steps,
        gamma=gamma,
        exp_gamma_D=matrix_exponential(gamma, nD * Ts),
        b_vectors=tuple(b_vectors),
        gain=gain,
        quad_weights=trapezoid_weights(nD, Ts),
        kernels=kernels,
    )


# ---------------------------------------------------------------------------
# measurements, predictor, control


def assemble_measurement_vector(ego_state, predecessor_histories, dc, t: float) -> np.ndarray:
    """Stack the ego's own (undelayed) state with delayed predecessor samples.

    ``predecessor_histories[j]`` exposes ``s``, ``v`` and ``a``
    :class:`~mpfcacc.history.SignalHistory` objects of vehicle ``i-1-j``;
    ``dc[j]`` is that vehicle's communication delay in seconds.
    """
    m = len(predecessor_histories)
    if len(dc) != m:
        raise DimensionMismatch("need one communication delay per predecessor")
    s_i, v_i, a_i = ego_state
    xbar = np.empty(state_dim(m))
    xbar[0] = s_i
    xbar[m] = v_i
    xbar[2 * m + 1] = a_i
    for j, (hist, delay) in enumerate(zip(predecessor_histories, dc), start=1):
        k = hist.v.index_of(t - delay)
        if j < m:
            xbar[j] = hist.s.at(k)
        xbar[m + j] = hist.v.at(k)
        xbar[2 * m + 1 + j] = hist.a.at(k)
    return xbar


def input_windows(realization: ControllerRealization, ego_u_history, predecessor_u_histories, k: int):
    """Per-channel input samples ``u_j(t - l Ts - dc_j)`` for ``l = 0 .. D/Ts``."""
    n = realization.delay_steps + 1
    windows = [ego_u_history.window(k, n)[::-1]]
    for hist, dcs in zip(predecessor_u_histories, realization.dc_steps):
        windows.append(hist.window(k - dcs, n)[::-1])
    return np.array(windows)


def predictor_state(
    realization: ControllerRealization, xbar, ego_u_history, predecessor_u_histories, t: float
) -> np.ndarray:
    """Predicted state ``q_i(t)``, the stacked state ``D`` seconds ahead."""
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != (realization.dim,):
        raise DimensionMismatch(f"xbar has shape {xbar.shape}, expected ({realization.dim},)")
    if len(predecessor_u_histories) != realization.m:
        raise DimensionMismatch("need one input history per predecessor")
    q = realization.exp_gamma_D @ xbar
    if realization.delay_steps == 0:
        return q
    k = ego_u_history.index_of(t)
    u = input_windows(realization, ego_u_history, predecessor_u_histories, k)
    return q + np.einsum("jl,jld->d", u * realization.quad_weights, realization.kernels)


def predictor_control(realization: ControllerRealization, q) -> float:
    q = np.asarray(q, dtype=float)
    if q.shape != realization.gain.shape:
        raise DimensionMismatch(f"q has shape {q.shape}, expected {realization.gain.shape}")
    return float(realization.gain @ q)


def nominal_control(ego: VehicleParams, predecessors: Sequence[VehicleParams], states) -> float:
    """Delay-free MPF constant-time-headway law.

    ``states`` lists ``(s, v, a)`` for vehicles ``i, i-1, ..., i-m``.
    """
    m = _check_predecessors(ego, predecessors)
    if len(states) != m + 1:
        raise DimensionMismatch(f"expected {m + 1} states, got {len(states)}")
    heads = [ego.h] + [p.h for p in predecessors]
    tau, h = ego.tau, ego.h
    spacing_term = sum(
        (m - n + 1) * heads[n - 1] / h * (states[n - 1][0] / heads[n - 1] - states[n - 1][1])
        for n in range(1, m + 1)
    )
    speed_term = sum(states[n][1] for n in range(1, m + 1)) - m * states[0][1]
    accel_term = sum(states[n][2] for n in range(1, m + 1)) - m * states[0][2]
    return tau * ego.alpha * spacing_term + tau * ego.b * speed_term + tau * ego.c * accel_term
