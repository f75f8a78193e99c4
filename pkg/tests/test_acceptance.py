"""Acceptance criteria. Each test records one PASS/FAIL line that is printed
in the terminal summary under "acceptance criteria"."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mpfcacc.errors import NonPositiveGain
from conftest import random_vehicle_chain, record_acceptance
from mpfcacc.frequency import (
    Axis,
    ChannelParams,
    corollary1_conditions,
    denominator_coeffs,
    minimal_stable,
    min_headway_bound,
    pole_placement_gains,
    region_sweep,
    routh_stable,
    string_stable_norm,
    tf_magnitude,
    tf_parameterized_magnitude,
    theorem1_conditions,
)
from mpfcacc.history import SignalHistory
from mpfcacc.leader import constant_profile
from mpfcacc.model import VehicleParams, validate_platoon
from mpfcacc.predictor import (
    assemble_measurement_vector,
    build_realization,
    nominal_control,
    predictor_control,
    predictor_state,
)
from mpfcacc.scenarios import ten_vehicle_config
from mpfcacc.simulation import compute_metrics, run_scenario


def check(criterion, ok, detail):
    record_acceptance(criterion, ok, detail)
    assert ok, detail


class _StateHist:
    def __init__(self, state):
        self.s, self.v, self.a = (SignalHistory(0.01, 1) for _ in range(3))
        self.s.append(state[0])
        self.v.append(state[1])
        self.a.append(state[2])


def test_01_predictor_degeneracy():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 6))
        ego, preds = random_vehicle_chain(rng, m)
        real = build_realization(ego, preds, 0.0, 0.01)
        states = rng.uniform(-30, 30, (m + 1, 3))
        xbar = assemble_measurement_vector(states[0], [_StateHist(s) for s in states[1:]], [0.0] * m, 0.0)
        q = predictor_state(real, xbar, SignalHistory(0.01, 1), [SignalHistory(0.01, 1)] * m, 0.0)
        u = predictor_control(real, q)
        ref = nominal_control(ego, preds, states)
        worst = max(worst, abs(u - ref) / max(1.0, abs(ref)))
    elapsed = time.perf_counter() - t0
    check(1, worst <= 1e-12 and elapsed < 1.0, f"max err {worst:.2e}, {elapsed:.2f} s")


# smooth inputs u_j(t) = a sin(w t + phi), defined for all t
_INPUTS = [(0.8, 1.3, 0.4), (0.5, 0.9, 1.1), (0.3, 1.7, 2.0)]


def _u(j, t):
    a, w, phi = _INPUTS[j]
    return a * np.sin(w * t + phi)


def _prediction_error(Ts, D=0.5, T=2.5):
    ego = VehicleParams(2, 0.3, 0.8, 0.0, 2, 5.0, 10.0, 2.0)
    preds = [VehicleParams(1, 0.25, 0.6, 0.0), VehicleParams(0, 0.2, 0.5, 0.0)]
    real = build_realization(ego, preds, D, Ts)
    B = np.column_stack(real.b_vectors)
    x0 = np.array([1.0, -0.5, 14.0, 13.5, 13.0, 0.2, -0.1, 0.3])
    # the plant sees every input through the actuation delay
    rhs = lambda t, x: real.gamma @ x + B @ np.array([_u(j, t - D) for j in range(3)])
    sol = solve_ivp(rhs, (0, T + D), x0, method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True)
    n = int(round(T / Ts))
    hists = [SignalHistory(Ts, n + 2) for _ in range(3)]
    worst = 0.0
    for k in range(n + 1):
        t = k * Ts
        for j, h in enumerate(hists):
            h.append(_u(j, t))
        if t > D:
            q = predictor_state(real, sol.sol(t), hists[0], hists[1:], t)
            worst = max(worst, float(np.abs(q - sol.sol(t + D)).max()))
    return worst


def test_02_prediction_exactness():
    t0 = time.perf_counter()
    errs = {Ts: _prediction_error(Ts) for Ts in (0.004, 0.002, 0.001)}
    elapsed = time.perf_counter() - t0
    order = math.log2(errs[0.002] / errs[0.001])
    ok = errs[0.001] <= 1e-3 and order >= 2 - 0.05 and elapsed < 10.0
    check(2, ok, f"err(Ts=1e-3) {errs[0.001]:.2e}, order {order:.3f}, {elapsed:.2f} s")


def _random_stable(rng, dc_max=0.3):
    while True:
        m = int(rng.integers(1, 6))
        p = ChannelParams(
            rng.uniform(0.2, 8.0), rng.uniform(0.2, 12.0), rng.uniform(0.1, 4.0),
            rng.uniform(0.05, 0.5), rng.uniform(0.2, 2.5), m,
            rng.uniform(0.2, 2.5, m), rng.uniform(0.0, dc_max, m), rng.uniform(0.0, 2.0),
        )
        if routh_stable(p)[0]:
            return p


def test_03_dc_gain():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        p = _random_stable(rng)
        for n in range(1, p.m + 1):
            worst = max(worst, abs(float(tf_magnitude(p, n, 1e-6)) - 1 / p.m))
    elapsed = time.perf_counter() - t0
    check(3, worst <= 1e-4 and elapsed < 5.0, f"max | |G(j1e-6)| - 1/m | {worst:.2e}, {elapsed:.2f} s")


def test_04_delay_compensation_invariance():
    rng = np.random.default_rng(4)
    w = np.logspace(-3, 3, 50)
    worst = 0.0
    for _ in range(20):
        p = _random_stable(rng, dc_max=0.0)
        mags = []
        for D in (0.0, 0.7, 5.0):
            q = ChannelParams(p.alpha, p.b, p.c, p.tau, p.h, p.m, p.pred_headways, p.pred_dc, D)
            mags.append(np.array([tf_magnitude(q, n, w) for n in range(1, p.m + 1)]))
        worst = max(worst, float(np.abs(mags[1] - mags[0]).max()), float(np.abs(mags[2] - mags[0]).max()))
    check(4, worst <= 1e-12, f"max |G| spread over D in {{0, 0.7, 5}}: {worst:.1e}")


def test_05_sufficient_conditions_are_sound():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    passed = tried = violations = 0
    worst = 0.0
    while passed < 500:
        tried += 1
        m = int(rng.integers(1, 6))
        p = ChannelParams(
            10 ** rng.uniform(-1.5, 1), 10 ** rng.uniform(-0.5, 1.5), 10 ** rng.uniform(-0.5, 1.3),
            rng.uniform(0.05, 0.5), rng.uniform(0.1, 3), m,
            rng.uniform(0.1, 3, m), rng.uniform(0, 0.3, m), rng.uniform(0, 2),
        )
        if not theorem1_conditions(p).theorem1_ok:
            continue
        passed += 1
        v = string_stable_norm(p)
        level = max(p.m * x for _, x in v.hinf_per_channel)
        worst = max(worst, level)
        violations += level > 1 + 1e-6
    elapsed = time.perf_counter() - t0
    check(5, violations == 0 and elapsed < 60.0,
          f"{passed} passing draws of {tried}, {violations} violations, max m*||G|| {worst:.9f}, {elapsed:.1f} s")


def _rand_fraction(rng, lo, hi, den=1000):
    return Fraction(int(rng.integers(int(lo * den), int(hi * den))), den)


def test_06_pole_placement_identity():
    rng = np.random.default_rng(6)
    done = mismatches = 0
    worst = 0.0
    w = np.logspace(-2, 2, 40)
    while done < 100:
        tau, h, m = _rand_fraction(rng, 0.05, 0.5), _rand_fraction(rng, 0.3, 2.0), int(rng.integers(1, 5))
        lo, hi = -3.0 / float(h), -1.0 / (3 * float(tau))
        if hi - lo < 0.01:
            continue
        pole = _rand_fraction(rng, lo, hi)
        try:
            alpha, b, c = pole_placement_gains(pole, h, m, tau)
        except NonPositiveGain:
            continue
        done += 1
        exact = ChannelParams(alpha, b, c, tau, h, m, [h] * m, [0] * m)
        mismatches += denominator_coeffs(exact) != (1, -3 * pole, 3 * pole**2, -(pole**3))
        dc = rng.uniform(0, 0.3, m)
        D = rng.uniform(0, 1.5)
        p = ChannelParams(float(alpha), float(b), float(c), float(tau), float(h), m, [float(h)] * m, dc, D)
        for n in range(1, m + 1):
            direct = tf_magnitude(p, n, w)
            param = tf_parameterized_magnitude(float(pole), float(h), m, float(tau), dc, D, n, w)
            worst = max(worst, float(np.abs(param - direct).max()))
    check(6, mismatches == 0 and worst <= 1e-10,
          f"{mismatches} exact-coefficient mismatches in 100, max magnitude diff {worst:.1e}")


def test_07_region_qualitative():
    t0 = time.perf_counter()
    template = ChannelParams.homogeneous(5.0, 10.0, 2.0, 0.1, 1.0, 1, 0.0, 0.7)
    h_axis, dc_axis = Axis("h", 0.1, 2.0, 50), Axis("dc", 0.0, 0.49, 50)
    grids = region_sweep(h_axis, dc_axis, template, [1, 2, 3])
    elapsed = time.perf_counter() - t0
    col = int(np.argmin(np.abs(dc_axis.values - 0.05)))
    hmin = {m: minimal_stable(h_axis.values, g[:, col]) for m, g in grids.items()}
    curves = {m: [minimal_stable(h_axis.values, g[:, k]) for k in range(dc_axis.steps)] for m, g in grids.items()}
    monotone = all(all(b >= a for a, b in zip(c, c[1:])) for c in curves.values())
    ok = hmin[3] <= hmin[1] and monotone and elapsed < 300
    check(7, ok, f"h_min at dc=0.05: m=1 {hmin[1]:.3f}, m=2 {hmin[2]:.3f}, m=3 {hmin[3]:.3f}; "
                 f"monotone {monotone}, {elapsed:.0f} s")


def test_08_ten_vehicle_regulation():
    cfg = validate_platoon(ten_vehicle_config(horizon=120.0))
    t0 = time.perf_counter()
    res = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    metrics = compute_metrics(res, v_ss=14.0)
    speed = max(r["ss_speed_error"] for r in metrics["vehicles"])
    spacing = max(r["ss_spacing_error"] for r in metrics["vehicles"])
    ok = speed <= 1e-3 and spacing <= 1e-3 and elapsed < 30
    check(8, ok, f"final 12 s: max |v - v_ss| {speed:.1e}, max |s - h v_ss| {spacing:.1e}, {elapsed:.1f} s")


def test_09_mpf_versus_single_predecessor():
    mpf = run_scenario(validate_platoon(ten_vehicle_config(equilibrium=True)))
    one = run_scenario(validate_platoon(ten_vehicle_config(single_predecessor=True, equilibrium=True)))
    m_mpf = compute_metrics(mpf, v_ss=14.0)["vehicles"]
    amplifying = [r["index"] for r in m_mpf if r["amplifies"]]
    lead_peak = one.v[:, 0].max()
    overshooting = [i for i in range(1, one.n_vehicles) if one.v[:, i].max() > lead_peak + 1e-6]
    ok = not amplifying and bool(overshooting)
    check(9, ok, f"MPF amplifying followers {amplifying}; single-predecessor followers above leader peak "
                 f"{lead_peak:.2f}: {overshooting} (max {one.v[:, 1:].max():.2f})")


def test_10_min_headway_bound():
    checked = violations = 0
    for m in (1, 2, 3, 4):
        for tau in (0.1, 0.3):
            for h in np.linspace(0.01, 2.0, 60):
                for c in np.linspace(0.0, 10.0, 60):
                    p = ChannelParams.homogeneous(5.0, 10.0, c, tau, h, m)
                    if corollary1_conditions(p).theorem1_ok:
                        checked += 1
                        violations += h < min_headway_bound(tau, m, c)
    check(10, checked > 0 and violations == 0, f"{checked} passing grid points, {violations} below the bound")


def test_11_equilibrium_fixed_point():
    cfg = ten_vehicle_config(equilibrium=True, horizon=100.0, leader_profile=constant_profile(14.0))
    res = run_scenario(validate_platoon(cfg))
    heads = np.array([0.0] + [v.h for v in cfg.vehicles[1:]])
    drift = max(
        float(np.abs(res.v - 14.0).max()),
        float(np.abs(res.a).max()),
        float(np.abs(res.s[:, 1:] - heads[1:] * 14.0).max()),
    )
    check(11, drift <= 1e-9, f"max drift over 100 s {drift:.1e}")
