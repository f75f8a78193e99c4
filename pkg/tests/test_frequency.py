from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import assume, given, settings, strategies as st

from mpfcacc.errors import InvalidAxis, NonNegativePole, NonPositiveGain, NonzeroCommDelay, UnstableChannel
from mpfcacc.frequency import (
    Axis,
    ChannelParams,
    beta,
    corollary1_conditions,
    denominator_coeffs,
    gamma_n,
    hinf_norm,
    min_headway_bound,
    minimal_stable,
    pole_placement_gains,
    region_sweep,
    routh_stable,
    string_stable_norm,
    tf_magnitude,
    tf_parameterized_magnitude,
    tf_value,
    theorem1_conditions,
)
from mpfcacc.model import VehicleParams
from mpfcacc.predictor import build_b_vectors, build_gain_vector, build_gamma


def reference_channel(m, h=1.0, dc=0.0, D=0.7):
    return ChannelParams.homogeneous(5.0, 10.0, 2.0, 0.1, h, m, dc, D)


def random_channel(rng, max_m=5, dc_max=0.3):
    m = int(rng.integers(1, max_m + 1))
    return ChannelParams(
        rng.uniform(0.2, 8.0), rng.uniform(0.2, 12.0), rng.uniform(0.1, 4.0),
        rng.uniform(0.05, 0.5), rng.uniform(0.2, 2.5), m,
        rng.uniform(0.2, 2.5, m), rng.uniform(0.0, dc_max, m), rng.uniform(0.0, 2.0),
    )


def stable_channels(seed, count, **kw):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = random_channel(rng, **kw)
        if routh_stable(p)[0]:
            out.append(p)
    return out


# -- matrix-route oracle: resolvent of the stacked state-space model ----------


def matrix_route(p: ChannelParams, s):
    """Transfer functions from ``(sI - Gamma)^-1`` and the gain vector.

    The first channel additionally carries the difference between the ego's
    undelayed spacing and its delayed reconstruction, propagated through
    ``exp(Gamma D)``.
    """
    m = p.m
    ego = VehicleParams(m, p.tau, p.h, 0.0, m, p.alpha, p.b, p.c)
    taus = [0.3 + 0.07 * j for j in range(m)]
    preds = [VehicleParams(m - j, taus[j - 1], p.pred_headways[j - 1], p.pred_dc[j - 1]) for j in range(1, m + 1)]
    G = build_gamma(ego, preds)
    Bs = build_b_vectors(ego, preds)
    K = build_gain_vector(ego, preds)
    n = G.shape[0]
    R = np.linalg.inv(s * np.eye(n) - G)
    P = [R @ B for B in Bs]
    delta = 1 - K @ P[0]
    dc1 = p.pred_dc[0]
    corr = np.zeros(n, complex)
    corr[0] = (1 - np.exp(-s * dc1)) / (s**2 * (s * taus[0] + 1))
    E = scipy.linalg.expm(G * p.D)
    out = []
    for j in range(1, m + 1):
        coef = np.exp(-s * p.pred_dc[j - 1]) * (K @ P[j])
        if j == 1:
            coef = coef + (K @ E @ corr) * np.exp(-s * p.D)
        out.append(coef * (s * taus[j - 1] + 1) / (delta * (s * p.tau + 1)))
    return out


@pytest.mark.parametrize("seed", range(8))
def test_closed_form_matches_state_space_route(seed):
    rng = np.random.default_rng(100 + seed)
    p = random_channel(rng)
    for w in (0.03, 0.7, 3.0, 25.0):
        ref = matrix_route(p, 1j * w)
        for n in range(1, p.m + 1):
            val = tf_value(p, n, 1j * w)
            assert abs(val - ref[n - 1]) <= 1e-9 * abs(val)


# -- denominator and Routh ----------------------------------------------------


def test_denominator_example():
    assert denominator_coeffs(reference_channel(3)) == pytest.approx((1, 16, 45, 15))
    ok, margin = routh_stable(reference_channel(3))
    assert ok and margin == pytest.approx(235.0)


def test_denominator_is_exact_for_fractions():
    p = ChannelParams(Fraction(5), Fraction(10), Fraction(2), Fraction(1, 10), Fraction(1), 3,
                      [1, 1, 1], [0, 0, 0])
    assert denominator_coeffs(p) == (1, Fraction(16), Fraction(45), Fraction(15))


def test_routh_agrees_with_roots():
    rng = np.random.default_rng(7)
    disagreements = 0
    for _ in range(1000):
        p = ChannelParams.homogeneous(
            rng.uniform(0.01, 20), rng.uniform(0.01, 20), rng.uniform(0.0, 5),
            rng.uniform(0.02, 1.0), rng.uniform(0.05, 3.0), int(rng.integers(1, 6)),
        )
        roots = np.roots([float(x) for x in denominator_coeffs(p)])
        hurwitz = bool(np.all(roots.real < 0))
        ok, margin = routh_stable(p)
        if abs(margin) > 1e-8:
            disagreements += ok != hurwitz
    assert disagreements == 0


def test_unstable_denominator_raises():
    p = ChannelParams.homogeneous(50.0, 0.01, 0.0, 1.0, 0.1, 1)
    assert not routh_stable(p)[0]
    with pytest.raises(UnstableChannel):
        hinf_norm(p, 1)


# -- transfer functions -------------------------------------------------------


def test_dc_gain_is_one_over_m():
    for p in stable_channels(11, 50):
        for n in range(1, p.m + 1):
            assert abs(tf_value(p, n, 1e-7j)) == pytest.approx(1 / p.m, abs=1e-5)


def test_delay_of_far_predecessors_is_pure_phase():
    p = ChannelParams(5.0, 10.0, 2.0, 0.1, 1.0, 3, [1.0, 0.8, 0.5], [0.1, 0.0, 0.0], 0.7)
    q = ChannelParams(5.0, 10.0, 2.0, 0.1, 1.0, 3, [1.0, 0.8, 0.5], [0.1, 0.25, 0.4], 0.7)
    w = np.logspace(-2, 2, 30)
    for n in (2, 3):
        np.testing.assert_allclose(tf_magnitude(p, n, w), tf_magnitude(q, n, w), rtol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 10.0))
def test_actuation_delay_vanishes_without_comm_delay(seed, D):
    p = stable_channels(seed, 1, dc_max=0.0)[0]
    q = ChannelParams(p.alpha, p.b, p.c, p.tau, p.h, p.m, p.pred_headways, p.pred_dc, D)
    w = np.logspace(-3, 3, 25)
    for n in range(1, p.m + 1):
        np.testing.assert_allclose(tf_magnitude(p, n, w), tf_magnitude(q, n, w), rtol=0, atol=1e-12)


# -- H-infinity norm ----------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_hinf_norm_matches_brute_force(seed):
    p = stable_channels(200 + seed, 1)[0]
    w = np.logspace(-4, 4, 1_000_000)
    for n in range(1, p.m + 1):
        brute = max(float(tf_magnitude(p, n, w).max()), 1 / p.m)
        norm = hinf_norm(p, n)
        assert norm >= brute * (1 - 1e-12)
        assert norm <= brute * (1 + 1e-5)


def test_hinf_norm_is_grid_insensitive():
    for p in stable_channels(300, 10):
        for n in range(1, p.m + 1):
            assert hinf_norm(p, n, 2048) == pytest.approx(hinf_norm(p, n, 4096), rel=1e-6)


def test_norm_verdict_reports_channels():
    v = string_stable_norm(reference_channel(3, h=1.0, dc=0.05))
    assert [n for n, _ in v.hinf_per_channel] == [1, 2, 3]
    assert v.sigma_norm == pytest.approx(sum(x for _, x in v.hinf_per_channel))
    assert v.norm_ok and v.stable


def test_small_headway_single_predecessor_is_not_string_stable():
    v = string_stable_norm(reference_channel(1, h=0.2, dc=0.05))
    assert v.routh_ok and not v.norm_ok


# -- sufficient conditions ----------------------------------------------------


def test_beta_gamma_example():
    p = reference_channel(3)
    assert beta(p) == pytest.approx(130.0)
    assert gamma_n(p, 3) == pytest.approx(825.0)


def test_corollary_requires_zero_comm_delay():
    with pytest.raises(NonzeroCommDelay):
        corollary1_conditions(reference_channel(2, dc=0.1))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 5.0))
def test_corollary_independent_of_actuation_delay(seed, D):
    p = random_channel(np.random.default_rng(seed), dc_max=0.0)
    q = ChannelParams(p.alpha, p.b, p.c, p.tau, p.h, p.m, p.pred_headways, p.pred_dc, D)
    assert corollary1_conditions(p).theorem1_ok == corollary1_conditions(q).theorem1_ok


def test_theorem_and_corollary_agree_at_zero_delay():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p = random_channel(rng, dc_max=0.0)
        # with dc = 0 the first-channel quantities reduce to beta and gamma_1
        assert theorem1_conditions(p).theorem1_ok == corollary1_conditions(p).theorem1_ok


def test_theorem_passing_points_are_norm_stable():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 60:
        p = random_channel(rng)
        if theorem1_conditions(p).theorem1_ok:
            checked += 1
            assert string_stable_norm(p).norm_ok


def test_min_headway_bound_example():
    assert min_headway_bound(0.1, 3, 2.0) == pytest.approx(0.2 / 2.2)


# -- pole placement -----------------------------------------------------------


def test_pole_placement_example():
    alpha, b, c = pole_placement_gains(-2.0, 1.0, 3, 0.2)
    assert (alpha, b, c) == pytest.approx((8 / 3, 4 / 3, 1 / 3))
    p = ChannelParams.homogeneous(alpha, b, c, 0.2, 1.0, 3)
    assert denominator_coeffs(p) == pytest.approx((1, 6, 12, 8))


def test_pole_placement_rejects_bad_poles():
    with pytest.raises(NonNegativePole):
        pole_placement_gains(0.0, 1.0, 2, 0.2)
    with pytest.raises(NonPositiveGain):
        pole_placement_gains(-1 / (3 * 0.2), 1.0, 2, 0.2)
    with pytest.raises(NonPositiveGain):
        pole_placement_gains(-3.5, 1.0, 2, 0.2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_parameterized_transfer_function_matches_direct(seed):
    rng = np.random.default_rng(seed)
    tau, h, m = rng.uniform(0.05, 0.5), rng.uniform(0.3, 2.0), int(rng.integers(1, 5))
    lo, hi = -3 / h, -1 / (3 * tau)
    assume(hi - lo > 1e-3)
    pole = rng.uniform(lo, hi)
    try:
        alpha, b, c = pole_placement_gains(pole, h, m, tau)
    except NonPositiveGain:
        assume(False)
    heads = rng.uniform(0.3, 2.0, m)
    dc = rng.uniform(0, 0.3, m)
    D = rng.uniform(0, 1.5)
    p = ChannelParams(alpha, b, c, tau, h, m, heads, dc, D)
    w = np.logspace(-2, 2, 40)
    for n in range(1, m + 1):
        direct = tf_magnitude(p, n, w)
        param = tf_parameterized_magnitude(pole, h, m, tau, dc, D, n, w, heads)
        np.testing.assert_allclose(param, direct, rtol=1e-10, atol=1e-14)


# -- sweeps -------------------------------------------------------------------


def test_axis_parse():
    ax = Axis.parse("h:0.1:2:20")
    assert (ax.name, ax.start, ax.stop, ax.steps) == ("h", 0.1, 2.0, 20)
    assert ax.values[0] == 0.1 and ax.values[-1] == 2.0
    for bad in ("q:0:1:10", "h:0:1", "h:0:1:1", "h:a:1:10"):
        with pytest.raises(InvalidAxis):
            Axis.parse(bad)


def test_region_sweep_shape_and_threads_agree():
    ax1, ax2 = Axis("h", 0.1, 1.5, 8), Axis("dc", 0.0, 0.3, 4)
    serial = region_sweep(ax1, ax2, reference_channel(1), [1, 2], n_grid=512, workers=1)
    threaded = region_sweep(ax1, ax2, reference_channel(1), [1, 2], n_grid=512, workers=3)
    for m in (1, 2):
        assert serial[m].shape == (8, 4)
        assert np.array_equal(serial[m], threaded[m])
    assert serial[2].sum() >= serial[1].sum()


def test_minimal_stable():
    vals = np.array([0.1, 0.2, 0.3])
    assert minimal_stable(vals, np.array([False, True, True])) == 0.2
    assert minimal_stable(vals, np.zeros(3, bool)) == np.inf


def test_thread_count_from_environment(monkeypatch):
    from mpfcacc.frequency import default_workers

    monkeypatch.setenv("PLATOON_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.delenv("PLATOON_THREADS")
    assert default_workers() >= 1
