"""Frequency-domain stability and string-stability analysis of one follower.

The closed-loop speed transfer from predecessor ``i-n`` to vehicle ``i`` is

    G_n(s) = (c s^2 + (b - (m-n) alpha h_{i-n}/h) s + alpha/h) e^{-s dc_{i-n}} / den(s)

for ``n >= 2``, where ``den(s) = s^3 + (1 + m tau c)/tau s^2 + m(alpha + b) s + m alpha/h``.
The first predecessor channel carries an extra term because the ego's own
spacing is read without communication delay. Neither depends on the
actuation delay when ``dc = 0``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidAxis,
    InvalidParameter,
    NonNegativePole,
    NonPositiveGain,
    NonzeroCommDelay,
    UnstableChannel,
)

STABLE_TOL = 1e-9
OMEGA_MIN = 1e-4
OMEGA_MAX = 1e4
GRID_POINTS = 2048


@dataclass(frozen=True)
class ChannelParams:
    """Ego gains and lag plus what it needs to know about its ``m`` predecessors.

    ``pred_headways[n-1]`` and ``pred_dc[n-1]`` belong to vehicle ``i-n``.
    """

    alpha: float
    b: float
    c: float
    tau: float
    h: float
    m: int
    pred_headways: tuple
    pred_dc: tuple
    D: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pred_headways", tuple(float(x) for x in self.pred_headways))
        object.__setattr__(self, "pred_dc", tuple(float(x) for x in self.pred_dc))
        if len(self.pred_headways) != self.m or len(self.pred_dc) != self.m:
            raise InvalidParameter(
                f"need exactly m={self.m} predecessor headways and delays"
            )
        if self.m < 1:
            raise InvalidParameter("m must be >= 1")

    @classmethod
    def homogeneous(cls, alpha, b, c, tau, h, m, dc=0.0, D=0.0):
        return cls(alpha, b, c, tau, h, m, (h,) * m, (dc,) * m, D)

    @classmethod
    def from_platoon(cls, vehicles, i, D):
        """Parameters of follower ``i`` taken from a list of ``VehicleParams``."""
        ego = vehicles[i]
        preds = [vehicles[i - n] for n in range(1, ego.m + 1)]
        heads = [p.h if p.h is not None else ego.h for p in preds]
        return cls(ego.alpha, ego.b, ego.c, ego.tau, ego.h, ego.m, heads, [p.dc for p in preds], D)


@dataclass
class StabilityVerdict:
    routh_ok: bool
    routh_margin: float
    theorem1_ok: Optional[bool] = None
    margins: dict = field(default_factory=dict)
    norm_ok: Optional[bool] = None
    sigma_norm: Optional[float] = None
    hinf_per_channel: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return bool(self.routh_ok and self.norm_ok)


# ---------------------------------------------------------------------------
# denominator and individual stability


def denominator_coeffs(p: ChannelParams):
    """Monic cubic ``(1, d2, d1, d0)``; plain arithmetic so exact types pass through."""
    d2 = (1 + p.m * p.tau * p.c) / p.tau
    d1 = p.m * (p.alpha + p.b)
    d0 = p.m * p.alpha / p.h
    return (1, d2, d1, d0)


def routh_margin(p: ChannelParams) -> float:
    return (1 / p.tau + p.m * p.c) * (p.alpha + p.b) - p.alpha / p.h


def routh_stable(p: ChannelParams):
    """Hurwitz test for the closed-loop cubic. Returns ``(ok, margin)``."""
    _, d2, d1, d0 = denominator_coeffs(p)
    margin = routh_margin(p)
    ok = d2 > 0 and d1 > 0 and d0 > 0 and d2 * d1 > d0
    return bool(ok), float(margin)


# ---------------------------------------------------------------------------
# transfer functions


def _numerator_speed_coeff(p: ChannelParams, n: int):
    return p.b - (p.m - n) * p.alpha * p.pred_headways[n - 1] / p.h


def tf_value(p: ChannelParams, n: int, s):
    """Complex value ``G_{i,i-n}(s)``; ``s`` may be an array."""
    if not 1 <= n <= p.m:
        raise InvalidParameter(f"channel n={n} outside 1..{p.m}")
    s = np.asarray(s, dtype=complex)
    _, d2, d1, d0 = denominator_coeffs(p)
    den = ((s + d2) * s + d1) * s + d0
    dc = p.pred_dc[n - 1]
    lag = np.exp(-s * dc)
    k = p.alpha / p.h
    num = (p.c * s**2 + _numerator_speed_coeff(p, n) * s) * lag
    if n == 1:
        num = num + k * (lag + p.m * np.exp(-s * p.D) * (1 - lag))
    else:
        num = num + k * lag
    return num / den


def tf_magnitude(p: ChannelParams, n: int, omega):
    """``|G_{i,i-n}(j omega)|``."""
    return np.abs(tf_value(p, n, 1j * np.asarray(omega, dtype=float)))


def _golden_max(f, lo, hi, tol=1e-12, max_iter=200):
    """Maximise a unimodal ``f`` on ``[lo, hi]`` (log-frequency coordinates)."""
    inv_phi = (math.sqrt(5) - 1) / 2
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = f(x1)
    return max(f1, f2)


def peak_magnitude(mag, n_grid=GRID_POINTS, omega_min=OMEGA_MIN, omega_max=OMEGA_MAX,
                   dc_value=None, n_refine=5):
    """Supremum of ``mag(omega)`` for ``omega > 0``.

    Log-spaced grid, then golden-section refinement around the largest local
    maxima. ``dc_value`` is the analytic zero-frequency limit, if known.
    """
    logw = np.linspace(math.log10(omega_min), math.log10(omega_max), n_grid)
    vals = mag(10.0**logw)
    best = float(vals.max())
    if dc_value is not None:
        best = max(best, float(dc_value))
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    candidates = interior[np.argsort(vals[interior])[::-1][:n_refine]]
    f = lambda x: float(mag(np.array([10.0**x]))[0])
    for idx in candidates:
        best = max(best, _golden_max(f, logw[idx - 1], logw[idx + 1]))
    return best


def hinf_norm(p: ChannelParams, n: int, n_grid=GRID_POINTS) -> float:
    """``sup_omega |G_{i,i-n}(j omega)|``; requires a Hurwitz denominator."""
    ok, margin = routh_stable(p)
    if not ok:
        raise UnstableChannel(f"closed loop not Hurwitz (margin {margin:.6g})")
    return peak_magnitude(lambda w: tf_magnitude(p, n, w), n_grid=n_grid, dc_value=1.0 / p.m)


def string_stable_norm(p: ChannelParams, n_grid=GRID_POINTS) -> StabilityVerdict:
    """Direct norm test: ``sum_n ||G_n||_inf <= 1`` (ties within 1e-9 pass)."""
    ok, margin = routh_stable(p)
    if not ok:
        raise UnstableChannel(f"closed loop not Hurwitz (margin {margin:.6g})")
    norms = [(n, hinf_norm(p, n, n_grid)) for n in range(1, p.m + 1)]
    sigma = sum(v for _, v in norms)
    worst = max(p.m * v for _, v in norms)
    return StabilityVerdict(
        routh_ok=ok,
        routh_margin=margin,
        norm_ok=bool(worst <= 1 + STABLE_TOL),
        sigma_norm=sigma,
        hinf_per_channel=norms,
    )


# ---------------------------------------------------------------------------
# analytic sufficient conditions


def beta(p: ChannelParams):
    return 1 / p.tau**2 + 2 * p.m * p.c / p.tau - 2 * p.m * (p.alpha + p.b)


def gamma_n(p: ChannelParams, n: int):
    m, a, ratio = p.m, p.alpha, p.pred_headways[n - 1] / p.h
    return (
        -2 * m * a / (p.h * p.tau)
        + 2 * m**2 * (1 + (m - n) * ratio) * a * p.b
        + m**2 * (1 - (m - n) ** 2 * ratio**2) * a**2
    )


def beta_bar(p: ChannelParams):
    m, c, dc1 = p.m, p.c, p.pred_dc[0]
    d2 = (1 + m * p.tau * c) / p.tau
    return (
        d2**2
        - 2 * m * (p.alpha + p.b)
        - m**2 * c**2
        - m**2 * 2 * c * (m * p.alpha / p.h) * dc1 * (2 * dc1 + p.D)
    )


def gamma_bar(p: ChannelParams):
    m, a, c, dc1 = p.m, p.alpha, p.c, p.pred_dc[0]
    d2 = (1 + m * p.tau * c) / p.tau
    speed = p.b - (m - 1) * a * p.pred_headways[0] / p.h
    delayed = m * a / p.h * dc1
    return (
        m**2 * (a + p.b) ** 2
        - 2 * d2 * m * a / p.h
        - m**2 * (-2 * c * a / p.h + speed**2 + 2 * delayed**2 + 4 * abs(speed) * delayed)
        - 2 * m**2 * a / p.h * delayed * (2 * dc1 + p.D)
    )


def theorem1_conditions(p: ChannelParams) -> StabilityVerdict:
    """Closed-form sufficient conditions for L2 string stability (any ``D``)."""
    ok, margin = routh_stable(p)
    bb, b_, gb = beta_bar(p), beta(p), gamma_bar(p)
    gammas = {n: gamma_n(p, n) for n in range(2, p.m + 1)}
    nonneg = bb >= 0 and b_ >= 0 and gb >= 0 and all(g >= 0 for g in gammas.values())
    discriminant = (
        4 * gb - bb**2 >= 0
        and all(4 * g - b_**2 >= 0 for g in gammas.values())
        and bb < 0
        and b_ < 0
    )
    return StabilityVerdict(
        routh_ok=ok,
        routh_margin=margin,
        theorem1_ok=bool(ok and (nonneg or discriminant)),
        margins={"beta_bar": bb, "beta": b_, "gamma_bar": gb, "gamma": gammas},
    )


def corollary1_conditions(p: ChannelParams) -> StabilityVerdict:
    """Delay-independent conditions, valid only without communication delay."""
    if any(d != 0 for d in p.pred_dc):
        raise NonzeroCommDelay("corollary conditions require all communication delays = 0")
    ok, margin = routh_stable(p)
    b_ = beta(p)
    gammas = {n: gamma_n(p, n) for n in range(1, p.m + 1)}
    nonneg = b_ >= 0 and all(g >= 0 for g in gammas.values())
    discriminant = b_ < 0 and all(4 * g - b_**2 >= 0 for g in gammas.values())
    return StabilityVerdict(
        routh_ok=ok,
        routh_margin=margin,
        theorem1_ok=bool(ok and (nonneg or discriminant)),
        margins={"beta": b_, "gamma": gammas},
    )


def min_headway_bound(tau, m, c):
    """Necessary headway for the delay-free conditions: ``2 tau / (1 + 2 tau m c)``."""
    return 2 * tau / (1 + 2 * tau * m * c)


# ---------------------------------------------------------------------------
# pole placement


def pole_placement_gains(pole, h, m, tau):
    """Gains that put all three closed-loop poles at ``pole``.

    Raises :class:`NonPositiveGain` when any of the gains is not positive,
    which happens unless ``-3/h < pole < -1/(3 tau)``.
    """
    if not pole < 0:
        raise NonNegativePole(f"pole must be negative, got {pole!r}")
    # ordered so that exact (Fraction) inputs stay exact
    alpha = -h * pole**3 / m
    b = h * pole**3 / m + 3 * pole**2 / m
    c = -1 / (m * tau) - 3 * pole / m
    for name, value in (("alpha", alpha), ("b", b), ("c", c)):
        if not value > 0:
            raise NonPositiveGain(f"{name}={float(value):.6g} for pole={float(pole):.6g}")
    return alpha, b, c


def tf_parameterized_value(pole, h, m, tau, dc, D, n, s, pred_headways=None):
    """``G_{i,i-n}(s)`` written directly in the pole-placement parameterisation."""
    dc = tuple(dc)
    heads = tuple(pred_headways) if pred_headways is not None else (h,) * m
    if len(dc) != m or len(heads) != m:
        raise InvalidParameter(f"need exactly m={m} predecessor delays and headways")
    if not 1 <= n <= m:
        raise InvalidParameter(f"channel n={n} outside 1..{m}")
    s = np.asarray(s, dtype=complex)
    lag = np.exp(-s * dc[n - 1])
    mu1 = -(1 / m) * (1 / tau + 3 * pole) * lag
    mu2 = pole**2 / m * (3 + h * pole + (m - n) * heads[n - 1] * pole) * lag
    if n == 1:
        mu3 = -(pole**3) / m * (lag + m * np.exp(-s * D) * (1 - lag))
    else:
        mu3 = -(pole**3) / m * lag
    return (mu1 * s**2 + mu2 * s + mu3) / (s - pole) ** 3


def tf_parameterized_magnitude(pole, h, m, tau, dc, D, n, omega, pred_headways=None):
    if not pole < 0:
        raise NonNegativePole(f"pole must be negative, got {pole!r}")
    w = np.asarray(omega, dtype=float)
    return np.abs(tf_parameterized_value(pole, h, m, tau, dc, D, n, 1j * w, pred_headways))


def parameterized_sigma_norm(pole, h, m, tau, dc, D, n_grid=GRID_POINTS):
    """``sum_n ||G_n||_inf`` for the pole-placement gains (no positivity check)."""
    dc = tuple(dc) if np.ndim(dc) else (dc,) * m
    return sum(
        peak_magnitude(
            lambda w, n=n: tf_parameterized_magnitude(pole, h, m, tau, dc, D, n, w),
            n_grid=n_grid,
            dc_value=1.0 / m,
        )
        for n in range(1, m + 1)
    )


# ---------------------------------------------------------------------------
# region sweeps

AXES = ("h", "dc", "D", "p")


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.name not in AXES:
            raise InvalidAxis(f"unknown axis {self.name!r}; choose from {AXES}")
        if self.steps < 2:
            raise InvalidAxis("an axis needs at least 2 steps")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``name:start:stop:steps``, e.g. ``h:0.1:2:100``."""
        try:
            name, start, stop, steps = text.split(":")
            return cls(name, float(start), float(stop), int(steps))
        except ValueError as exc:
            raise InvalidAxis(f"bad axis spec {text!r}: {exc}") from None


def _point_params(template: ChannelParams, m: int, values: dict) -> Optional[ChannelParams]:
    h = values.get("h", template.h)
    dc = values.get("dc", template.pred_dc[0] if template.pred_dc else 0.0)
    D = values.get("D", template.D)
    alpha, b, c = template.alpha, template.b, template.c
    if "p" in values:
        try:
            alpha, b, c = pole_placement_gains(values["p"], h, m, template.tau)
        except (NonPositiveGain, NonNegativePole):
            return None
    return ChannelParams.homogeneous(alpha, b, c, template.tau, h, m, dc, D)


def point_verdict(template: ChannelParams, m: int, values: dict, n_grid=GRID_POINTS) -> bool:
    """Individual and string stability at a single sweep point."""
    p = _point_params(template, m, values)
    if p is None or not routh_stable(p)[0]:
        return False
    return bool(string_stable_norm(p, n_grid).norm_ok)


def default_workers() -> int:
    env = os.environ.get("PLATOON_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def region_sweep(axis1: Axis, axis2: Axis, template: ChannelParams, m_values: Sequence[int],
                 n_grid=GRID_POINTS, workers=None):
    """Stability grid for each ``m``.

    Returns ``{m: bool array of shape (axis1.steps, axis2.steps)}``; entry
    ``[r, k]`` is the point ``(axis1.values[r], axis2.values[k])``.
    Homogeneous headways and delays are assumed across predecessors.
    """
    if axis1.name == axis2.name:
        raise InvalidAxis("the two axes must differ")
    xs, ys = axis1.values, axis2.values
    jobs = [(m, r, k) for m in m_values for r in range(len(xs)) for k in range(len(ys))]

    def run(job):
        m, r, k = job
        return point_verdict(template, m, {axis1.name: xs[r], axis2.name: ys[k]}, n_grid)

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            flags = list(pool.map(run, jobs))
    else:
        flags = [run(j) for j in jobs]
    out = {m: np.zeros((len(xs), len(ys)), dtype=bool) for m in m_values}
    for (m, r, k), flag in zip(jobs, flags):
        out[m][r, k] = flag
    return out


def minimal_stable(values: np.ndarray, column: np.ndarray) -> float:
    """Smallest axis value flagged stable in ``column`` (``inf`` if none)."""
    hits = np.flatnonzero(column)
    return float(values[hits[0]]) if hits.size else math.inf
