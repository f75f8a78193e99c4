"""Leader speed profiles: piecewise-linear knots or a recorded ``t,v`` trace."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import EmptyFile, NegativeSpeed, NonMonotoneTime, ProfileError


@dataclass(frozen=True)
class LeaderProfile:
    """Leader speed and acceleration resampled on a uniform ``Ts`` grid.

    ``kind`` is ``"piecewise"`` for knot lists and ``"data"`` for recorded
    traces. Past the end of the profile the last speed is held.
    """

    kind: str
    Ts: float
    speed: np.ndarray
    accel: np.ndarray
    knots_t: np.ndarray
    knots_v: np.ndarray

    def __len__(self):
        return len(self.speed)

    def speed_at(self, k: int) -> float:
        if k >= len(self.speed):
            return float(self.speed[-1])
        return float(self.speed[max(k, 0)])

    def accel_at(self, k: int) -> float:
        if k >= len(self.accel) or k < 0:
            return 0.0
        return float(self.accel[k])

    def shifted(self, seconds: float) -> "LeaderProfile":
        """Same profile with every knot delayed by ``seconds`` (>= 0)."""
        if seconds == 0:
            return self
        t = np.concatenate(([0.0], self.knots_t + seconds))
        v = np.concatenate(([self.knots_v[0]], self.knots_v))
        return _build(self.kind, t, v, self.Ts)


def _validate_knots(t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.size == 0:
        raise EmptyFile("leader profile has no samples")
    if t.shape != v.shape or t.ndim != 1:
        raise ProfileError("times and speeds must be 1-D and of equal length")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ProfileError("leader profile contains non-finite values")
    if np.any(np.diff(t) <= 0):
        raise NonMonotoneTime("leader profile times must be strictly increasing")
    if np.any(v < 0):
        raise NegativeSpeed("leader profile speeds must be >= 0")
    return t, v


def _build(kind, t, v, Ts) -> LeaderProfile:
    t, v = _validate_knots(t, v)
    t = t - t[0]
    n = int(math.floor(t[-1] / Ts + 1e-9)) + 1
    grid = np.arange(n) * Ts
    speed = np.interp(grid, t, v)
    # forward differences: Euler integration of accel reproduces the samples
    accel = np.append(np.diff(speed) / Ts, 0.0)
    return LeaderProfile(kind, Ts, speed, accel, t, v)


def read_speed_csv(path):
    """Read a UTF-8 ``t,v`` CSV into two float arrays."""
    if os.path.getsize(path) == 0:
        raise EmptyFile(f"{path} is empty")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "v"]:
            raise ProfileError(f"{path}: expected header 't,v', got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise ProfileError(f"{path}:{lineno}: cannot parse {row!r}") from None
    if not rows:
        raise EmptyFile(f"{path} has a header but no samples")
    t, v = zip(*rows)
    return np.array(t), np.array(v)


def load_leader_profile(source, Ts: float = 0.01) -> LeaderProfile:
    """Build a profile from a knot list ``[(t, v), ...]`` or a CSV path.

    Speeds are linearly interpolated onto the ``Ts`` grid and the
    acceleration is the forward difference of consecutive samples.
    """
    if isinstance(source, (str, os.PathLike)):
        t, v = read_speed_csv(source)
        return _build("data", t, v, Ts)
    knots = list(source)
    if not knots:
        raise EmptyFile("empty knot list")
    t, v = zip(*knots)
    return _build("piecewise", t, v, Ts)


def constant_profile(speed: float, Ts: float = 0.01) -> LeaderProfile:
    return load_leader_profile([(0.0, speed), (Ts, speed)], Ts)


def pulse_profile(v0=14.0, dv=4.0, start=20.0, ramp=4.0, hold=10.0, Ts=0.01) -> LeaderProfile:
    """Accelerate by ``dv`` over ``ramp`` seconds, hold, then return to ``v0``."""
    t1 = start + ramp
    t2 = t1 + hold
    knots = [(0.0, v0), (start, v0), (t1, v0 + dv), (t2, v0 + dv), (t2 + ramp, v0)]
    return load_leader_profile(knots, Ts)
