"""Uniformly sampled ring buffer used for delayed reads and quadrature windows."""

from __future__ import annotations

import numpy as np

from .errors import HistoryUnderflow


class SignalHistory:
    """Scalar signal sampled every ``Ts`` seconds starting at step 0.

    Reads before step 0 return ``initial``; reads older than the retained
    window, or newer than the last sample, raise :class:`HistoryUnderflow`.
    """

    def __init__(self, Ts: float, capacity: int, initial: float = 0.0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.Ts = Ts
        self.capacity = int(capacity)
        self.initial = float(initial)
        self._buf = np.full(self.capacity, self.initial)
        self._count = 0

    def __len__(self):
        return self._count

    @property
    def last_index(self) -> int:
        return self._count - 1

    def append(self, value: float) -> None:
        self._buf[self._count % self.capacity] = value
        self._count += 1

    def index_of(self, t: float) -> int:
        k = int(round(t / self.Ts))
        if abs(t - k * self.Ts) > 1e-9:
            raise HistoryUnderflow(f"t={t!r} is not on the sampling grid")
        return k

    @property
    def oldest_index(self) -> int:
        """Oldest step still readable; negative steps count only before wrap-around."""
        dropped = self._count - self.capacity
        return dropped if dropped > 0 else -(2**62)

    def _check(self, lo: int, hi: int) -> None:
        if hi > self.last_index:
            raise HistoryUnderflow(f"step {hi} not yet recorded (last {self.last_index})")
        if lo < self.oldest_index:
            raise HistoryUnderflow(f"step {lo} dropped from history (oldest {self.oldest_index})")

    def at(self, k: int) -> float:
        """Sample at step ``k``."""
        self._check(k, k)
        if k < 0:
            return self.initial
        return float(self._buf[k % self.capacity])

    def at_time(self, t: float) -> float:
        return self.at(self.index_of(t))

    def window(self, k_end: int, n: int) -> np.ndarray:
        """Samples at steps ``k_end - n + 1 .. k_end`` (oldest first)."""
        k0 = k_end - n + 1
        self._check(k0, k_end)
        steps = np.arange(k0, k_end + 1)
        out = self._buf[steps % self.capacity]
        if k0 < 0:
            out = out.copy()
            out[steps < 0] = self.initial
        return out
