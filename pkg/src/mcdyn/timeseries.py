"""Uniformly sampled time series split into gap-free segments."""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np


@dataclass(frozen=True)
class TimeSeries:
    """Scalar or vector records at interval ``tau``.

    ``segments`` holds one ``(length, dim)`` array per contiguous block and
    ``t0`` the start time of each block. Samples never span two blocks.
    """

    tau: float
    segments: tuple[np.ndarray, ...]
    t0: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        segs = []
        for s in self.segments:
            a = np.asarray(s, dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2 or a.shape[0] < 1:
                raise ValueError("every segment needs at least one record")
            if not np.all(np.isfinite(a)):
                raise ValueError("time series values must be finite")
            segs.append(a)
        if not segs:
            raise ValueError("time series needs at least one segment")
        if len({a.shape[1] for a in segs}) != 1:
            raise ValueError("segments disagree on dimension")
        t0 = tuple(float(t) for t in self.t0) if self.t0 else (0.0,) * len(segs)
        if len(t0) != len(segs):
            raise ValueError("one start time per segment required")
        if any(b <= a for a, b in zip(t0, t0[1:])):
            raise ValueError("segment start times must be strictly increasing")
        object.__setattr__(self, "segments", tuple(segs))
        object.__setattr__(self, "t0", t0)

    @classmethod
    def single(cls, values, tau: float, t0: float = 0.0) -> "TimeSeries":
        return cls(tau=tau, segments=(np.asarray(values, dtype=float),), t0=(t0,))

    @property
    def dim(self) -> int:
        return self.segments[0].shape[1]

    @property
    def n_records(self) -> int:
        return sum(s.shape[0] for s in self.segments)

    @property
    def values(self) -> np.ndarray:
        """The records of a single-segment series, shape ``(n, dim)``."""
        if len(self.segments) != 1:
            raise ValueError("series has more than one segment")
        return self.segments[0]

    def times(self, k: int = 0) -> np.ndarray:
        return self.t0[k] + self.tau * np.arange(self.segments[k].shape[0])

    def component(self, j: int) -> "TimeSeries":
        return TimeSeries(self.tau, tuple(s[:, j : j + 1] for s in self.segments), self.t0)

    def segment(self, k: int) -> "TimeSeries":
        return TimeSeries(self.tau, (self.segments[k],), (self.t0[k],))

    def longest_segment(self) -> "TimeSeries":
        return self.segment(int(np.argmax([s.shape[0] for s in self.segments])))

    def head(self, n: int) -> "TimeSeries":
        return TimeSeries.single(self.values[:n], self.tau, self.t0[0])

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(s)) for s in self.segments))

    def all_values(self) -> np.ndarray:
        return np.concatenate(self.segments, axis=0)

