"""Loading observed light curves and preparing them for training.

Input is a two-column CSV (time, value) such as a Kepler light curve
exported with TIME and SAP_FLUX columns. Empty or non-finite values mark
missing cadences; the series is cut into gap-free segments and never
interpolated across a gap.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConstantSeries, NonMonotonicTime, ParseError, TooSparse
from .timeseries import TimeSeries


@dataclass(frozen=True)
class RawSeries:
    times: np.ndarray
    values: np.ndarray  # NaN marks a missing point

    def __len__(self):
        return self.times.size


def _to_float(text: str) -> float:
    text = text.strip()
    if not text:
        return np.nan
    return float(text)


def load_series_csv(path: str | os.PathLike, time_col: int | str = 0,
                    value_col: int | str = 1) -> RawSeries:
    """Read ``(time, value)`` pairs; a non-numeric first row is a header.

    Columns may be chosen by index or, when a header is present, by name.
    """
    with open(path, newline="") as fh:
        rows = [(n, row) for n, row in enumerate(csv.reader(fh), start=1)
                if row and any(c.strip() for c in row) and not row[0].lstrip().startswith("#")]
    names = None
    if rows:
        try:
            float(rows[0][1][0])
        except ValueError:
            names = [c.strip() for c in rows[0][1]]
            rows = rows[1:]
    cols = []
    for col in (time_col, value_col):
        if isinstance(col, str):
            if names is None or col not in names:
                raise ParseError(f"column {col!r} not found in header", 1)
            col = names.index(col)
        cols.append(col)
    ti, vi = cols
    times, values = [], []
    for lineno, row in rows:
        try:
            t = float(row[ti])
            v = _to_float(row[vi]) if vi < len(row) else np.nan
        except (ValueError, IndexError) as exc:
            raise ParseError(f"cannot parse row {row!r}: {exc}", lineno) from None
        if not np.isfinite(t):
            raise ParseError("time must be finite", lineno)
        if times and t <= times[-1]:
            raise NonMonotonicTime(f"line {lineno}: time {t} does not increase")
        times.append(t)
        values.append(v if np.isfinite(v) else np.nan)
    return RawSeries(np.array(times), np.array(values))


def to_uniform_segments(raw: RawSeries, gap_factor: float = 1.5) -> TimeSeries:
    """Cut at missing values and at time steps longer than ``gap_factor * tau``.

    ``tau`` is the median spacing between consecutive finite points. The
    points inside each segment are kept as they are.
    """
    ok = np.isfinite(raw.values)
    if ok.sum() < 2:
        raise TooSparse("need at least two finite points")
    both = ok[1:] & ok[:-1]
    dts = np.diff(raw.times)[both]
    if dts.size == 0:
        raise TooSparse("no two consecutive finite points")
    tau = float(np.median(dts))
    blocks = []
    cur: list[int] = []
    for i in range(len(raw)):
        if not ok[i]:
            if cur:
                blocks.append(cur)
            cur = []
            continue
        if cur and raw.times[i] - raw.times[cur[-1]] > gap_factor * tau:
            blocks.append(cur)
            cur = []
        cur.append(i)
    if cur:
        blocks.append(cur)
    blocks = [b for b in blocks if len(b) >= 2]
    if not blocks:
        raise TooSparse("no segment has two or more points")
    segs = tuple(raw.values[b] for b in blocks)
    return TimeSeries(tau, segs, tuple(float(raw.times[b[0]]) for b in blocks))


@dataclass(frozen=True)
class Normalized:
    series: TimeSeries
    offset: float
    scale: float

    def denormalize(self, x):
        return np.asarray(x) * self.scale + self.offset


def normalize_amplitude(series: TimeSeries) -> Normalized:
    """Affine map taking ``[min, max]`` over all segments onto ``[-1, 1]``."""
    allv = series.all_values()
    lo, hi = float(allv.min()), float(allv.max())
    if hi == lo:
        raise ConstantSeries("cannot normalise a constant series")
    offset = (hi + lo) / 2
    scale = (hi - lo) / 2
    segs = tuple((s - offset) / scale for s in series.segments)
    return Normalized(TimeSeries(series.tau, segs, series.t0), offset, scale)


def clip_time(series: TimeSeries, t_max: float) -> TimeSeries:
    """Keep records with time ``<= t_max`` (segment structure preserved)."""
    segs, starts = [], []
    for k, seg in enumerate(series.segments):
        keep = series.times(k) <= t_max + 1e-9 * series.tau
        if keep.any():
            segs.append(seg[keep])
            starts.append(series.t0[k])
    if not segs:
        raise TooSparse(f"no records before t={t_max}")
    return TimeSeries(series.tau, tuple(segs), tuple(starts))
