"""Poincare sections, bifurcation diagrams, period counting and spectra."""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field
from math import factorial
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, TooShort, WrongArchitecture
from .machine import Arch, Diverged, FreeRunConfig, Machine, Transfer, free_run
from .timeseries import TimeSeries


class Direction(enum.Enum):
    FROM_ABOVE = "from_above"
    FROM_BELOW = "from_below"


class Interp(enum.Enum):
    LINEAR = "linear"
    CUBIC = "cubic"


@dataclass(frozen=True)
class SectionConfig:
    """Section ``phi = c`` crossed in ``direction``, sampled ``T`` earlier.

    ``interp`` selects how the sampled record is made continuous: piecewise
    linear, or the cubic through the four nearest samples.
    """

    c: float = 5.0
    direction: Direction = Direction.FROM_ABOVE
    T: float = 0.01
    component: int = 0
    interp: Interp = Interp.LINEAR

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("delay T must be non-negative")


def _lagrange4(y, k, s):
    """Cubic through samples ``k-1..k+2`` at fractional offset ``s`` from ``k``."""
    return (-s * (s - 1) * (s - 2) / 6 * y[k - 1] + (s + 1) * (s - 1) * (s - 2) / 2 * y[k]
            - (s + 1) * s * (s - 2) / 2 * y[k + 1] + (s + 1) * s * (s - 1) / 6 * y[k + 2])


def _lagrange4_slope(y, k, s):
    return (-(3 * s * s - 6 * s + 2) / 6 * y[k - 1] + (3 * s * s - 4 * s - 1) / 2 * y[k]
            - (3 * s * s - 2 * s - 2) / 2 * y[k + 1] + (3 * s * s - 1) / 6 * y[k + 2])


def _interp_at(t, y, tq, interp):
    if interp is Interp.LINEAR or y.size < 4:
        return np.interp(tq, t, y)
    pos = (tq - t[0]) / (t[1] - t[0])
    k = np.clip(np.floor(pos).astype(int), 1, y.size - 3)
    return _lagrange4(y, k, pos - k)


def _trace(series: TimeSeries, component: int) -> tuple[np.ndarray, np.ndarray]:
    if len(series.segments) != 1:
        raise ValueError("section analysis needs a single-segment series")
    return series.times(0), series.values[:, component]


def find_crossings(series: TimeSeries, cfg: SectionConfig) -> np.ndarray:
    """Times at which the chosen component crosses ``cfg.c`` in ``cfg.direction``.

    A crossing needs a strict sign change of ``x - c``; samples sitting
    exactly on the level are skipped, so grazing contacts do not count.
    The crossing time is interpolated between the bracketing samples (or is
    the first on-level sample when one exists).
    """
    t, y = _trace(series, cfg.component)
    d = y - cfg.c
    nz = np.flatnonzero(d != 0)
    if nz.size < 2:
        return np.empty(0)
    p, q = nz[:-1], nz[1:]
    if cfg.direction is Direction.FROM_ABOVE:
        hit = (d[p] > 0) & (d[q] < 0)
    else:
        hit = (d[p] < 0) & (d[q] > 0)
    p, q = p[hit], q[hit]
    adjacent = q == p + 1
    frac = np.where(adjacent, d[p] / np.where(adjacent, d[p] - d[q], 1.0), 1.0)
    if cfg.interp is Interp.CUBIC and y.size >= 4:
        inner = adjacent & (p >= 1) & (p <= y.size - 3)
        k, sk = p[inner], frac[inner]
        for _ in range(8):
            slope = _lagrange4_slope(d, k, sk)
            step = np.divide(_lagrange4(d, k, sk), slope, out=np.zeros_like(sk), where=slope != 0)
            sk = np.clip(sk - step, 0.0, 1.0)
        frac[inner] = sk
    return t[p] + (t[1] - t[0]) * frac


def section_values(series: TimeSeries, crossings: Sequence[float], cfg: SectionConfig) -> np.ndarray:
    """Delayed coordinate ``x(t_c - T)`` per crossing.

    Crossings whose delayed time falls before the record are dropped.
    """
    t, y = _trace(series, cfg.component)
    tq = np.asarray(crossings, dtype=float) - cfg.T
    tq = tq[(tq >= t[0]) & (tq <= t[-1])]
    return _interp_at(t, y, tq, cfg.interp)


def section_points(series: TimeSeries, cfg: SectionConfig) -> np.ndarray:
    return section_values(series, find_crossings(series, cfg), cfg)


def section_map(series: TimeSeries, c: float, T1: float, T2: float, component: int = 0,
                direction: Direction = Direction.FROM_ABOVE,
                interp: Interp = Interp.LINEAR) -> np.ndarray:
    """Pairs ``(x(t_c - T1), x(t_c - T2))``, shape ``(n, 2)``."""
    t, y = _trace(series, component)
    tc = find_crossings(series, SectionConfig(c, direction, 0.0, component, interp))
    keep = (tc - max(T1, T2) >= t[0]) & (tc - min(T1, T2) <= t[-1])
    tc = tc[keep]
    return np.column_stack([_interp_at(t, y, tc - T1, interp), _interp_at(t, y, tc - T2, interp)])


# -- period counting ---------------------------------------------------------

@dataclass(frozen=True)
class Clusters:
    count: int
    centers: np.ndarray
    max_width: float


def cluster_periods(values: Iterable[float], tol: float | None = None) -> Clusters:
    """Single-linkage clustering on the line: a gap wider than ``tol`` splits.

    ``tol`` defaults to 1% of the value range, floored at a relative 1e-9 of
    the largest magnitude so rounding noise on one repeated value stays one
    cluster.
    """
    x = np.sort(np.asarray(list(values), dtype=float))
    if x.size == 0:
        raise EmptyInput("no values to cluster")
    if tol is None:
        tol = max(0.01 * (x[-1] - x[0]), 1e-9 * max(abs(x[0]), abs(x[-1])))
    cuts = np.flatnonzero(np.diff(x) > tol) + 1
    groups = np.split(x, cuts)
    centers = np.array([g.mean() for g in groups])
    width = max(float(g[-1] - g[0]) for g in groups)
    return Clusters(len(groups), centers, width)


# -- bifurcation diagrams ------------------------------------------------------

class AxisLabel(enum.Enum):
    INV_LAMBDA = "inv_lambda"
    PARAMETER = "parameter"


@dataclass
class DiagramRow:
    abscissa: float
    label: AxisLabel
    branch: int | None
    points: np.ndarray = field(default_factory=lambda: np.empty(0))
    diverged: bool = False


DIAGRAM_HEADER = ("abscissa", "label", "branch", "diverged", "point")


@dataclass
class BifurcationDiagram:
    rows: list[DiagramRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def branch(self, tag: int) -> list[DiagramRow]:
        return [r for r in self.rows if r.branch == tag]

    def for_display(self) -> "BifurcationDiagram":
        """Drop rows repeating the previous row's abscissa (keeps the latest)."""
        out: list[DiagramRow] = []
        for r in self.rows:
            if out and r.label is AxisLabel.INV_LAMBDA and out[-1].label is AxisLabel.INV_LAMBDA \
                    and out[-1].abscissa == r.abscissa:
                out[-1] = r
            else:
                out.append(r)
        return BifurcationDiagram(out)

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIAGRAM_HEADER)
            for r in self.rows:
                lead = [repr(float(r.abscissa)), r.label.value,
                        "" if r.branch is None else r.branch, int(r.diverged)]
                if r.points.size == 0:
                    w.writerow(lead + [""])
                for p in r.points:
                    w.writerow(lead + [repr(float(p))])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "BifurcationDiagram":
        rows: list[DiagramRow] = []
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            if tuple(next(rd)) != DIAGRAM_HEADER:
                raise ValueError("not a bifurcation diagram CSV")
            key = None
            pts: list[float] = []
            for a, lab, br, dv, p in rd:
                k = (a, lab, br, dv)
                if k != key:
                    if key is not None:
                        rows.append(_row_from(key, pts))
                    key, pts = k, []
                if p != "":
                    pts.append(float(p))
            if key is not None:
                rows.append(_row_from(key, pts))
        return cls(rows)


def _row_from(key, pts):
    a, lab, br, dv = key
    return DiagramRow(float(a), AxisLabel(lab), None if br == "" else int(br),
                      np.array(pts), bool(int(dv)))


def machine_bifurcation(checkpoints, seed_data: TimeSeries, section: SectionConfig,
                        run: FreeRunConfig = FreeRunConfig(),
                        reference_amplitude: float | None = None) -> BifurcationDiagram:
    """One row per checkpoint at abscissa ``1/lambda``.

    ``checkpoints`` are objects with ``machine`` and ``lam`` attributes in
    training order. A free run that leaves the guard band yields an empty
    row flagged ``diverged``.
    """
    rows = []
    for idx, ck in enumerate(checkpoints):
        x = 1.0 / ck.lam if ck.lam > 0 else np.inf
        res = free_run(ck.machine, seed_data, run, reference_amplitude)
        if isinstance(res, Diverged):
            rows.append(DiagramRow(x, AxisLabel.INV_LAMBDA, idx, np.empty(0), True))
        else:
            rows.append(DiagramRow(x, AxisLabel.INV_LAMBDA, idx, section_points(res, section)))
    return BifurcationDiagram(rows)


# -- cubic machine expansion -------------------------------------------------

MONOMIALS: tuple[tuple[str, tuple[int, int, int]], ...] = (
    ("x3", (3, 0, 0)), ("y3", (0, 3, 0)), ("z3", (0, 0, 3)),
    ("x2y", (2, 1, 0)), ("x2z", (2, 0, 1)), ("xy2", (1, 2, 0)),
    ("y2z", (0, 2, 1)), ("xz2", (1, 0, 2)), ("yz2", (0, 1, 2)), ("xyz", (1, 1, 1)),
    ("x2", (2, 0, 0)), ("y2", (0, 2, 0)), ("z2", (0, 0, 2)),
    ("xy", (1, 1, 0)), ("xz", (1, 0, 1)), ("yz", (0, 1, 1)),
    ("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1)),
    ("1", (0, 0, 0)),
)
MONOMIAL_LABELS = tuple(name for name, _ in MONOMIALS)
CUBIC_LABELS = MONOMIAL_LABELS[:10]


@dataclass(frozen=True)
class PolyCoeffs:
    """Coefficients of the 20 monomials of total degree <= 3 in ``x, y, z``."""

    values: np.ndarray

    def __getitem__(self, label: str) -> float:
        return float(self.values[MONOMIAL_LABELS.index(label)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(MONOMIAL_LABELS, self.values.tolist()))

    def evaluate(self, state) -> float:
        x = np.asarray(state, dtype=float)
        return float(sum(c * np.prod(x ** np.array(e)) for c, (_, e) in zip(self.values, MONOMIALS)))

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("monomial", "coefficient"))
            for k, c in zip(MONOMIAL_LABELS, self.values):
                w.writerow((k, repr(float(c))))


def expand_cubic_coefficients(m: Machine, k: int = 0) -> PolyCoeffs:
    """Multinomial expansion of ``sum_i u_ik (beta_i (v_i . x - b_i))^3``.

    These are the coefficients of the hidden sum, before the factor ``tau``.
    """
    if m.arch is not Arch.VECTOR or m.f is not Transfer.CUBIC or m.M != 3:
        raise WrongArchitecture("expansion needs a VECTOR machine with CUBIC transfer and M=3")
    w = m.u[:, k] * m.beta ** 3
    v1, v2, v3 = m.v.T
    nb = -m.b
    out = np.empty(len(MONOMIALS))
    for pos, (_, (a, b, c)) in enumerate(MONOMIALS):
        d = 3 - a - b - c
        mult = factorial(3) // (factorial(a) * factorial(b) * factorial(c) * factorial(d))
        out[pos] = mult * np.sum(w * v1 ** a * v2 ** b * v3 ** c * nb ** d)
    return PolyCoeffs(out)


# -- spectra ---------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    power: np.ndarray
    peaks: tuple[tuple[float, float], ...]

    def peak_ratio(self) -> float:
        """Lower over higher frequency of the two strongest peaks."""
        if len(self.peaks) < 2:
            raise ValueError("fewer than two spectral peaks")
        f1, f2 = self.peaks[0][0], self.peaks[1][0]
        return min(f1, f2) / max(f1, f2)

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("frequency", "power"))
            for f, p in zip(self.frequencies, self.power):
                w.writerow((repr(float(f)), repr(float(p))))


def periodogram(series: TimeSeries, component: int = 0, max_peaks: int = 10) -> Spectrum:
    """One-sided power spectrum of the mean-removed, Hann-windowed series.

    Power is normalised so that its sum equals the energy of the windowed
    signal. Peaks are local maxima ranked by power, each located by a
    parabola through the log-power of the three bins around it.
    """
    if len(series.segments) != 1:
        raise ValueError("periodogram needs a single-segment series")
    x = series.values[:, component]
    n = x.size
    if n < 16:
        raise TooShort("periodogram needs at least 16 samples")
    xw = (x - x.mean()) * np.hanning(n)
    spec = np.fft.rfft(xw)
    power = np.abs(spec) ** 2 / n
    power[1:(n + 1) // 2] *= 2.0
    freqs = np.fft.rfftfreq(n, series.tau)
    return Spectrum(freqs, power, _peaks(freqs, power, max_peaks))


def _peaks(freqs, power, max_peaks):
    if power.size < 3:
        return ()
    mid = power[1:-1]
    idx = np.flatnonzero((mid > power[:-2]) & (mid >= power[2:])) + 1
    idx = idx[np.argsort(power[idx])[::-1]][:max_peaks]
    floor = np.finfo(float).tiny
    df = freqs[1] - freqs[0]
    out = []
    for i in idx:
        a, b, c = np.log(np.maximum(power[i - 1:i + 2], floor))
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den < 0 else 0.0
        out.append((float(freqs[i] + shift * df), float(power[i])))
    return tuple(out)
