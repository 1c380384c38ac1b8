"""Reference systems: the Lorenz flow and a planar stable limit cycle.

Trajectories are produced with classical fixed-step fourth-order
Runge-Kutta so that every run is bit-reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numba
import numpy as np

from .analysis import AxisLabel, BifurcationDiagram, DiagramRow, SectionConfig, section_points
from .errors import IntegrationDiverged
from .machine import FreeRunConfig
from .timeseries import TimeSeries

LORENZ_PARAMS = ("sigma", "R", "B")
DEFAULT_LORENZ_INITS = ((1.0, 1.0, 1.0), (-1.0, -1.0, 1.0))


class SystemKind(enum.Enum):
    LORENZ = "lorenz"
    STABLE_LIMIT_CYCLE = "limit_cycle"


@dataclass(frozen=True)
class SystemSpec:
    kind: SystemKind
    params: tuple[float, ...] = ()

    def __post_init__(self):
        params = tuple(float(p) for p in self.params)
        if self.kind is SystemKind.LORENZ:
            if len(params) != 3 or not all(np.isfinite(params)):
                raise ValueError("Lorenz needs three finite parameters (sigma, R, B)")
        elif params:
            raise ValueError("the limit-cycle system takes no parameters")
        object.__setattr__(self, "params", params)

    @property
    def dim(self) -> int:
        return 3 if self.kind is SystemKind.LORENZ else 2

    @property
    def code(self) -> int:
        return 0 if self.kind is SystemKind.LORENZ else 1

    def with_param(self, name: str, value: float) -> "SystemSpec":
        if self.kind is not SystemKind.LORENZ or name not in LORENZ_PARAMS:
            raise ValueError(f"unknown parameter {name!r} for {self.kind.value}")
        p = list(self.params)
        p[LORENZ_PARAMS.index(name)] = value
        return replace(self, params=tuple(p))


def lorenz(sigma: float = 10.0, R: float = 28.0, B: float = 8.0 / 3.0) -> SystemSpec:
    return SystemSpec(SystemKind.LORENZ, (sigma, R, B))


def limit_cycle() -> SystemSpec:
    return SystemSpec(SystemKind.STABLE_LIMIT_CYCLE)


@numba.njit(cache=True)
def _field(code, p, s, out):
    if code == 0:
        x, y, z = s[0], s[1], s[2]
        out[0] = -p[0] * (x - y)
        out[1] = -x * z + p[1] * x - y
        out[2] = x * y - p[2] * z
    else:
        x, y = s[0], s[1]
        r2 = x * x + y * y
        out[0] = x + y - x * r2
        out[1] = -x + y - y * r2


@numba.njit(cache=True)
def _rk4(code, p, s, dt, k1, k2, k3, k4, tmp):
    d = s.size
    _field(code, p, s, k1)
    for j in range(d):
        tmp[j] = s[j] + 0.5 * dt * k1[j]
    _field(code, p, tmp, k2)
    for j in range(d):
        tmp[j] = s[j] + 0.5 * dt * k2[j]
    _field(code, p, tmp, k3)
    for j in range(d):
        tmp[j] = s[j] + dt * k3[j]
    _field(code, p, tmp, k4)
    for j in range(d):
        s[j] = s[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@numba.njit(cache=True)
def _integrate(code, p, init, dt, substeps, n_skip, n_records):
    """Returns (records, bad_step); bad_step < 0 on success."""
    d = init.size
    s = init.copy()
    k1, k2, k3, k4, tmp = (np.empty(d), np.empty(d), np.empty(d), np.empty(d), np.empty(d))
    out = np.empty((n_records, d))
    for step in range(n_skip):
        _rk4(code, p, s, dt, k1, k2, k3, k4, tmp)
        if not np.all(np.isfinite(s)):
            return out, step + 1
    for r in range(n_records):
        if r > 0:
            for _ in range(substeps):
                _rk4(code, p, s, dt, k1, k2, k3, k4, tmp)
            if not np.all(np.isfinite(s)):
                return out, n_skip + r * substeps
        out[r] = s
    return out, -1


def _check_state(spec: SystemSpec, state) -> np.ndarray:
    s = np.array(state, dtype=float).ravel()
    if s.size != spec.dim:
        raise ValueError(f"{spec.kind.value} state must have {spec.dim} components")
    return s


def vector_field(spec: SystemSpec, state) -> np.ndarray:
    s = _check_state(spec, state)
    out = np.empty_like(s)
    _field(spec.code, np.array(spec.params), s, out)
    return out


def rk4_step(spec: SystemSpec, state, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = _check_state(spec, state)
    d = s.size
    _rk4(spec.code, np.array(spec.params), s, dt, *(np.empty(d) for _ in range(5)))
    if not np.all(np.isfinite(s)):
        raise IntegrationDiverged("non-finite state after RK4 step")
    return s


def _substeps(tau: float, dt: float) -> int:
    k = int(round(tau / dt))
    if k < 1 or abs(k * dt - tau) > 1e-9 * tau:
        raise ValueError("tau must be an integer multiple of dt")
    return k


def simulate(spec: SystemSpec, init, dt: float = 1e-3, tau: float = 0.01,
             n_records: int = 3000, t_discard: float = 100.0) -> TimeSeries:
    """Record ``n_records`` states every ``tau`` after ``t_discard`` of transient."""
    if not dt > 0 or n_records < 1 or t_discard < 0:
        raise ValueError("need dt > 0, n_records >= 1, t_discard >= 0")
    k = _substeps(tau, dt)
    n_skip = int(round(t_discard / dt))
    s = _check_state(spec, init)
    out, bad = _integrate(spec.code, np.array(spec.params), s, dt, k, n_skip, n_records)
    if bad >= 0:
        raise IntegrationDiverged(f"trajectory became non-finite at step {bad}")
    return TimeSeries.single(out, tau, t0=n_skip * dt)


def target_bifurcation_scan(spec_template: SystemSpec, axis: str, values: Sequence[float],
                            section: SectionConfig = SectionConfig(),
                            run: FreeRunConfig = FreeRunConfig(),
                            inits: Sequence[Sequence[float]] = DEFAULT_LORENZ_INITS,
                            tau: float = 0.01, dt: float = 1e-3) -> BifurcationDiagram:
    """Section points of the reference system along one parameter.

    Every value is integrated from each of ``inits`` afresh (no
    continuation), discarding ``run.n_discard`` records and sampling
    ``run.n_record`` more at interval ``tau``. Rows carry the init index as
    their branch tag and are flagged instead of dropped when the trajectory
    blows up.
    """
    values = list(values)
    if not values or not inits:
        raise ValueError("need at least one parameter value and one initial condition")
    rows = []
    for x in values:
        spec = spec_template.with_param(axis, x)
        for tag, init in enumerate(inits):
            try:
                ts = simulate(spec, init, dt, tau, run.n_record, run.n_discard * tau)
            except IntegrationDiverged:
                rows.append(DiagramRow(float(x), AxisLabel.PARAMETER, tag, np.empty(0), True))
                continue
            rows.append(DiagramRow(float(x), AxisLabel.PARAMETER, tag, section_points(ts, section)))
    return BifurcationDiagram(rows)
