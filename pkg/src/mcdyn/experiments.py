"""Shared building blocks for the experiment scripts and acceptance checks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, dynsys, ingest
from .config import RunConfig, package_data
from .errors import ConfigError, NoUsableSamples
from .machine import Arch, Machine, init_machine, predict
from .timeseries import TimeSeries
from .trainer import Checkpoint, TrainSchedule, build_samples, init_trainer, train


@dataclass
class TrainingData:
    """The series a config trains on, plus the amplitude scaling if any."""

    series: TimeSeries
    norm: ingest.Normalized | None = None


def _csv_path(cfg: RunConfig) -> Path:
    name = cfg.need("data", "path")
    for cand in (Path(name), Path(cfg.source).parent / name):
        if cand.exists():
            return cand
    return package_data(name)


def load_training_data(cfg: RunConfig) -> TrainingData:
    source = cfg.get("data", "source", "simulate")
    if source == "simulate":
        tau = cfg._num("data", "tau", 0.01)
        if cfg.get("data", "n_records") is not None:
            n = cfg._num("data", "n_records", kind=int)
        else:
            n = max(1, int(round(cfg._num("data", "length") / tau)))
        ts = dynsys.simulate(cfg.system(), cfg.system_init(), cfg._num("system", "dt", 1e-3),
                             tau, n, cfg._num("system", "t_discard", 100.0))
    elif source == "csv":
        raw = ingest.load_series_csv(_csv_path(cfg), cfg.get("data", "time_col", 0),
                                     cfg.get("data", "value_col", 1))
        ts = ingest.to_uniform_segments(raw, cfg._num("data", "gap_factor", 1.5))
        t_max = cfg.get("data", "t_max")
        if t_max is not None:
            ts = ingest.clip_time(ts, float(t_max))
    else:
        raise ConfigError(f"data.source: {source!r} is not one of simulate, csv")
    comp = cfg.get("data", "component", 0)
    if comp != "all":
        ts = ts.component(int(comp))
    norm = None
    if cfg.get("data", "normalize", False):
        norm = ingest.normalize_amplitude(ts)
        ts = norm.series
    return TrainingData(ts, norm)


def seed_window(series: TimeSeries, arch: Arch, M: int, at_end: bool = False) -> TimeSeries:
    """The start-up records for a free run: M values (one state for VECTOR).

    Taken from the start of the first segment long enough, or from the end
    of the last one when predicting beyond the training data.
    """
    n = M if arch is Arch.DELAYED_SCALAR else 1
    order = range(len(series.segments))
    usable = [k for k in (reversed(order) if at_end else order)
              if series.segments[k].shape[0] >= n]
    if not usable:
        raise NoUsableSamples(f"no segment holds the {n} records needed to start a free run")
    k = usable[0]
    vals = series.segments[k]
    start = vals.shape[0] - n if at_end else 0
    return TimeSeries.single(vals[start:start + n], series.tau,
                             series.t0[k] + series.tau * start)


# -- training chains ---------------------------------------------------------

@dataclass
class Chain:
    data: TrainingData
    checkpoints: list[Checkpoint]
    seconds: float
    machine_seed: int
    trainer_seed: int
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> Checkpoint:
        return self.checkpoints[-1]

    @property
    def best(self) -> Checkpoint:
        return min(self.checkpoints, key=lambda ck: ck.lam)


def initial_machine(cfg: RunConfig, data: TrainingData, seed: int) -> Machine:
    inc = bool(cfg.get("machine", "include_current_in_hidden", False))
    return init_machine(cfg.arch(), cfg._num("machine", "M", kind=int),
                        cfg._num("machine", "N", 3000, int), data.series.tau, cfg.bounds(),
                        cfg.transfer(), seed=seed,
                        include_current=inc)


def run_chain(cfg: RunConfig, machine_seed: int | None = None, trainer_seed: int | None = None,
              schedule: TrainSchedule | None = None, on_checkpoint=None,
              data: TrainingData | None = None) -> Chain:
    data = data or load_training_data(cfg)
    ms = cfg.seed("machine") if machine_seed is None else machine_seed
    ts = cfg.seed("trainer") if trainer_seed is None else trainer_seed
    m = initial_machine(cfg, data, ms)
    samples = build_samples(data.series, m.M, m.arch, m.include_current)
    st = init_trainer(m, samples, seed=ts, refresh_every=cfg.refresh_every())
    t0 = time.perf_counter()
    cks = train(st, schedule or cfg.schedule(), on_checkpoint)
    return Chain(data, cks, time.perf_counter() - t0, ms, ts)


def chain_diagram(cfg: RunConfig, chain: Chain, checkpoints=None) -> analysis.BifurcationDiagram:
    """Machine bifurcation diagram of a chain, seeded from the training data."""
    m = chain.final.machine
    seed = seed_window(chain.data.series, m.arch, m.M)
    return analysis.machine_bifurcation(
        chain.checkpoints if checkpoints is None else checkpoints, seed,
        cfg.section_config(), cfg.free_run(), reference_amplitude=chain.data.series.max_abs())


# -- period bookkeeping ------------------------------------------------------

def row_cluster_counts(rows, frac: float = 0.01) -> list[int | None]:
    """Cluster count per row with one tolerance for all rows.

    The tolerance is ``frac`` of the spread of all points together, so a
    period-1 row (whose own spread is just interpolation noise) still reads
    as one cluster. Diverged or empty rows give ``None``.
    """
    pts = [r.points for r in rows if not r.diverged and r.points.size]
    if not pts:
        return [None] * len(rows)
    allp = np.concatenate(pts)
    tol = frac * float(allp.max() - allp.min())
    out: list[int | None] = []
    for r in rows:
        if r.diverged or r.points.size == 0:
            out.append(None)
        else:
            out.append(analysis.cluster_periods(r.points, tol).count)
    return out


def first_index(counts, pred) -> int | None:
    for i, c in enumerate(counts):
        if c is not None and pred(c):
            return i
    return None


def doubling_onsets(counts) -> tuple[int | None, int | None, int | None]:
    """Indices of the first rows with at least 2, 4 and 8 clusters."""
    return tuple(first_index(counts, lambda c, k=k: c >= k) for k in (2, 4, 8))


# -- prediction ----------------------------------------------------------------

def prediction_error(m: Machine, truth: TimeSeries, seed_records: int, horizon: int) -> float:
    """RMS of free-run minus truth over ``horizon`` steps, relative to amplitude.

    The machine is started from records ``[seed_records - n, seed_records)``
    of ``truth`` (n = M, or one state) and compared with the following
    ``horizon`` records. Amplitude is half the peak-to-peak of the compared
    stretch.
    """
    vals = truth.values
    n = m.M if m.arch is Arch.DELAYED_SCALAR else 1
    seed = TimeSeries.single(vals[seed_records - n:seed_records], truth.tau)
    ref = vals[seed_records:seed_records + horizon]
    if ref.shape[0] < horizon:
        raise ValueError("truth series too short for the horizon")
    pred = predict(m, seed, horizon)
    amp = 0.5 * float(ref.max() - ref.min())
    return float(np.sqrt(np.mean((pred - ref) ** 2))) / amp
