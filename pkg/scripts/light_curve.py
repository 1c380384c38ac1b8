"""Train on a light-curve preset, predict past the training window and
report the spectrum of the prediction.

    python scripts/light_curve.py fig8 --max-attempts 2000000

Outputs go to ``runs/<preset>_lightcurve``: ``prediction.csv`` (time,
normalised and flux units), ``spectrum.csv`` and ``section_map.csv``.
"""

import argparse
import csv
import os
from pathlib import Path

import numpy as np

from mcdyn import analysis
from mcdyn.config import RunConfig
from mcdyn.experiments import run_chain, seed_window
from mcdyn.machine import predict
from mcdyn.timeseries import TimeSeries
from mcdyn.trainer import TrainSchedule


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("preset", nargs="?", default="fig8")
    ap.add_argument("--max-attempts", type=int, default=2_000_000)
    ap.add_argument("--horizon-days", type=float, default=20.0)
    args = ap.parse_args()

    cfg = RunConfig.load(args.preset)
    sched = TrainSchedule(max(1, args.max_attempts // 10), args.max_attempts)
    chain = run_chain(cfg, schedule=sched)
    best = chain.best
    print(f"trained {best.attempts} attempts in {chain.seconds:.0f} s, lambda {best.lam:.4g}")

    series = chain.data.series
    seed = seed_window(series, best.machine.arch, best.machine.M, at_end=True)
    n = int(round(args.horizon_days / series.tau))
    vals = predict(best.machine, seed, n)[:, 0]
    t = seed.times(0)[-1] + series.tau * np.arange(1, n + 1)
    out = Path("runs") / f"{cfg.name}_lightcurve"
    os.makedirs(out, exist_ok=True)
    with open(out / "prediction.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value", "flux"])
        flux = chain.data.norm.denormalize(vals) if chain.data.norm else vals
        for row in zip(t, vals, flux):
            w.writerow([repr(float(x)) for x in row])

    pred = TimeSeries.single(vals, series.tau, t[0])
    spec = analysis.periodogram(pred)
    spec.to_csv(out / "spectrum.csv")
    for rank, (f, p) in enumerate(spec.peaks[:4]):
        print(f"peak {rank}: f = {f:.4f} c/d, power {p:.3g}")
    if len(spec.peaks) >= 2:
        print(f"ratio of the two strongest peaks: {spec.peak_ratio():.4f}")
    pairs = analysis.section_map(pred, cfg._num("section_map", "c", 0.0),
                                 cfg._num("section_map", "T1", 0.1),
                                 cfg._num("section_map", "T2", 0.2))
    np.savetxt(out / "section_map.csv", pairs, delimiter=",", header="delay1,delay2",
               comments="")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
