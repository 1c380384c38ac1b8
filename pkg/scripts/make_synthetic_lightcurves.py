"""Regenerate the bundled synthetic light curves in ``src/mcdyn/data``.

Both files mimic a Kepler long-cadence export (``TIME,SAP_FLUX``, days and
electrons per second) with a data gap and a few dropped cadences left blank.

* ``blazhko_synthetic.csv``: RR Lyrae-like pulsation (P = 0.566 d, four
  harmonics) with a 38 d amplitude and phase modulation.
* ``golden_synthetic.csv``: two pulsation modes with frequency ratio 0.618
  plus their lowest combination tone.
"""

import argparse
from pathlib import Path

import numpy as np

CADENCE = 0.0204335  # Kepler long cadence, days
DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "mcdyn" / "data"


def blazhko(t, rng):
    f0, p_bl = 1 / 0.566, 38.0
    mod = 2 * np.pi * t / p_bl
    amp = 1.0 + 0.35 * np.sin(mod)
    phase = 0.25 * np.cos(mod)
    harm = [(1.0, 0.0), (0.47, 0.9), (0.31, 1.9), (0.17, 3.1)]
    sig = sum(a * np.sin(2 * np.pi * k * f0 * t + k * phase + p)
              for k, (a, p) in enumerate(harm, start=1))
    return 14000.0 + 900.0 * amp * sig + rng.normal(0, 6.0, t.size)


def golden(t, rng):
    f0 = 1.45
    f1 = f0 / 0.618
    sig = (np.sin(2 * np.pi * f0 * t) + 0.38 * np.sin(2 * np.pi * f1 * t + 0.7)
           + 0.08 * np.sin(2 * np.pi * (f0 + f1) * t + 1.3))
    return 52000.0 + 1500.0 * sig + rng.normal(0, 8.0, t.size)


def write(path, t, flux, gap, rng, n_dropped):
    keep = ~((t > gap[0]) & (t < gap[1]))
    t, flux = t[keep], flux[keep]
    dropped = set(rng.choice(np.arange(10, t.size - 10), n_dropped, replace=False).tolist())
    with open(path, "w") as fh:
        fh.write("TIME,SAP_FLUX\n")
        for i, (ti, fi) in enumerate(zip(t, flux)):
            fh.write(f"{ti:.6f},{'' if i in dropped else f'{fi:.3f}'}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA_DIR)
    args = ap.parse_args()
    rng = np.random.default_rng(5520878)
    t = np.arange(0.0, 100.0, CADENCE)
    write(args.out / "blazhko_synthetic.csv", t, blazhko(t, rng), (41.3, 42.6), rng, 12)
    t = np.arange(0.0, 40.0, CADENCE)
    write(args.out / "golden_synthetic.csv", t, golden(t, rng), (22.0, 22.8), rng, 6)


if __name__ == "__main__":
    main()
