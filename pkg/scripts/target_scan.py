"""Lorenz bifurcation scan along B with per-row cluster counts.

    python scripts/target_scan.py fig2b
    python scripts/target_scan.py fig4a --branch 0

Writes ``diagram.csv`` and prints the first B with at least 2, 4 and 8
clusters on the chosen branch (initial condition index).
"""

import argparse
import os
from pathlib import Path

from mcdyn import dynsys
from mcdyn.config import RunConfig
from mcdyn.experiments import doubling_onsets, row_cluster_counts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("preset", nargs="?", default="fig2b")
    ap.add_argument("--branch", type=int, default=1)
    args = ap.parse_args()

    cfg = RunConfig.load(args.preset)
    diagram = dynsys.target_bifurcation_scan(
        cfg.system(), cfg.need("scan", "axis"), cfg.scan_values(), cfg.section_config(),
        cfg.free_run(), cfg.need("scan", "inits"), tau=cfg._num("data", "tau", 0.01),
        dt=cfg._num("system", "dt", 1e-3))
    out = Path("runs") / f"{cfg.name}_scan"
    os.makedirs(out, exist_ok=True)
    diagram.to_csv(out / "diagram.csv")

    rows = [r for r in diagram.rows if r.branch == args.branch]
    counts = row_cluster_counts(rows)
    for r, c in zip(rows, counts):
        print(f"B = {r.abscissa:.4f}  clusters {'diverged' if c is None else c}")
    for k, i in zip((2, 4, 8), doubling_onsets(counts)):
        print(f"first >= {k} clusters: {'none' if i is None else f'B = {rows[i].abscissa:.4f}'}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
